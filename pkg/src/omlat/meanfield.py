"""Homogeneous Gutzwiller mean field of the driven-dissipative lattice.

The lattice density matrix is factorized into identical single-site states.
Projecting the three-site engineered channels onto one site turns the
Liouvillian into a nonlinear local generator

    L_mf[rho] = sum_{ij} [Gamma (n_th+1) L1_ij + Gamma n_th L2_ij]
                  (2 A_i† rho A_j - {A_j A_i†, rho}),
    A = (1, a, a†, a†a),

whose 4x4 coefficient tables L1, L2 depend on seven first-to-cubic moments
of rho itself.  The anticommutator operand A_j A_i† is the unique ordering
that makes every (i, j) term traceless.  Incoherent pump/loss channels
Upsilon L[a†] + kappa L[a] complete the model; their competition with the
phase-locking channels drives the coherence transition.

`decouple_generic` re-derives the hard-coded tables from the lattice jump
operators and serves as the transcription oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_model import ArrayParams, LatticeOperator, lattice_jump_ops

__all__ = [
    "Moments",
    "MeanFieldParams",
    "MeanFieldState",
    "MeanFieldTrajectory",
    "appD_matrices",
    "decouple_generic",
    "MeanFieldGenerator",
    "evolve_meanfield",
    "transition_sweep",
    "GAMMA_PRIME_OVER_GAMMA",
]

# rescaled driving strength Gamma' = (156/3) Gamma; the large factor collects
# the many nonlocal terms of the decoupled channels
GAMMA_PRIME_OVER_GAMMA = 52.0


@dataclass(frozen=True)
class Moments:
    """The seven onsite expectations entering the coefficient tables.

    Only four are independent; the daggered partners are exposed as
    conjugate properties so the pairing constraints hold by construction.
    """

    a: complex
    n: float
    aa: complex
    adaa: complex

    @property
    def ad(self) -> complex:
        return np.conj(self.a)

    @property
    def adad(self) -> complex:
        return np.conj(self.aa)

    @property
    def adada(self) -> complex:
        return np.conj(self.adaa)


@dataclass(frozen=True)
class MeanFieldParams:
    """Rates of the local mean-field problem, in units of kappa by convention."""

    Gamma: float
    Upsilon: float
    kappa: float = 1.0
    chi: float = 1.0
    n_th: float = 0.0

    def __post_init__(self):
        if min(self.Gamma, self.Upsilon, self.kappa) < 0 or self.n_th < 0:
            raise ValueError("rates must be nonnegative")
        if self.Upsilon >= self.kappa:
            raise ValueError(
                f"stability requires Upsilon < kappa, got {self.Upsilon} >= {self.kappa}"
            )

    @property
    def Gamma_prime(self) -> float:
        return GAMMA_PRIME_OVER_GAMMA * self.Gamma

    @classmethod
    def from_gamma_prime(cls, gamma_prime: float, upsilon: float, kappa: float = 1.0,
                         chi: float = 1.0, n_th: float = 0.0) -> "MeanFieldParams":
        return cls(Gamma=gamma_prime / GAMMA_PRIME_OVER_GAMMA, Upsilon=upsilon,
                   kappa=kappa, chi=chi, n_th=n_th)

    @property
    def n_infinity(self) -> float:
        return self.Upsilon / (self.kappa - self.Upsilon)


def appD_matrices(m: Moments, chi: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient tables of the decoupled engineered channels.

    L1 multiplies the (n_th + 1) family, L2 the n_th family.  Entries are
    conjugate-paired, L_ij = conj(L_ji), so the generator maps Hermitian
    matrices to Hermitian matrices.
    """
    c1 = 1 + chi + chi ** 2
    c2 = 4 + 7 * chi + 4 * chi ** 2
    c3 = 1 + 2 * chi + 2 * chi ** 2
    c4 = 2 + 3 * chi
    cc = chi * (1 + chi)

    l1 = np.zeros((4, 4), dtype=complex)
    l1[0, 1] = 2 * (2 * m.ad * (c1 - cc * m.n) + c2 * m.adada)
    l1[1, 0] = 2 * (2 * m.a * (c1 - cc * m.n) + c2 * m.adaa)
    l1[1, 1] = 4 * (m.n + cc * (m.ad * m.a + m.n))
    l1[1, 2] = -2 * (chi * m.a ** 2 + 2 * (1 + chi) * m.aa)
    l1[1, 3] = -4 * c3 * m.a
    l1[2, 1] = -2 * (chi * m.ad ** 2 + 2 * (1 + chi) * m.adad)
    l1[2, 2] = 4 * c1 * (m.n + 1)
    l1[2, 3] = 2 * c4 * m.ad
    l1[3, 1] = -4 * c3 * m.ad
    l1[3, 2] = 2 * c4 * m.a
    l1[3, 3] = 4 * c3

    l2 = np.zeros((4, 4), dtype=complex)
    l2[0, 1] = -2 * (m.ad * (c4 - 2 * cc * m.n) + c2 * m.adada)
    l2[1, 0] = -2 * (m.a * (c4 - 2 * cc * m.n) + c2 * m.adaa)
    l2[1, 1] = 4 * c1 * m.n
    l2[1, 2] = -2 * (chi * m.a ** 2 + 2 * (1 + chi) * m.aa)
    l2[1, 3] = 2 * c4 * m.a
    l2[2, 1] = -2 * (chi * m.ad ** 2 + 2 * (1 + chi) * m.adad)
    l2[2, 2] = 4 * (cc * m.ad * m.a + c1 * (m.n + 1))
    l2[2, 3] = -4 * c3 * m.ad
    l2[3, 1] = 2 * c4 * m.ad
    l2[3, 2] = -4 * c3 * m.a
    l2[3, 3] = 4 * c3
    return l1, l2


# ---------------------------------------------------------------------------
# generic mean-field decoupling of multi-site Lindblad channels
# ---------------------------------------------------------------------------

_I_INDEX = {"1": 0, "ad": 1, "a": 2, "n": 3}   # A_i† equals the local left factor
_J_INDEX = {"1": 0, "a": 1, "ad": 2, "n": 3}   # A_j equals the local right factor


def _site_map(factors) -> dict[int, str]:
    """Collapse ordered ladder factors into one composite label per site."""
    out: dict[int, str] = {}
    for band, kind, off in factors:
        if band != "a":
            raise ValueError("decoupling expects single-band (reduced) operators")
        label = "ad" if kind == "+" else "a"
        if off not in out:
            out[off] = label
        elif out[off] == "ad" and label == "a":
            out[off] = "n"
        else:
            raise ValueError(f"unsupported onsite product {out[off]}·{label}")
    return out


def _cross_moment(b_label: str, a_label: str, m: Moments) -> complex:
    """<B A> for one spectator site, B from the daggered term, A from the term."""
    table = {
        ("1", "1"): 1.0,
        ("1", "a"): m.a, ("1", "ad"): m.ad, ("1", "n"): m.n,
        ("a", "1"): m.a, ("ad", "1"): m.ad, ("n", "1"): m.n,
        ("a", "a"): m.aa,
        ("a", "ad"): m.n + 1.0,
        ("a", "n"): m.adaa + m.a,
        ("ad", "a"): m.n,
        ("ad", "ad"): m.adad,
        ("ad", "n"): m.adada,
        ("n", "a"): m.adaa,
        ("n", "ad"): m.adada + m.ad,
    }
    try:
        return table[(b_label, a_label)]
    except KeyError:
        raise NotImplementedError(f"spectator moment <{b_label}·{a_label}> not closed "
                                  "in the tracked moment set") from None


_DAGGER_LABEL = {"1": "1", "a": "ad", "ad": "a", "n": "n"}


def decouple_generic(jump_ops: list[LatticeOperator], m: Moments) -> np.ndarray:
    """Project translation-invariant Lindblad channels onto one site.

    For each channel sum_ell Lambda[K_ell] (unit weight per position) and
    each pair of terms (t, t'), every site of the pair's joint support in
    turn plays the local role while the remaining sites contribute the
    cross-expectations <B A> of their daggered-times-undaggered factors.
    Returns the 4x4 coefficient matrix over A = (1, a, a†, a†a).

    Identity-paired entries are pure commutator terms with a two-way
    redundancy: a coefficient x at (0, j) generates -[A_j, rho], the same
    superoperator as -x at (i, 0) with A_i† = A_j.  The result is
    canonicalized to the gauge where the identity pairs only with a, the
    convention of the hard-coded tables.
    """
    c = np.zeros((4, 4), dtype=complex)
    for op in jump_ops:
        terms = [(coeff, _site_map(factors)) for coeff, factors in op.terms]
        for coeff_t, sites_t in terms:
            for coeff_t2, sites_t2 in terms:
                weight0 = coeff_t * np.conj(coeff_t2)
                sites_b = {off: _DAGGER_LABEL[lab] for off, lab in sites_t2.items()}
                support = sorted(set(sites_t) | set(sites_b))
                for local in support:
                    a_loc = sites_t.get(local, "1")
                    b_loc = sites_b.get(local, "1")
                    spec = 1.0 + 0.0j
                    for other in support:
                        if other == local:
                            continue
                        spec *= _cross_moment(sites_b.get(other, "1"),
                                              sites_t.get(other, "1"), m)
                    c[_I_INDEX[a_loc], _J_INDEX[b_loc]] += weight0 * spec
    # fold the redundant identity pairings into the table convention
    c[0, 1] -= c[2, 0]
    c[2, 0] = 0.0
    c[1, 0] -= c[0, 2]
    c[0, 2] = 0.0
    c[3, 0] -= c[0, 3]
    c[0, 3] = 0.0
    return c


# ---------------------------------------------------------------------------
# local nonlinear generator and its propagation
# ---------------------------------------------------------------------------

class MeanFieldGenerator:
    """Engineered + pump/loss generator on one truncated mode."""

    def __init__(self, params: MeanFieldParams, n_max: int = 12):
        self.params = params
        self.n_max = n_max
        d = n_max + 1
        a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
        ad = a.conj().T
        n_op = ad @ a
        eye = np.eye(d, dtype=complex)
        self._a, self._ad, self._n = a, ad, n_op
        self._a_ops = [eye, a, ad, n_op]
        self._a_dag = [eye, ad, a, n_op]
        # prods[i, j] = A_j A_i†
        self._prods = np.array([[self._a_ops[j] @ self._a_dag[i] for j in range(4)]
                                for i in range(4)])
        self._aa = a @ a
        self._adaa = ad @ a @ a
        self._ad2a2 = ad @ ad @ a @ a
        # static pump/loss drift: kappa L[a] + Upsilon L[a†]
        p = params
        self._pl_drift = -(p.kappa * n_op + p.Upsilon * (a @ ad))
        self._x_op = a + ad

    def moments(self, rho: np.ndarray) -> Moments:
        return Moments(
            a=complex(np.einsum("ij,ji->", self._a, rho)),
            n=complex(np.einsum("ij,ji->", self._n, rho)).real,
            aa=complex(np.einsum("ij,ji->", self._aa, rho)),
            adaa=complex(np.einsum("ij,ji->", self._adaa, rho)),
        )

    def observables(self, rho: np.ndarray) -> tuple[float, float, float]:
        """(n, coherent fraction |<a>|^2/n, g2(0))."""
        n = float(np.einsum("ij,ji->", self._n, rho).real)
        alpha2 = abs(np.einsum("ij,ji->", self._a, rho)) ** 2
        g2 = float(np.einsum("ij,ji->", self._ad2a2, rho).real / n ** 2) if n > 1e-12 else 0.0
        coh = alpha2 / n if n > 1e-12 else 0.0
        return n, coh, g2

    def coefficient_matrix(self, m: Moments) -> np.ndarray:
        p = self.params
        l1, l2 = appD_matrices(m, p.chi)
        return p.Gamma * (p.n_th + 1) * l1 + p.Gamma * p.n_th * l2

    def apply_engineered(self, rho: np.ndarray) -> np.ndarray:
        """Action of the phase-locking channels alone."""
        cmat = self.coefficient_matrix(self.moments(rho))
        s_op = np.einsum("ij,ijkl->kl", cmat, self._prods)
        out = -(s_op @ rho) - (rho @ s_op)
        for i in range(4):
            r_i = np.tensordot(cmat[i], np.array(self._a_ops), axes=1)
            out += 2.0 * (self._a_dag[i] @ rho @ r_i)
        return out

    def apply(self, rho: np.ndarray, seed_amplitude: complex = 0.0) -> np.ndarray:
        """Full nonlinear action; moments are taken from the input matrix."""
        p = self.params
        out = self.apply_engineered(rho)
        # pump and loss
        out += self._pl_drift @ rho + rho @ self._pl_drift
        out += 2.0 * p.kappa * (self._a @ rho @ self._ad)
        out += 2.0 * p.Upsilon * (self._ad @ rho @ self._a)
        if seed_amplitude != 0.0:
            h_seed = seed_amplitude * self._x_op
            out += -1j * (h_seed @ rho - rho @ h_seed)
        return out


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    n: np.ndarray
    coherent_fraction: np.ndarray
    g2: np.ndarray
    rho_final: np.ndarray
    trace_drift: float
    herm_defect: float
    min_eigenvalue: float


def evolve_meanfield(gen: MeanFieldGenerator, rho0: np.ndarray, dt: float,
                     t_final: float, seed_amplitude: complex = 0.0,
                     seed_until: float = 0.0, output_stride: int = 10) -> MeanFieldTrajectory:
    """RK4 with moments refreshed at every stage (fully nonlinear stepping).

    The coherent seed acts only for t < seed_until.  Aborts when the trace
    drifts by more than 1e-5.
    """
    rho = np.array(rho0, dtype=complex)
    n_steps = max(1, int(round(t_final / dt)))
    n_rec = n_steps // output_stride + 1
    times = np.empty(n_rec)
    n_arr = np.empty(n_rec)
    coh_arr = np.empty(n_rec)
    g2_arr = np.empty(n_rec)
    trace_drift = 0.0
    herm_defect = 0.0
    min_eig = np.inf
    pos_every = max(1, n_rec // 6)

    def record(idx, rec):
        nonlocal trace_drift, herm_defect, min_eig
        t = idx * dt
        times[rec] = t
        n_arr[rec], coh_arr[rec], g2_arr[rec] = gen.observables(rho)
        drift = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
        trace_drift = max(trace_drift, drift)
        if drift > 1e-5:
            raise FloatingPointError(
                f"trace drift {drift:.2e} exceeds 1e-5 at t = {t:.6g}; reduce dt"
            )
        herm_defect = max(herm_defect, float(np.max(np.abs(rho - rho.conj().T))))
        if rec % pos_every == 0 or rec == n_rec - 1:
            min_eig = min(min_eig, float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]))

    record(0, 0)
    rec = 1
    for step in range(1, n_steps + 1):
        t = (step - 1) * dt

        def seed_at(tau):
            return seed_amplitude if tau < seed_until else 0.0

        k1 = gen.apply(rho, seed_at(t))
        k2 = gen.apply(rho + 0.5 * dt * k1, seed_at(t + 0.5 * dt))
        k3 = gen.apply(rho + 0.5 * dt * k2, seed_at(t + 0.5 * dt))
        k4 = gen.apply(rho + dt * k3, seed_at(t + dt))
        rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % output_stride == 0:
            record(step, rec)
            rec += 1

    return MeanFieldTrajectory(
        times=times[:rec], n=n_arr[:rec], coherent_fraction=coh_arr[:rec],
        g2=g2_arr[:rec], rho_final=rho, trace_drift=trace_drift,
        herm_defect=herm_defect, min_eigenvalue=min_eig,
    )


def vacuum_rho(n_max: int) -> np.ndarray:
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def sweep_point(gamma_prime: float, upsilon: float, kappa: float = 1.0,
                chi: float = 1.0, n_th: float = 0.0, n_max: int = 12,
                dt: float = 5e-3, t_final: float = 80.0,
                seed_amplitude: float = 0.1, seed_until: float = 1.0) -> dict:
    """One transition-sweep point: vacuum + weak seed, evolved to late time."""
    params = MeanFieldParams.from_gamma_prime(gamma_prime, upsilon, kappa,
                                              chi=chi, n_th=n_th)
    gen = MeanFieldGenerator(params, n_max=n_max)
    traj = evolve_meanfield(gen, vacuum_rho(n_max), dt=dt, t_final=t_final,
                            seed_amplitude=seed_amplitude * kappa,
                            seed_until=seed_until / kappa, output_stride=50)
    tail = max(2, len(traj.times) // 10)
    settle = float(np.max(traj.coherent_fraction[-tail:]) - np.min(traj.coherent_fraction[-tail:]))
    return {
        "Gamma_prime": gamma_prime,
        "n": float(traj.n[-1]),
        "coh_frac": float(traj.coherent_fraction[-1]),
        "g2": float(traj.g2[-1]),
        "settle_band": settle,
        "trace_drift": traj.trace_drift,
        "min_eigenvalue": traj.min_eigenvalue,
    }


def transition_sweep(gamma_prime_grid, upsilon: float, kappa: float = 1.0,
                     chi: float = 1.0, n_th: float = 0.0, n_max: int = 12,
                     dt: float = 5e-3, t_final: float = 80.0,
                     seed_amplitude: float = 0.1, seed_until: float = 1.0,
                     point_runner=None) -> list[dict]:
    """Steady observables across a sorted grid of rescaled driving strengths."""
    grid = [float(g) for g in gamma_prime_grid]
    if sorted(grid) != grid:
        raise ValueError("Gamma_prime grid must be sorted ascending")
    args = [(g, upsilon, kappa, chi, n_th, n_max, dt, t_final, seed_amplitude, seed_until)
            for g in grid]
    if point_runner is None:
        return [sweep_point(*a) for a in args]
    return list(point_runner(args))


def meanfield_params_matrices(params: MeanFieldParams, rho: np.ndarray,
                              n_max: int) -> np.ndarray:
    """Convenience: coefficient matrix evaluated on a given state."""
    gen = MeanFieldGenerator(params, n_max=n_max)
    return gen.coefficient_matrix(gen.moments(rho))


def lattice_pattern_ops(chi: float) -> list[LatticeOperator]:
    """Stripped reduced channel patterns used by the transcription oracle."""
    p = ArrayParams(L=6, E=1.0, Delta=1.0, chi=chi)
    return lattice_jump_ops(p, reduced=True, stripped=True)
