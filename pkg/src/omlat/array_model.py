"""Membrane-array lattice: staggered two-band jump operators, their adiabatic
single-band reduction, momentum-space dark-state checks, and the
phase-locking semiclassical dynamics.

Sites ell = 1..L each carry a lower mode a_ell; links carry an intermediate
mode c_ell that is driven from its neighboring lower modes with a staggered
sign (-1)^ell.  Each membrane contributes one dissipative channel:

    K_{2 ell - 1} = chi a_ell† (c_{ell-1} + c_ell) + (a_ell† + a_{ell+1}†) c_ell
    K_{2 ell}     = chi a_{ell+1}† (c_ell + c_{ell+1}) + (a_ell† + a_{ell+1}†) c_ell

Eliminating the intermediate band via c_ell -> (-1)^ell (E/Delta)(a_ell -
a_{ell+1}) produces three-site quadratic jump operators whose momentum-space
form carries a factor (e^{ik} - 1): the k = 0 mode is exactly dark.

Operators are kept symbolically as coefficient lists over products of
single-site factors, which is what both the dark-state brute force and the
mean-field decoupler consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "ArrayParams",
    "SemiclassicalState",
    "LatticeOperator",
    "lattice_jump_ops",
    "substitute_adiabatic",
    "momentum_dark_state_check",
    "single_particle_residual",
    "condensate_residual",
    "semiclassical_rhs",
    "integrate_semiclassical",
    "relative_phases",
    "run_phase_locking",
    "appendixA_transformation_check",
]


@dataclass(frozen=True)
class ArrayParams:
    """Lattice of L doublets with periodic boundaries."""

    L: int
    E: float = 0.2
    Delta: float = -10.0
    chi: float = 0.0
    Gamma_tilde: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("need at least two doublets")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are implemented")
        if self.L % 2:
            raise ValueError(
                "periodic staggering (-1)^ell requires an even number of doublets"
            )


@dataclass(frozen=True)
class SemiclassicalState:
    """Per-site amplitudes <a_ell> and per-link amplitudes <c_ell>."""

    alpha: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=complex)
        c = np.asarray(self.c, dtype=complex)
        if a.shape != c.shape or a.ndim != 1:
            raise ValueError("alpha and c must be equal-length 1-d arrays")
        if not (np.all(np.isfinite(a.view(float))) and np.all(np.isfinite(c.view(float)))):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.alpha) ** 2) + np.sum(np.abs(self.c) ** 2))


# ---------------------------------------------------------------------------
# symbolic lattice operators
# ---------------------------------------------------------------------------
# one factor: (band, kind, offset) with band "a"|"c", kind "+" (creation) or
# "-" (annihilation), offset relative to the channel anchor site.

Factor = tuple[str, str, int]


@dataclass(frozen=True)
class LatticeOperator:
    """Sum of products of ladder factors with relative site offsets."""

    terms: tuple[tuple[complex, tuple[Factor, ...]], ...]

    def dagger(self) -> "LatticeOperator":
        flipped = []
        for coeff, factors in self.terms:
            rev = tuple(
                (band, "+" if kind == "-" else "-", off) for band, kind, off in reversed(factors)
            )
            flipped.append((np.conj(coeff), rev))
        return LatticeOperator(tuple(flipped))

    def coefficients(self) -> dict[tuple[Factor, ...], complex]:
        out: dict[tuple[Factor, ...], complex] = {}
        for coeff, factors in self.terms:
            out[factors] = out.get(factors, 0.0) + coeff
        return {k: v for k, v in out.items() if abs(v) > 1e-15}


def lattice_jump_ops(p: ArrayParams, reduced: bool = False,
                     stripped: bool = False) -> list[LatticeOperator]:
    """The two channel families as relative-offset patterns.

    Returned patterns omit the per-channel staggered sign (-1)^ell, which is
    a pure phase of each channel and cancels in every Lindblad rate; the
    anchor of family 0 (odd channels) is the left site ell, of family 1
    (even channels) the shared link.  With reduced=True the intermediate
    band is adiabatically eliminated; stripped additionally drops the E/Delta
    prefactor, leaving the bare coefficient pattern.
    """
    chi = p.chi
    if not reduced:
        k_odd = LatticeOperator((
            (chi, (("a", "+", 0), ("c", "-", -1))),
            (chi, (("a", "+", 0), ("c", "-", 0))),
            (1.0, (("a", "+", 0), ("c", "-", 0))),
            (1.0, (("a", "+", 1), ("c", "-", 0))),
        ))
        k_even = LatticeOperator((
            (chi, (("a", "+", 1), ("c", "-", 0))),
            (chi, (("a", "+", 1), ("c", "-", 1))),
            (1.0, (("a", "+", 0), ("c", "-", 0))),
            (1.0, (("a", "+", 1), ("c", "-", 0))),
        ))
        return [k_odd, k_even]

    pref = 1.0 if stripped else p.E / p.Delta
    k_odd = LatticeOperator((
        (pref * (2 * chi + 1), (("a", "+", 0), ("a", "-", 0))),
        (-pref, (("a", "+", 1), ("a", "-", 1))),
        (-pref * (1 + chi), (("a", "+", 0), ("a", "-", 1))),
        (pref, (("a", "+", 1), ("a", "-", 0))),
        (-pref * chi, (("a", "+", 0), ("a", "-", -1))),
    ))
    k_even = LatticeOperator((
        (pref, (("a", "+", 0), ("a", "-", 0))),
        (-pref * (2 * chi + 1), (("a", "+", 1), ("a", "-", 1))),
        (pref * (chi + 1), (("a", "+", 1), ("a", "-", 0))),
        (-pref, (("a", "+", 0), ("a", "-", 1))),
        (pref * chi, (("a", "+", 1), ("a", "-", 2))),
    ))
    return [k_odd, k_even]


def substitute_adiabatic(op: LatticeOperator, p: ArrayParams) -> LatticeOperator:
    """Replace each c factor by its slaved value, at the pattern level.

    A channel anchored at site ell carries relative offsets, so the absolute
    staggering (-1)^(ell+delta) splits into the channel's own (-1)^ell (a
    phase, dropped as in lattice_jump_ops) times (-1)^delta kept here.
    """
    out = []
    for coeff, factors in op.terms:
        expanded = [(coeff, ())]
        for band, kind, off in factors:
            if band == "a":
                expanded = [(c, f + ((band, kind, off),)) for c, f in expanded]
                continue
            if kind != "-":
                raise ValueError("adiabatic substitution defined for c annihilation only")
            sign = -1.0 if off % 2 else 1.0
            pref = sign * p.E / p.Delta
            new = []
            for c, f in expanded:
                new.append((c * pref, f + (("a", "-", off),)))
                new.append((c * (-pref), f + (("a", "-", off + 1),)))
            expanded = new
        out.extend(expanded)
    return LatticeOperator(tuple(out))


# ---------------------------------------------------------------------------
# dark-state checks
# ---------------------------------------------------------------------------

def _reduced_hop_matrix(op: LatticeOperator, anchor: int, L: int) -> np.ndarray:
    """K = sum_{ij} M[i, j] a_i† a_j for one reduced channel on the ring."""
    m = np.zeros((L, L), dtype=complex)
    for coeff, factors in op.terms:
        if len(factors) != 2 or factors[0][1] != "+" or factors[1][1] != "-":
            raise ValueError("reduced channels must be normal-ordered quadratic")
        i = (anchor + factors[0][2]) % L
        j = (anchor + factors[1][2]) % L
        m[i, j] += coeff
    return m


def single_particle_residual(p: ArrayParams, k_index: int) -> float:
    """Max over channels of ||K |k>|| for the one-photon plane wave."""
    L = p.L
    k = 2 * np.pi * k_index / L
    v = np.exp(1j * k * np.arange(L)) / math.sqrt(L)
    worst = 0.0
    for op in lattice_jump_ops(p, reduced=True):
        for anchor in range(L):
            m = _reduced_hop_matrix(op, anchor, L)
            worst = max(worst, float(np.linalg.norm(m @ v)))
    return worst


def _number_sector(L: int, n: int):
    """Occupation basis of the fixed-photon-number sector on L sites."""
    states = []
    for comb in combinations_with_replacement(range(L), n):
        occ = [0] * L
        for site in comb:
            occ[site] += 1
        states.append(tuple(occ))
    index = {s: i for i, s in enumerate(states)}
    return states, index


def _sector_apply(m: np.ndarray, states, index, vec: np.ndarray) -> np.ndarray:
    """Apply sum_ij M_ij a_i† a_j within a fixed-number sector."""
    L = m.shape[0]
    out = np.zeros_like(vec)
    nz = np.argwhere(np.abs(m) > 1e-15)
    for s_idx, occ in enumerate(states):
        amp = vec[s_idx]
        if amp == 0:
            continue
        for i, j in nz:
            if occ[j] == 0:
                continue
            if i == j:
                out[s_idx] += m[i, j] * occ[j] * amp
                continue
            new = list(occ)
            factor = math.sqrt(occ[j]) * math.sqrt(new[i] + 1)
            new[j] -= 1
            new[i] += 1
            out[index[tuple(new)]] += m[i, j] * factor * amp
    return out


def condensate_residual(p: ArrayParams, n_photons: int) -> float:
    """Max over channels of ||K |k=0, N>|| for the N-photon condensate.

    Brute force in the fixed-number sector; the condensate amplitudes are
    the symmetric multinomial weights.
    """
    L = p.L
    states, index = _number_sector(L, n_photons)
    vec = np.zeros(len(states), dtype=complex)
    for s_idx, occ in enumerate(states):
        w = math.factorial(n_photons)
        for n in occ:
            w /= math.factorial(n)
        vec[s_idx] = math.sqrt(w / L ** n_photons)
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-12
    worst = 0.0
    for op in lattice_jump_ops(p, reduced=True):
        for anchor in range(L):
            m = _reduced_hop_matrix(op, anchor, L)
            worst = max(worst, float(np.linalg.norm(_sector_apply(m, states, index, vec))))
    return worst


def momentum_dark_state_check(p: ArrayParams, k_index: int,
                              n_photons: int = 1) -> float:
    """Residual norm of the reduced channels on a Brillouin-grid state.

    Single photons are handled for any k; multi-photon states are supported
    at k = 0 (the condensate) by brute-force sector arithmetic.
    """
    if n_photons == 1:
        return single_particle_residual(p, k_index)
    if k_index % p.L != 0:
        raise ValueError("multi-photon check implemented at k = 0 only")
    return condensate_residual(p, n_photons)


# ---------------------------------------------------------------------------
# semiclassical dynamics
# ---------------------------------------------------------------------------

def _stagger(L: int) -> np.ndarray:
    # (-1)^ell for 1-based site index ell
    return np.where(np.arange(L) % 2 == 0, -1.0, 1.0)


def semiclassical_rhs(p: ArrayParams, alpha: np.ndarray, c: np.ndarray):
    """Drift of the factorized amplitude equations (zero-temperature).

    Obtained from the exact operator equations of motion for <a_ell> and
    <c_ell> under the Hamiltonian and the full two-band channels, with every
    product expectation replaced by the product of amplitudes (see
    THEORY.md).  The drift conserves sum |alpha|^2 + |c|^2 identically.
    """
    chi, e_drv, delta, gt = p.chi, p.E, p.Delta, p.Gamma_tilde
    s = _stagger(len(alpha))
    a_r = np.roll(alpha, -1)      # alpha_{m+1}
    c_l = np.roll(c, 1)           # c_{m-1}
    ac = np.conj(alpha)

    w_odd = chi * ac * (c_l + c) + (ac + np.conj(a_r)) * c
    w_even = chi * np.conj(a_r) * (c + np.roll(c, -1)) + (ac + np.conj(a_r)) * c
    wo_c = np.conj(w_odd)
    we_c = np.conj(w_even)

    d_alpha = -1j * s * np.conj(e_drv) * (c + c_l)
    d_alpha += gt * (
        wo_c * (chi * (c_l + c) + c)
        + np.roll(wo_c, 1) * c_l
        + np.roll(we_c, 1) * (chi * (c_l + c) + c_l)
        + we_c * c
    )

    d_c = 1j * delta * c - 1j * s * e_drv * (alpha - a_r)
    d_c -= gt * (
        chi * a_r * np.roll(w_odd, -1)
        + (chi * alpha + alpha + a_r) * w_odd
        + (chi * a_r + alpha + a_r) * w_even
        + chi * alpha * np.roll(w_even, 1)
    )
    return d_alpha, d_c


def integrate_semiclassical(p: ArrayParams, state0: SemiclassicalState, dt: float,
                            t_final: float, output_stride: int = 1,
                            rtol: float = 1e-10, atol: float = 1e-12):
    """Integrate the amplitude equations; returns (times, alpha, c) records.

    Uses an adaptive high-order explicit method (DOP853): after the fast
    intermediate-band transient (rate ~ 4 Gamma_tilde) the dynamics crawls at
    the phase-locking rate ~ Gamma_tilde (2 E / Delta)^2, several decades
    slower, so fixed stepping would waste almost every step.  `dt` sets the
    output grid spacing dt * output_stride.
    """
    from scipy.integrate import solve_ivp

    if dt <= 0:
        raise ValueError("dt must be positive")
    L = len(state0.alpha)
    y0 = np.concatenate([state0.alpha, state0.c]).astype(complex)

    def rhs(_t, y):
        da, dc = semiclassical_rhs(p, y[:L], y[L:])
        return np.concatenate([da, dc])

    t_eval = np.arange(0.0, t_final + 0.5 * dt * output_stride, dt * output_stride)
    t_eval = t_eval[t_eval <= t_final + 1e-12]
    sol = solve_ivp(rhs, (0.0, t_final), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise FloatingPointError(f"semiclassical integration failed: {sol.message}")
    y = sol.y.T
    return sol.t, y[:, :L].copy(), y[:, L:].copy()


def relative_phases(alpha: np.ndarray) -> np.ndarray:
    """Link phases Arg[alpha_ell alpha*_{ell+1}], wrapped to (-pi, pi].

    Links touching a zero amplitude are flagged with NaN.
    """
    a = np.asarray(alpha, dtype=complex)
    prod = a * np.conj(np.roll(a, -1))
    phi = np.angle(prod)
    phi[phi <= -np.pi] = np.pi
    phi = np.where(np.abs(prod) == 0.0, np.nan, phi)
    return phi


def run_phase_locking(p: ArrayParams, rng_seed: int, t_final: float, dt: float,
                      output_stride: int = 100):
    """Phase-locking run: unit amplitudes, seeded random phases, empty links."""
    rng = np.random.default_rng(rng_seed)
    phases = rng.uniform(-np.pi, np.pi, size=p.L)
    state0 = SemiclassicalState(np.exp(1j * phases), np.zeros(p.L, dtype=complex))
    times, alphas, cs = integrate_semiclassical(p, state0, dt, t_final, output_stride)
    return times, alphas, cs, phases


# ---------------------------------------------------------------------------
# single-particle transformation check
# ---------------------------------------------------------------------------

def appendixA_transformation_check(j_hop: float, L: int = 2):
    """Defects of the band-diagonalizing quasi-orthogonal transformation.

    Builds the 2L x 2L single-particle Hamiltonian of the alternating
    double-well ring (diagonal -+1/2, hopping j_hop, periodic) and the
    transformation M with the same ring structure over diagonal -+1.
    Returns (max |M M^T - 1|, max off-diagonal magnitude of M H M^-1); both
    vanish quadratically as j_hop -> 0.
    """
    n = 2 * L
    diag_h = np.tile([-0.5, 0.5], L)
    ring = np.zeros((n, n))
    for i in range(n):
        ring[i, (i + 1) % n] = 1.0
        ring[i, (i - 1) % n] = 1.0
    h = np.diag(diag_h) + j_hop * ring
    m = np.diag(np.tile([-1.0, 1.0], L)) + j_hop * ring
    if abs(np.linalg.det(m)) < 1e-12:
        raise np.linalg.LinAlgError("transformation matrix is singular")
    orth_defect = float(np.max(np.abs(m @ m.T - np.eye(n))))
    t = m @ h @ np.linalg.inv(m)
    offdiag = t - np.diag(np.diag(t))
    return orth_defect, float(np.max(np.abs(offdiag)))
