"""Master-equation assembly, RK4 propagation, steady states, and spectra.

The generator acts matrix-free: rather than materializing a dim^2 x dim^2
superoperator, each application computes

    L[rho] = G rho + rho G†  +  sum_l 2 r_l K_l rho K_l†,
    G = -i H - sum_l r_l K_l† K_l,

which is exact for a Hamiltonian plus Lindblad channels with the convention
L_l[rho] = r_l (2 K rho K† - K†K rho - rho K†K).  Propagation is classical
fourth-order Runge-Kutta with fixed step; trace, Hermiticity, and positivity
drifts are monitored and reported, never silently repaired.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fock import DensityMatrix, FockOperator, ModeLayout

__all__ = [
    "LindbladChannel",
    "MasterEquation",
    "EvolutionResult",
    "SpectrumResult",
    "SteadyStateError",
    "NumericalAbort",
    "lindblad_apply",
    "evolve_rk4",
    "steady_state",
    "two_time_correlator",
    "spectrum",
    "spectral_peaks",
]


class SteadyStateError(RuntimeError):
    """Long-time integration did not reach the residual target."""

    def __init__(self, message, residual, rho=None):
        super().__init__(message)
        self.residual = residual
        self.rho = rho


class NumericalAbort(RuntimeError):
    """NaN or runaway trace detected during propagation."""


@dataclass(frozen=True)
class LindbladChannel:
    """One dissipative channel: rate prefactor times the 2K.K† - {K†K,.} form."""

    jump: FockOperator
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"channel rate must be nonnegative, got {self.rate}")


class MasterEquation:
    """Hamiltonian plus a list of Lindblad channels on one mode layout."""

    def __init__(self, hamiltonian: FockOperator, channels: list[LindbladChannel]):
        if not hamiltonian.is_hermitian(1e-9):
            defect = np.max(np.abs(hamiltonian.mat - hamiltonian.mat.conj().T))
            raise ValueError(f"Hamiltonian not Hermitian within 1e-9 (defect {defect:.3e})")
        for ch in channels:
            if ch.jump.layout != hamiltonian.layout:
                raise ValueError("channel layout differs from Hamiltonian layout")
        self.hamiltonian = hamiltonian
        self.channels = list(channels)
        self.layout: ModeLayout = hamiltonian.layout
        self.dim = self.layout.dim

        h = hamiltonian.mat
        drift = -1j * h
        self._jumps = []
        for ch in channels:
            if ch.rate == 0:
                continue
            k = np.ascontiguousarray(ch.jump.mat)
            drift = drift - ch.rate * (k.conj().T @ k)
            scaled = np.ascontiguousarray(np.sqrt(2.0 * ch.rate) * k)
            self._jumps.append((scaled, np.ascontiguousarray(scaled.conj().T)))
        self._g = np.ascontiguousarray(drift)
        self._gd = np.ascontiguousarray(drift.conj().T)

    def apply(self, rho: np.ndarray, out: np.ndarray | None = None,
              work: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        """L[rho] for an arbitrary (not necessarily Hermitian) matrix."""
        if out is None:
            out = np.empty_like(self._g)
        if work is None:
            work = (np.empty_like(out), np.empty_like(out))
        t1, t2 = work
        np.matmul(self._g, rho, out=out)
        np.matmul(rho, self._gd, out=t1)
        out += t1
        for k, kd in self._jumps:
            np.matmul(k, rho, out=t1)
            np.matmul(t1, kd, out=t2)
            out += t2
        return out

    def norm_bound(self) -> float:
        """Cheap upper bound on the generator spectral radius (for dt checks)."""
        bound = 2.0 * np.linalg.norm(self.hamiltonian.mat, 2)
        for ch in self.channels:
            kn = np.linalg.norm(ch.jump.mat, 2)
            bound += 4.0 * ch.rate * kn * kn
        return float(bound)

    def residual(self, rho: np.ndarray) -> float:
        """max |L[rho]| entrywise; zero at a steady state."""
        return float(np.max(np.abs(self.apply(rho))))


def lindblad_apply(me: MasterEquation, rho) -> FockOperator:
    """Generator action as a FockOperator (convenience wrapper over me.apply)."""
    if isinstance(rho, DensityMatrix):
        mat = rho.mat
    elif isinstance(rho, FockOperator):
        mat = rho.mat
    else:
        mat = np.asarray(rho, dtype=complex)
    return FockOperator(me.layout, me.apply(mat))


@dataclass
class EvolutionResult:
    times: np.ndarray
    expectations: dict[str, np.ndarray]
    rho_final: np.ndarray
    trace_drift: float
    herm_defect: float
    min_eigenvalue: float
    steps: int


@dataclass
class SpectrumResult:
    """Two-sided spectrum; amplitudes rescaled so the maximum equals one."""

    frequencies: np.ndarray
    amplitudes: np.ndarray
    convention: str = "F(omega) = |sum_t G(t) exp(-i omega t)|, two-sided"

    def __post_init__(self):
        m = np.max(self.amplitudes)
        if m > 0:
            assert abs(np.max(self.amplitudes) - 1.0) <= 1e-12


class _RK4Stepper:
    """Fixed-step RK4 on the matrix-valued master equation, buffer-reusing."""

    def __init__(self, me: MasterEquation, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.me = me
        self.dt = dt
        d = me.dim
        self._k = [np.empty((d, d), dtype=complex) for _ in range(4)]
        self._tmp = np.empty((d, d), dtype=complex)
        self._work = (np.empty((d, d), dtype=complex), np.empty((d, d), dtype=complex))

    def step(self, rho: np.ndarray) -> np.ndarray:
        dt = self.dt
        k1, k2, k3, k4 = self._k
        tmp, work = self._tmp, self._work
        self.me.apply(rho, out=k1, work=work)
        np.multiply(k1, 0.5 * dt, out=tmp)
        tmp += rho
        self.me.apply(tmp, out=k2, work=work)
        np.multiply(k2, 0.5 * dt, out=tmp)
        tmp += rho
        self.me.apply(tmp, out=k3, work=work)
        np.multiply(k3, dt, out=tmp)
        tmp += rho
        self.me.apply(tmp, out=k4, work=work)
        k2 += k3
        k2 *= 2.0
        k1 += k4
        k1 += k2
        k1 *= dt / 6.0
        rho = rho + k1
        return rho


def _as_rho_matrix(rho0) -> np.ndarray:
    if isinstance(rho0, DensityMatrix):
        return np.array(rho0.mat, dtype=complex)
    if isinstance(rho0, FockOperator):
        return np.array(rho0.mat, dtype=complex)
    return np.array(rho0, dtype=complex)


def _stability_check(me: MasterEquation, dt: float):
    bound = me.norm_bound()
    if dt * bound > 2.8:
        warnings.warn(
            f"dt*||L|| estimate {dt * bound:.2f} exceeds the RK4 stability bound 2.8; "
            "reduce dt or expect blowup",
            stacklevel=3,
        )


def evolve_rk4(me: MasterEquation, rho0, dt: float, t_final: float,
               observables: dict[str, FockOperator] | None = None,
               output_stride: int = 1, positivity_checks: int = 6,
               time_offset: float = 0.0) -> EvolutionResult:
    """Propagate rho(t) recording Tr[O rho] every `output_stride` steps.

    Aborts with NumericalAbort on NaN.  Trace and Hermiticity drift are
    accumulated over all recorded samples; positivity is sampled at
    `positivity_checks` evenly spaced records plus the endpoint.
    """
    observables = observables or {}
    _stability_check(me, dt)
    rho = _as_rho_matrix(rho0)
    n_steps = max(1, int(round(t_final / dt)))
    stepper = _RK4Stepper(me, dt)
    obs_items = [(name, np.ascontiguousarray(op.mat)) for name, op in observables.items()]

    n_records = n_steps // output_stride + 1
    times = np.empty(n_records)
    expect = {name: np.empty(n_records, dtype=complex) for name, _ in obs_items}
    trace0 = np.real(np.trace(rho))
    trace_drift = 0.0
    herm_defect = 0.0
    min_eig = np.inf
    pos_every = max(1, n_records // max(1, positivity_checks))

    rec = 0

    def record(step_idx):
        nonlocal rec, trace_drift, herm_defect, min_eig
        tr = np.trace(rho)
        if not np.isfinite(tr.real) or not np.isfinite(tr.imag):
            raise NumericalAbort(
                f"non-finite trace at t = {step_idx * dt:.6g} (step {step_idx}); "
                "reduce dt or check the generator"
            )
        times[rec] = time_offset + step_idx * dt
        for name, mat in obs_items:
            expect[name][rec] = np.einsum("ij,ji->", mat, rho)
        trace_drift = max(trace_drift, abs(tr.real - trace0) + abs(tr.imag))
        herm_defect = max(herm_defect, float(np.max(np.abs(rho - rho.conj().T))))
        if rec % pos_every == 0 or rec == n_records - 1:
            w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
            min_eig = min(min_eig, float(w[0]))
        rec += 1

    record(0)
    for step in range(1, n_steps + 1):
        rho = stepper.step(rho)
        if step % output_stride == 0:
            record(step)

    return EvolutionResult(
        times=times[:rec],
        expectations={k: v[:rec] for k, v in expect.items()},
        rho_final=rho,
        trace_drift=trace_drift,
        herm_defect=herm_defect,
        min_eigenvalue=min_eig,
        steps=n_steps,
    )


def steady_state(me: MasterEquation, rho_guess, dt: float,
                 steady_tol: float = 1e-8, t_max: float = 1000.0,
                 check_interval: float = 1.0, min_time: float = 0.0) -> tuple[DensityMatrix, float]:
    """Long-time integration with adaptive stopping on ||L rho||_max <= steady_tol.

    Returns the state and the achieved residual; raises SteadyStateError with
    the residual attached if t_max is exhausted first.
    """
    _stability_check(me, dt)
    rho = _as_rho_matrix(rho_guess)
    stepper = _RK4Stepper(me, dt)
    steps_per_check = max(1, int(round(check_interval / dt)))
    t = 0.0
    residual = me.residual(rho)
    while t < t_max:
        for _ in range(steps_per_check):
            rho = stepper.step(rho)
        t += steps_per_check * dt
        tr = np.trace(rho)
        if not np.isfinite(tr.real):
            raise NumericalAbort(f"non-finite trace during steady-state search at t = {t:.6g}")
        residual = me.residual(rho)
        if residual <= steady_tol and t >= min_time:
            break
    else:
        raise SteadyStateError(
            f"no steady state after t = {t_max:g}: residual {residual:.3e} > {steady_tol:.1e}",
            residual=residual, rho=rho,
        )
    rho = (rho + rho.conj().T) / 2
    rho /= np.real(np.trace(rho))
    return DensityMatrix.from_matrix(me.layout, rho, pos_tol=1e-6), residual


def two_time_correlator(me: MasterEquation, rho_ss, a_op: FockOperator,
                        b_op: FockOperator, t_max: float, dt: float,
                        output_stride: int = 1,
                        subtract: str = "initial") -> tuple[np.ndarray, np.ndarray]:
    """Connected G(t) = Tr[A e^{Lt}(B rho)] - <A><B> on a uniform grid.

    Quantum regression: the operator B rho is propagated with the same
    generator as one-time averages.  The mean product removed from the raw
    correlator is chosen by `subtract`:

    - "initial": <A><B> both evaluated on the input state (exact when the
      input is a true steady state);
    - "tail": the raw correlator's own long-time limit, which equals
      <A>_ss <B>_0 because e^{Lt}(B rho) relaxes to rho_ss Tr[B rho].  This
      removes the zero-frequency artifact when the input state still carries
      preparation transients;
    - "none": raw correlator.
    """
    if subtract not in ("initial", "tail", "none"):
        raise ValueError(f"unknown subtraction mode {subtract!r}")
    rho = _as_rho_matrix(rho_ss)
    a_mean = complex(np.einsum("ij,ji->", a_op.mat, rho))
    b_mean = complex(np.einsum("ij,ji->", b_op.mat, rho))
    x = b_op.mat @ rho
    _stability_check(me, dt)
    stepper = _RK4Stepper(me, dt)
    n_steps = max(1, int(round(t_max / dt)))
    n_records = n_steps // output_stride + 1
    times = np.empty(n_records)
    g = np.empty(n_records, dtype=complex)
    a_mat = np.ascontiguousarray(a_op.mat)

    times[0] = 0.0
    g[0] = np.einsum("ij,ji->", a_mat, x)
    rec = 1
    for step in range(1, n_steps + 1):
        x = stepper.step(x)
        if step % output_stride == 0:
            val = np.einsum("ij,ji->", a_mat, x)
            if not np.isfinite(val.real):
                raise NumericalAbort(f"non-finite correlator at t = {step * dt:.6g}")
            times[rec] = step * dt
            g[rec] = val
            rec += 1
    times, g = times[:rec], g[:rec]
    if subtract == "initial":
        g = g - a_mean * b_mean
    elif subtract == "tail":
        g = g - g[-1]
    return times, g


def spectrum(correlator: np.ndarray, times: np.ndarray) -> SpectrumResult:
    """Two-sided discrete Fourier transform magnitude, peak-normalized to 1.

    Rectangular window over the full series (raw transform magnitude, no
    apodization).  Sign convention exp(-i omega t): a component rotating as
    exp(-i w0 t) appears at omega = -w0, i.e. mode frequencies map to their
    energies with the drive frame at zero.
    """
    g = np.asarray(correlator, dtype=complex)
    if g.size == 0:
        raise ValueError("empty correlator series")
    t = np.asarray(times, dtype=float)
    dts = np.diff(t)
    if t.size > 1 and (np.max(dts) - np.min(dts)) > 1e-9 * np.max(np.abs(dts)):
        raise ValueError("time grid must be uniform")
    dt = dts[0] if t.size > 1 else 1.0
    amp = np.abs(np.fft.fftshift(np.fft.fft(g)))
    omega = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(g.size, dt))
    m = np.max(amp)
    if m > 0:
        amp = amp / m
    return SpectrumResult(frequencies=omega, amplitudes=amp)


def spectral_peaks(spec: SpectrumResult, min_height: float = 0.02,
                   window: tuple[float, float] | None = None) -> list[tuple[float, float]]:
    """Local maxima (frequency, height) sorted by descending height."""
    w, s = spec.frequencies, spec.amplitudes
    if window is not None:
        sel = (w >= window[0]) & (w <= window[1])
        w, s = w[sel], s[sel]
    peaks = []
    for i in range(1, len(s) - 1):
        if s[i] > s[i - 1] and s[i] >= s[i + 1] and s[i] >= min_height:
            peaks.append((float(w[i]), float(s[i])))
    peaks.sort(key=lambda p: -p[1])
    return peaks
