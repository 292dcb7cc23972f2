"""Truncated multimode Fock space: ladder operators, states, and basis rotations.

Every operator is a dense complex matrix on the tensor-product space of a
small number of bosonic modes, each truncated at a per-mode cutoff n_max
(dimension n_max + 1).  Dimensions in this package stay in the low hundreds,
so dense storage wins over sparse machinery on simplicity and cache behavior.

All functions are pure; operators and layouts are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModeLayout",
    "FockOperator",
    "DensityMatrix",
    "identity",
    "lowering",
    "raising",
    "number",
    "displacement",
    "thermal_state",
    "mode_rotation_symm_antisymm",
    "eig_hermitian",
    "partial_trace",
    "basis_ket",
    "vacuum_ket",
    "expm_pade6",
]


class LayoutError(ValueError):
    """Mode layout is inconsistent or a mode name is unknown."""


@dataclass(frozen=True)
class ModeLayout:
    """Ordered set of bosonic modes with per-mode Fock cutoffs.

    ``cutoffs[i]`` is the largest occupation kept for mode i, so the local
    dimension is ``cutoffs[i] + 1``.
    """

    names: tuple[str, ...]
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.cutoffs):
            raise LayoutError("names and cutoffs must have equal length")
        if len(set(self.names)) != len(self.names):
            raise LayoutError(f"mode names not unique: {self.names}")
        if not self.names:
            raise LayoutError("layout needs at least one mode")
        if any(c < 0 for c in self.cutoffs):
            raise LayoutError(f"negative cutoff in {self.cutoffs}")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def index(self, mode: str) -> int:
        try:
            return self.names.index(mode)
        except ValueError:
            raise LayoutError(f"unknown mode {mode!r}; layout has {self.names}") from None


@dataclass(frozen=True)
class FockOperator:
    """Dense complex matrix tagged with the mode layout it acts on."""

    layout: ModeLayout
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError(
                f"matrix shape {m.shape} does not match layout dimension {self.layout.dim}"
            )
        object.__setattr__(self, "mat", m)

    def _check(self, other: "FockOperator"):
        if other.layout != self.layout:
            raise LayoutError("operators act on different layouts")

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return FockOperator(self.layout, self.mat @ other.mat)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return FockOperator(self.layout, self.mat + other.mat)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return FockOperator(self.layout, self.mat - other.mat)

    def __mul__(self, scalar: complex) -> "FockOperator":
        return FockOperator(self.layout, self.mat * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "FockOperator":
        return FockOperator(self.layout, -self.mat)

    def dag(self) -> "FockOperator":
        return FockOperator(self.layout, self.mat.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def expect(self, rho: np.ndarray | "FockOperator" | "DensityMatrix") -> complex:
        """Tr[self · rho] without forming the full product."""
        r = _as_matrix(rho)
        return complex(np.einsum("ij,ji->", self.mat, r))

    def is_hermitian(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.mat - self.mat.conj().T)) <= tol)


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, DensityMatrix):
        return obj.operator.mat
    if isinstance(obj, FockOperator):
        return obj.mat
    return np.asarray(obj, dtype=complex)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace operator with tolerance metadata.

    Construction validates trace, Hermiticity, and positivity.  Tiny negative
    eigenvalues (down to -pos_tol) are tolerated and reported rather than
    projected away, so integrator artifacts stay visible.
    """

    operator: FockOperator
    herm_tol: float = 1e-8
    pos_tol: float = 1e-7

    def __post_init__(self):
        m = self.operator.mat
        tr = np.trace(m)
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"trace {tr} deviates from 1 beyond 1e-9")
        herm_defect = np.max(np.abs(m - m.conj().T))
        if herm_defect > self.herm_tol:
            raise ValueError(f"Hermiticity defect {herm_defect:.3e} exceeds {self.herm_tol:.1e}")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if w[0] < -self.pos_tol:
            raise ValueError(f"minimum eigenvalue {w[0]:.3e} below -{self.pos_tol:.1e}")
        object.__setattr__(self, "_min_eig", float(w[0]))

    @property
    def layout(self) -> ModeLayout:
        return self.operator.layout

    @property
    def mat(self) -> np.ndarray:
        return self.operator.mat

    @property
    def min_eigenvalue(self) -> float:
        return self._min_eig

    @classmethod
    def from_matrix(cls, layout: ModeLayout, mat: np.ndarray, *,
                    herm_tol: float = 1e-8, pos_tol: float = 1e-7) -> "DensityMatrix":
        return cls(FockOperator(layout, mat), herm_tol, pos_tol)

    @classmethod
    def from_ket(cls, layout: ModeLayout, ket: np.ndarray) -> "DensityMatrix":
        v = np.asarray(ket, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(FockOperator(layout, np.outer(v, v.conj())))


# ---------------------------------------------------------------------------
# operator builders
# ---------------------------------------------------------------------------

def _local_lowering(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def _embed(layout: ModeLayout, mode: str, local: np.ndarray) -> np.ndarray:
    idx = layout.index(mode)
    out = np.array([[1.0 + 0j]])
    for i, d in enumerate(layout.dims):
        out = np.kron(out, local if i == idx else np.eye(d, dtype=complex))
    return out


def identity(layout: ModeLayout) -> FockOperator:
    return FockOperator(layout, np.eye(layout.dim, dtype=complex))


def lowering(layout: ModeLayout, mode: str) -> FockOperator:
    """Annihilation operator of one mode: <n-1|a|n> = sqrt(n), identity elsewhere."""
    d = layout.dims[layout.index(mode)]
    return FockOperator(layout, _embed(layout, mode, _local_lowering(d)))


def raising(layout: ModeLayout, mode: str) -> FockOperator:
    return lowering(layout, mode).dag()


def number(layout: ModeLayout, mode: str) -> FockOperator:
    d = layout.dims[layout.index(mode)]
    return FockOperator(layout, _embed(layout, mode, np.diag(np.arange(d, dtype=complex))))


def basis_ket(layout: ModeLayout, occupations: dict[str, int] | tuple[int, ...]) -> np.ndarray:
    """Fock basis vector |n_1, n_2, ...> as a flat array."""
    if isinstance(occupations, dict):
        occ = tuple(occupations.get(name, 0) for name in layout.names)
    else:
        occ = tuple(occupations)
    if len(occ) != len(layout.names):
        raise LayoutError("occupation tuple length mismatch")
    for n, c in zip(occ, layout.cutoffs):
        if not 0 <= n <= c:
            raise LayoutError(f"occupation {occ} outside cutoffs {layout.cutoffs}")
    v = np.zeros(layout.dim, dtype=complex)
    v[int(np.ravel_multi_index(occ, layout.dims))] = 1.0
    return v


def vacuum_ket(layout: ModeLayout) -> np.ndarray:
    return basis_ket(layout, tuple(0 for _ in layout.names))


# ---------------------------------------------------------------------------
# matrix exponential (scaling and squaring, diagonal Pade order 6)
# ---------------------------------------------------------------------------

_PADE6 = [1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280]


def expm_pade6(a: np.ndarray) -> np.ndarray:
    """exp(a) by scaling-and-squaring with a [6/6] diagonal Pade approximant.

    Accurate to well below 1e-12 for the small generators used here; kept
    local instead of pulling in a heavier dependency for one routine.
    """
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a, 1)
    s = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    x = a / (2 ** s)
    n = a.shape[0]
    x2 = x @ x
    even = _PADE6[0] * np.eye(n, dtype=complex) + _PADE6[2] * x2
    odd = _PADE6[1] * np.eye(n, dtype=complex) + _PADE6[3] * x2
    x4 = x2 @ x2
    even += _PADE6[4] * x4
    odd += _PADE6[5] * x4
    x6 = x4 @ x2
    even += _PADE6[6] * x6
    odd = x @ odd
    f = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        f = f @ f
    return f


def displacement(layout: ModeLayout, mode: str, alpha: complex) -> FockOperator:
    """Glauber displacement exp(alpha a† - alpha* a) on one mode.

    Warns when |alpha|^2 > n_max/4: beyond this the truncated-space matrix
    is no longer reliably unitary and coherent-state moments pick up
    truncation error.
    """
    n_max = layout.cutoffs[layout.index(mode)]
    if abs(alpha) ** 2 > n_max / 4 and alpha != 0:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha)**2:.3g} exceeds n_max/4 = {n_max / 4:.3g} "
            f"for mode {mode!r}; displacement is truncation-limited",
            stacklevel=2,
        )
    a = lowering(layout, mode).mat
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return FockOperator(layout, expm_pade6(gen))


def thermal_state(layout: ModeLayout, occupations: dict[str, float]) -> DensityMatrix:
    """Diagonal product state with geometric populations p_n = nbar^n/(nbar+1)^(n+1).

    Populations are renormalized to unit trace after truncation, which keeps
    the geometric ratio between neighboring levels exact.
    """
    weights = np.array([1.0])
    for name, d in zip(layout.names, layout.dims):
        nbar = float(occupations.get(name, 0.0))
        if nbar < 0:
            raise ValueError(f"negative thermal occupation {nbar} for mode {name!r}")
        if nbar == 0:
            p = np.zeros(d)
            p[0] = 1.0
        else:
            n = np.arange(d, dtype=float)
            p = np.exp(n * np.log(nbar) - (n + 1) * np.log(nbar + 1))
        weights = np.kron(weights, p)
    weights /= weights.sum()
    return DensityMatrix.from_matrix(layout, np.diag(weights.astype(complex)))


def mode_rotation_symm_antisymm(layout: ModeLayout, mode1: str, mode2: str) -> FockOperator:
    """Unitary sending the (mode1 ± mode2)/sqrt(2) combinations to mode slots.

    After W rho W†, the occupation of slot `mode1` equals that of the
    symmetric combination and slot `mode2` that of the antisymmetric one,
    with W a_s† W† = a_1† and W a_a† W† = a_2† (no residual phases).  Built
    as a 50/50 beam-splitter rotation followed by a parity flip on mode2.
    """
    i1, i2 = layout.index(mode1), layout.index(mode2)
    if layout.cutoffs[i1] != layout.cutoffs[i2]:
        raise LayoutError(
            f"modes {mode1!r} and {mode2!r} have different cutoffs "
            f"{layout.cutoffs[i1]} != {layout.cutoffs[i2]}"
        )
    a1 = lowering(layout, mode1).mat
    a2 = lowering(layout, mode2).mat
    gen = (np.pi / 4) * (a1.conj().T @ a2 - a2.conj().T @ a1)
    rot = expm_pade6(gen)
    n2 = np.real(np.diag(number(layout, mode2).mat)).astype(int)
    parity = np.diag(np.where(n2 % 2 == 1, -1.0, 1.0).astype(complex))
    return FockOperator(layout, parity @ rot)


def eig_hermitian(op: FockOperator, herm_tol: float = 1e-8):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian operator."""
    defect = np.max(np.abs(op.mat - op.mat.conj().T))
    if defect > herm_tol:
        raise ValueError(f"operator is not Hermitian: defect {defect:.3e} > {herm_tol:.1e}")
    w, v = np.linalg.eigh((op.mat + op.mat.conj().T) / 2)
    return w, v


def partial_trace(rho: DensityMatrix, keep: tuple[str, ...] | list[str]) -> DensityMatrix:
    """Reduced density matrix on the listed modes (in layout order)."""
    keep = tuple(keep)
    if not keep:
        raise LayoutError("keep must name at least one mode")
    layout = rho.layout
    keep_idx = sorted(layout.index(m) for m in keep)
    nmodes = len(layout.names)
    dims = layout.dims
    t = rho.mat.reshape(dims + dims)
    # trace out dropped modes from highest axis index down so positions stay valid
    dropped = [i for i in range(nmodes) if i not in keep_idx]
    offset = nmodes
    for i in sorted(dropped, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + offset)
        offset -= 1
    new_layout = ModeLayout(
        tuple(layout.names[i] for i in keep_idx),
        tuple(layout.cutoffs[i] for i in keep_idx),
    )
    d = new_layout.dim
    return DensityMatrix.from_matrix(new_layout, t.reshape(d, d),
                                     herm_tol=rho.herm_tol, pos_tol=rho.pos_tol)
