"""Dense-matrix backend for small systems.

States live on a :class:`SiteLayout`, an ordered list of labelled sites with
local dimensions.  Fermionic layouts use the Jordan-Wigner occupation basis
with modes ordered as listed; every reduction on such a layout is routed
through :mod:`modcomm.fermion`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .errors import (DimensionTooLarge, ImaginaryResidual, InvalidState, NotPSD,
                     WrongStatistics)

MAX_DENSITY_DIM = 2 ** 14
MAX_PURE_DIM = 2 ** 22
DEFAULT_FLOOR = 1e-12
QUDIT, FERMIONIC = "qudit", "fermionic"


def _frozen(arr, dtype=complex) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SiteLayout:
    sites: tuple
    dims: tuple
    statistics: str = QUDIT

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.sites) != len(self.dims):
            raise ValueError("sites and dims differ in length")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("site labels must be unique")
        if self.statistics not in (QUDIT, FERMIONIC):
            raise ValueError(f"unknown statistics {self.statistics!r}")
        if self.statistics == FERMIONIC and any(d != 2 for d in self.dims):
            raise ValueError("fermionic modes have local dimension 2")
        if any(d < 1 for d in self.dims):
            raise ValueError("local dimensions must be positive")

    @classmethod
    def qubits(cls, sites: int | Sequence[Hashable]) -> "SiteLayout":
        sites = range(sites) if isinstance(sites, int) else sites
        sites = tuple(sites)
        return cls(sites, (2,) * len(sites), QUDIT)

    @classmethod
    def fermions(cls, modes: int | Sequence[Hashable]) -> "SiteLayout":
        modes = range(modes) if isinstance(modes, int) else modes
        modes = tuple(modes)
        return cls(modes, (2,) * len(modes), FERMIONIC)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    @property
    def fermionic(self) -> bool:
        return self.statistics == FERMIONIC

    def index(self, site) -> int:
        return self.sites.index(site)

    def ordered(self, sites: Iterable[Hashable]) -> list:
        """Sites as a list; sets come back in layout order, sequences as given."""
        if isinstance(sites, (set, frozenset)):
            missing = set(sites) - set(self.sites)
            if missing:
                raise KeyError(f"sites not in layout: {sorted(map(str, missing))}")
            return [s for s in self.sites if s in sites]
        out = list(sites)
        if len(set(out)) != len(out):
            raise ValueError("duplicate sites")
        for s in out:
            if s not in self.sites:
                raise KeyError(f"site {s!r} not in layout")
        return out

    def subset(self, sites: Sequence[Hashable]) -> "SiteLayout":
        return SiteLayout(tuple(sites), tuple(self.dims[self.index(s)] for s in sites),
                          self.statistics)

    def to_dict(self) -> dict:
        return {"sites": [s if isinstance(s, (int, str)) else list(s) for s in self.sites],
                "dims": list(self.dims), "statistics": self.statistics}


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    layout: SiteLayout

    def __post_init__(self):
        amp = _frozen(np.ravel(self.amplitudes))
        if amp.size != self.layout.dim:
            raise InvalidState("amplitude count does not match layout dimension")
        if amp.size > MAX_PURE_DIM:
            raise DimensionTooLarge(f"pure state dimension {amp.size} exceeds {MAX_PURE_DIM}")
        if abs(np.vdot(amp, amp).real - 1) > 1e-12:
            raise InvalidState("state is not normalized")
        object.__setattr__(self, "amplitudes", amp)

    def to_density(self) -> "DensityOp":
        return DensityOp(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)


@dataclass(frozen=True)
class DensityOp:
    matrix: np.ndarray
    layout: SiteLayout
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.layout.dim
        if d > MAX_DENSITY_DIM:
            raise DimensionTooLarge(f"density dimension {d} exceeds cap {MAX_DENSITY_DIM}")
        if m.shape != (d, d):
            raise InvalidState(f"matrix shape {m.shape} does not match dimension {d}")
        if self.validate:
            if np.abs(m - m.conj().T).max(initial=0) > 1e-12:
                raise InvalidState("density matrix is not Hermitian")
            if abs(np.trace(m) - 1) > 1e-10:
                raise InvalidState("density matrix trace is not 1")
            if np.linalg.eigvalsh(m)[0] < -1e-10:
                raise NotPSD("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(m))


@dataclass(frozen=True)
class HermitianOp:
    matrix: np.ndarray
    layout: SiteLayout

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.dim,) * 2:
            raise InvalidState("operator shape does not match layout")
        if np.abs(m - m.conj().T).max(initial=0) > 1e-12 * max(1.0, np.abs(m).max(initial=0)):
            raise InvalidState("operator is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def support(self) -> tuple:
        return self.layout.sites


State = PureState | DensityOp


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


# --- reductions --------------------------------------------------------------

def _axes_for(layout: SiteLayout, keep: list) -> tuple[list, list]:
    kidx = [layout.index(s) for s in keep]
    rest = [i for i in range(len(layout.sites)) if i not in kidx]
    return kidx, rest


def _qudit_matrix(state: State, keep: list) -> np.ndarray:
    """Reduced matrix on ``keep`` (in that order) by plain tensor contraction."""
    layout = state.layout
    kidx, rest = _axes_for(layout, keep)
    dk = int(np.prod([layout.dims[i] for i in kidx], dtype=int))
    if isinstance(state, PureState):
        psi = state.amplitudes.reshape(layout.dims) if layout.dims else state.amplitudes
        m = np.transpose(psi, kidx + rest).reshape(dk, -1)
        return m @ m.conj().T
    n = len(layout.dims)
    rho = state.matrix.reshape(layout.dims * 2)
    perm = kidx + [n + i for i in kidx] + rest + [n + i for i in rest]
    dr = layout.dim // dk
    t = np.transpose(rho, perm).reshape(dk, dk, dr, dr)
    return np.einsum("abcc->ab", t)


def partial_trace(state: State, keep: Iterable[Hashable]) -> DensityOp:
    """Qudit partial trace; ``keep`` as a set keeps layout order."""
    if state.layout.fermionic:
        raise WrongStatistics("fermionic layouts must be reduced with fermion.fermionic_rdm")
    keep = state.layout.ordered(keep)
    m = hermitize(_qudit_matrix(state, keep))
    return DensityOp(m, state.layout.subset(keep), validate=False)


def reduce(state: State, keep: Iterable[Hashable]) -> DensityOp:
    """Reduced state on ``keep``, dispatching on the layout statistics."""
    if state.layout.fermionic:
        from .fermion import fermionic_rdm
        return fermionic_rdm(state, keep)
    return partial_trace(state, keep)


def spectrum(state: State, region: Iterable[Hashable]) -> np.ndarray:
    """Eigenvalues of the reduced state on ``region``."""
    region = state.layout.ordered(region)
    if isinstance(state, PureState) and region:
        if state.layout.fermionic:
            from .fermion import reorder_state
            state = reorder_state(state, region)
        kidx, rest = _axes_for(state.layout, region)
        dims = state.layout.dims
        dk = int(np.prod([dims[i] for i in kidx], dtype=int))
        psi = np.transpose(state.amplitudes.reshape(dims), kidx + rest).reshape(dk, -1)
        s = np.linalg.svd(psi, compute_uv=False)
        return s ** 2
    if not region:
        return np.ones(1)
    return np.linalg.eigvalsh(reduce(state, region).matrix)


def _entropy_from_eigs(w: np.ndarray) -> float:
    w = np.clip(w, 0, None)
    return float(-xlogy(w, w).sum())


def entropy(rho: State) -> float:
    """Von Neumann entropy in nats."""
    if isinstance(rho, PureState):
        return 0.0
    return _entropy_from_eigs(np.linalg.eigvalsh(rho.matrix))


def region_entropy(state: State, region: Iterable[Hashable]) -> float:
    return _entropy_from_eigs(spectrum(state, region))


def cmi(state: State, x, y, z) -> float:
    """I(X:Z|Y) = S_XY + S_YZ - S_Y - S_XYZ."""
    lay = state.layout
    x, y, z = lay.ordered(x), lay.ordered(y), lay.ordered(z)
    s = lambda *parts: region_entropy(state, [v for p in parts for v in p])  # noqa: E731
    return s(x, y) + s(y, z) - s(y) - s(x, y, z)


def modular_hamiltonian(rho: DensityOp, floor: float = DEFAULT_FLOOR) -> HermitianOp:
    """K = -ln(rho) with eigenvalues below ``floor`` raised to ``floor``."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    w, v = np.linalg.eigh(rho.matrix)
    if w[0] < -1e-10:
        raise NotPSD("cannot take the logarithm of a non-PSD operator")
    k = (v * -np.log(np.maximum(w, floor))) @ v.conj().T
    return HermitianOp(hermitize(k), rho.layout)


def _modular_matrix(m: np.ndarray, floor: float) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * -np.log(np.maximum(w, floor))) @ v.conj().T


def modular_commutator_complex(state: State, a, b, c, floor: float = DEFAULT_FLOOR) -> complex:
    """i Tr(rho [K_AB x 1_C, 1_A x K_BC]) before discarding the imaginary part."""
    lay = state.layout
    a, b, c = lay.ordered(a), lay.ordered(b), lay.ordered(c)
    if set(a) & set(b) or set(b) & set(c) or set(a) & set(c):
        raise ValueError("regions must be disjoint")
    rho = reduce(state, a + b + c)
    dims = rho.layout.dims
    da = int(np.prod(dims[: len(a)], dtype=int))
    dc = int(np.prod(dims[len(a) + len(b):], dtype=int))
    # A, B, C are contiguous in this frame, so plain contraction is valid for
    # parity-even fermionic states as well
    k_ab = _modular_matrix(_qudit_matrix(rho, list(rho.layout.sites[: len(a) + len(b)])), floor)
    k_bc = _modular_matrix(_qudit_matrix(rho, list(rho.layout.sites[len(a):])), floor)
    k1 = np.kron(k_ab, np.eye(dc))
    k2 = np.kron(np.eye(da), k_bc)
    r = rho.matrix
    t12 = np.einsum("ij,ji->", r @ k1, k2)
    t21 = np.einsum("ij,ji->", r @ k2, k1)
    return complex(1j * (t12 - t21))


def modular_commutator(state: State, a, b, c, floor: float = DEFAULT_FLOOR,
                       imag_tol: float = 1e-8) -> float:
    """J(A,B,C) = i Tr(rho_ABC [K_AB, K_BC]) in nats."""
    val = modular_commutator_complex(state, a, b, c, floor)
    if abs(val.imag) > imag_tol:
        raise ImaginaryResidual(f"imaginary part {val.imag:.3e} exceeds {imag_tol:.0e}")
    return val.real


def conjugate(state: State) -> State:
    """Complex conjugate in the product (occupation) basis."""
    if isinstance(state, PureState):
        return PureState(state.amplitudes.conj(), state.layout)
    return DensityOp(state.matrix.conj(), state.layout, validate=False)


def tee_kitaev_preskill(state: State, a, b, c) -> float:
    """S_A + S_B + S_C - S_AB - S_BC - S_CA + S_ABC  (equals -gamma)."""
    lay = state.layout
    a, b, c = lay.ordered(a), lay.ordered(b), lay.ordered(c)
    s = lambda *parts: region_entropy(state, [v for p in parts for v in p])  # noqa: E731
    return s(a) + s(b) + s(c) - s(a, b) - s(b, c) - s(c, a) + s(a, b, c)


# --- random states -----------------------------------------------------------

def random_pure_state(layout: SiteLayout, rng: np.random.Generator,
                      real: bool = False, even: bool = False) -> PureState:
    d = layout.dim
    psi = rng.normal(size=d) + (0 if real else 1j * rng.normal(size=d))
    if even:
        psi = psi * (_parity_vector(layout) == 1)
    return PureState(psi / np.linalg.norm(psi), layout)


def random_density(layout: SiteLayout, rng: np.random.Generator, rank: int | None = None,
                   even: bool = False) -> DensityOp:
    """Random density matrix (Wishart-type); ``even`` zeroes odd-parity blocks."""
    d = layout.dim
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    if even:
        p = _parity_vector(layout)
        m = m * (p[:, None] == p[None, :])
    m = hermitize(m / np.trace(m).real)
    return DensityOp(m, layout)


def _parity_vector(layout: SiteLayout) -> np.ndarray:
    if any(d != 2 for d in layout.dims):
        raise ValueError("parity needs two-level sites")
    n = len(layout.dims)
    idx = np.arange(layout.dim)
    pop = np.zeros(layout.dim, dtype=int)
    for j in range(n):
        pop += (idx >> j) & 1
    return 1 - 2 * (pop % 2)
