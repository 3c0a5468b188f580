"""Fermionic Gaussian states in the Majorana representation.

Majoranas are ordered ``(c_1, d_1, c_2, d_2, ...)``.  A quadratic Hamiltonian
is ``H = (i/4) sum_jk h_jk g_j g_k`` with ``h`` real antisymmetric, and a
Gaussian state is fixed by ``Gamma_jk = (i/2) Tr(rho [g_j, g_k])``.  With
these conventions the vacuum has ``Gamma_12 = -1``, the ground state of ``h``
is ``Gamma = -sgn(h)``, and a state with modular Hamiltonian
``(i/4) g^T h g`` has ``i Gamma = -tanh(i h / 2)``.

Functional calculus runs through the Hermitian matrix ``i Gamma`` (or
``i h``), whose eigenvalues come in ``±nu`` pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.special import xlogy
from scipy.stats import special_ortho_group

from .dense import DensityOp, SiteLayout, hermitize
from .errors import ClampDominated, Gapless, InvalidState

DEFAULT_CLAMP = 1e-12
CLAMP_WARN_FRACTION = 0.10


def _frozen_real(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _check_antisymmetric(m: np.ndarray, what: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise InvalidState(f"{what} must be a square matrix of even size")
    if np.abs(m + m.T).max(initial=0) > 1e-12 * max(1.0, np.abs(m).max(initial=0)):
        raise InvalidState(f"{what} is not antisymmetric")


def majorana_indices(mode_positions: Iterable[int]) -> np.ndarray:
    return np.array([2 * m + k for m in mode_positions for k in (0, 1)], dtype=int)


@dataclass(frozen=True)
class QuadraticHam:
    kernel: np.ndarray
    modes: tuple = None
    positions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        h = np.asarray(self.kernel)
        if np.iscomplexobj(h):
            if np.abs(h.imag).max(initial=0) > 1e-12:
                raise InvalidState("kernel must be real")
            h = h.real
        _check_antisymmetric(h, "kernel")
        object.__setattr__(self, "kernel", _frozen_real(h))
        n = h.shape[0] // 2
        modes = tuple(range(n)) if self.modes is None else tuple(self.modes)
        if len(modes) != n:
            raise InvalidState("mode labels do not match kernel size")
        object.__setattr__(self, "modes", modes)
        if self.positions is not None:
            object.__setattr__(self, "positions", _frozen_real(self.positions))

    @classmethod
    def from_bdg(cls, hopping: np.ndarray, pairing: np.ndarray | None = None,
                 modes: Sequence[Hashable] | None = None, positions=None) -> "QuadraticHam":
        """H = sum T_ij a_i^dag a_j + 1/2 sum (D_ij a_i^dag a_j^dag + h.c.)."""
        t = np.asarray(hopping, dtype=complex)
        n = t.shape[0]
        d = np.zeros((n, n), complex) if pairing is None else np.asarray(pairing, dtype=complex)
        if np.abs(t - t.conj().T).max(initial=0) > 1e-12:
            raise InvalidState("hopping matrix must be Hermitian")
        if np.abs(d + d.T).max(initial=0) > 1e-12:
            raise InvalidState("pairing matrix must be antisymmetric")
        return cls(bdg_to_majorana(t, d), modes, positions)

    @property
    def n_modes(self) -> int:
        return self.kernel.shape[0] // 2


def nambu_to_majorana(n: int) -> np.ndarray:
    """W with (a_1..a_n, a_1^dag..a_n^dag)^T = W (c_1, d_1, ..., c_n, d_n)^T."""
    w = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        w[j, 2 * j], w[j, 2 * j + 1] = 0.5, 0.5j
        w[n + j, 2 * j], w[n + j, 2 * j + 1] = 0.5, -0.5j
    return w


def bdg_to_majorana(t: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Majorana kernel h of the BdG form with hopping t and pairing d."""
    n = t.shape[0]
    bdg = np.block([[t, d], [-d.conj(), -t.conj()]])
    w = nambu_to_majorana(n)
    return 2 * (w.conj().T @ bdg @ w).imag


@dataclass(frozen=True)
class MajoranaCovariance:
    gamma: np.ndarray
    modes: tuple = None
    positions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        _check_antisymmetric(g, "covariance")
        g = (g - g.T) / 2
        if np.linalg.norm(g, 2) > 1 + 1e-10:
            raise InvalidState("covariance has singular values above 1")
        object.__setattr__(self, "gamma", _frozen_real(g))
        n = g.shape[0] // 2
        modes = tuple(range(n)) if self.modes is None else tuple(self.modes)
        if len(modes) != n:
            raise InvalidState("mode labels do not match covariance size")
        object.__setattr__(self, "modes", modes)
        if self.positions is not None:
            object.__setattr__(self, "positions", _frozen_real(self.positions))

    @property
    def n_modes(self) -> int:
        return self.gamma.shape[0] // 2

    @property
    def is_pure(self) -> bool:
        g = self.gamma
        return bool(np.abs(g @ g.T - np.eye(g.shape[0])).max(initial=0) < 1e-8)

    def index(self, modes: Iterable[Hashable]) -> list[int]:
        lookup = {m: i for i, m in enumerate(self.modes)}
        if isinstance(modes, (set, frozenset)):
            return sorted(lookup[m] for m in modes)
        return [lookup[m] for m in modes]


# --- normal form -------------------------------------------------------------

def normal_form(a: np.ndarray, tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Real Schur form of an antisymmetric matrix.

    Returns ``(O, x)`` with ``a = O T O^T``, ``O`` orthogonal and ``T`` block
    diagonal with blocks ``[[0, x_k], [-x_k, 0]]``.
    """
    t, o = scipy.linalg.schur(np.asarray(a, dtype=float), output="real")
    n = t.shape[0]
    pairs, singles = [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > tol:
            pairs.append((i, i + 1))
            i += 2
        else:
            singles.append(i)
            i += 1
    # zero eigenvalues appear as 1x1 blocks; pair them up
    pairs += list(zip(singles[::2], singles[1::2]))
    cols = [c for p in pairs for c in p]
    o = o[:, cols]
    x = np.array([t[i, j] for i, j in pairs])
    return o, x


# --- conversions --------------------------------------------------------------

def ground_covariance(ham: QuadraticHam, gap_tol: float = 1e-10) -> MajoranaCovariance:
    """Ground state covariance Gamma = -sgn(h)."""
    w, v = np.linalg.eigh(1j * ham.kernel)
    if np.abs(w).min(initial=np.inf) < gap_tol:
        raise Gapless("kernel has a (near-)zero eigenvalue")
    g = (1j * (v * np.sign(w)) @ v.conj().T).real
    return MajoranaCovariance(g, ham.modes, ham.positions)


def _majorana_ops(n: int):
    from .fermion import majoranas
    return majoranas(n)


def to_density(cov: MajoranaCovariance) -> DensityOp:
    """Dense fermionic density matrix of a Gaussian state (small n only)."""
    n = cov.n_modes
    if n > 12:
        raise ValueError("dense conversion limited to 12 modes")
    gam = _majorana_ops(n)
    o, x = normal_form(cov.gamma)
    rho = np.eye(2 ** n, dtype=complex)
    for k, xk in enumerate(x):
        g1 = sum(o[j, 2 * k] * gam[j] for j in range(2 * n))
        g2 = sum(o[j, 2 * k + 1] * gam[j] for j in range(2 * n))
        rho = rho @ (np.eye(2 ** n) + 1j * xk * g1 @ g2) / 2
    return DensityOp(hermitize(rho), SiteLayout.fermions(cov.modes), validate=False)


def from_density(rho) -> MajoranaCovariance:
    """Gamma_jk = (i/2) Tr(rho [g_j, g_k]) of any fermionic density matrix."""
    m = rho.matrix
    n = int(round(np.log2(m.shape[0])))
    gam = _majorana_ops(n)
    g = np.zeros((2 * n, 2 * n))
    for j in range(2 * n):
        for k in range(j + 1, 2 * n):
            g[j, k] = (1j * np.trace(m @ gam[j] @ gam[k])).real
            g[k, j] = -g[j, k]
    return MajoranaCovariance(g, rho.layout.sites)


def quadratic_operator(h: np.ndarray) -> np.ndarray:
    """(i/4) sum h_jk g_j g_k as a dense matrix."""
    n = h.shape[0] // 2
    gam = _majorana_ops(n)
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for j in range(2 * n):
        for k in range(2 * n):
            if h[j, k]:
                out += 0.25j * h[j, k] * gam[j] @ gam[k]
    return out


# --- region quantities -------------------------------------------------------

def restrict(cov: MajoranaCovariance, region: Iterable[Hashable]) -> MajoranaCovariance:
    idx = cov.index(region)
    sel = majorana_indices(idx)
    pos = None if cov.positions is None else cov.positions[idx]
    return MajoranaCovariance(cov.gamma[np.ix_(sel, sel)], [cov.modes[i] for i in idx], pos)


def symplectic_values(cov: MajoranaCovariance) -> np.ndarray:
    """The nu_k >= 0, one per mode."""
    if cov.n_modes == 0:
        return np.zeros(0)
    w = np.linalg.eigvalsh(1j * cov.gamma)
    return np.clip(w[cov.n_modes:], 0, 1)


def gaussian_entropy(cov: MajoranaCovariance) -> float:
    """Sum of binary entropies H2((1 + nu_k)/2), in nats."""
    nu = symplectic_values(cov)
    p, q = (1 + nu) / 2, (1 - nu) / 2
    return float(-(xlogy(p, p) + xlogy(q, q)).sum())


def region_entropy(cov: MajoranaCovariance, region) -> float:
    return gaussian_entropy(restrict(cov, region)) if len(list(region)) else 0.0


@dataclass(frozen=True)
class EntanglementKernel:
    matrix: np.ndarray
    n_clamped: int
    n_values: int


def gaussian_entanglement_kernel(cov: MajoranaCovariance,
                                 clamp: float = DEFAULT_CLAMP) -> EntanglementKernel:
    """Single-particle modular kernel: K_A = (i/4) g^T h_A g + const."""
    return _kernel(cov.gamma, clamp)


def _kernel(g: np.ndarray, clamp: float) -> EntanglementKernel:
    w, v = np.linalg.eigh(1j * g)
    lim = 1 - clamp
    clamped = int((np.abs(w) > lim).sum())
    w = np.clip(w, -lim, lim)
    ih = (v * (-2 * np.arctanh(w))) @ v.conj().T
    h = (-1j * ih).real
    return EntanglementKernel((h - h.T) / 2, clamped // 2, w.size // 2)


def kernel_to_covariance(h: np.ndarray) -> np.ndarray:
    """Forward map: Gamma with i Gamma = -tanh(i h / 2)."""
    w, v = np.linalg.eigh(1j * np.asarray(h))
    return (1j * (v * np.tanh(w / 2)) @ v.conj().T).real


def gaussian_modular_commutator(cov: MajoranaCovariance, a, b, c,
                                clamp: float = DEFAULT_CLAMP, warn: bool = True) -> float:
    """J = (1/4) Tr([h_AB, h_BC] Gamma_ABC) with kernels padded to ABC.

    The commutator of two quadratic forms Q(x) = (1/4) g^T x g is Q([x, y]),
    and <(i/4) g^T m g> = (1/4) Tr(m Gamma) for antisymmetric m.
    """
    ia, ib, ic = cov.index(a), cov.index(b), cov.index(c)
    if set(ia) & set(ib) or set(ib) & set(ic) or set(ia) & set(ic):
        raise ValueError("regions must be disjoint")
    na, nb = 2 * len(ia), 2 * len(ib)
    sel = majorana_indices(ia + ib + ic)
    g = cov.gamma[np.ix_(sel, sel)]
    m = g.shape[0]
    k1 = _kernel(g[: na + nb, : na + nb], clamp)
    k2 = _kernel(g[na:, na:], clamp)
    if warn:
        frac = (k1.n_clamped + k2.n_clamped) / max(1, k1.n_values + k2.n_values)
        if frac > CLAMP_WARN_FRACTION:
            warnings.warn(f"{frac:.0%} of entanglement-spectrum values were clamped",
                          ClampDominated, stacklevel=2)
    h1 = np.zeros((m, m))
    h2 = np.zeros((m, m))
    h1[: na + nb, : na + nb] = k1.matrix
    h2[na:, na:] = k2.matrix
    comm = h1 @ h2 - h2 @ h1
    return float(0.25 * np.einsum("ij,ji->", comm, g))


def gaussian_cmi(cov: MajoranaCovariance, x, y, z) -> float:
    x, y, z = list(x), list(y), list(z)
    s = lambda *parts: region_entropy(cov, [v for p in parts for v in p])  # noqa: E731
    return s(x, y) + s(y, z) - s(y) - s(x, y, z)


def gaussian_tee(cov: MajoranaCovariance, a, b, c) -> float:
    a, b, c = list(a), list(b), list(c)
    s = lambda *parts: region_entropy(cov, [v for p in parts for v in p])  # noqa: E731
    return s(a) + s(b) + s(c) - s(a, b) - s(b, c) - s(c, a) + s(a, b, c)


def conjugate_covariance(cov: MajoranaCovariance) -> MajoranaCovariance:
    """Covariance of the complex-conjugated state (c -> c, d -> -d)."""
    s = np.tile([1.0, -1.0], cov.n_modes)
    return MajoranaCovariance(-(s[:, None] * cov.gamma * s[None, :]), cov.modes, cov.positions)


# --- random states -----------------------------------------------------------

def random_covariance(n: int, rng: np.random.Generator, pure: bool = False,
                      modes: Sequence[Hashable] | None = None) -> MajoranaCovariance:
    o = special_ortho_group.rvs(2 * n, random_state=rng)
    nu = np.ones(n) if pure else rng.uniform(0.05, 0.95, size=n)
    nu = nu * rng.choice([-1.0, 1.0], size=n)
    t = np.zeros((2 * n, 2 * n))
    for k in range(n):
        t[2 * k, 2 * k + 1], t[2 * k + 1, 2 * k] = nu[k], -nu[k]
    return MajoranaCovariance(o @ t @ o.T, modes)


def random_kernel(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    m = rng.normal(scale=scale, size=(2 * n, 2 * n))
    return m - m.T


def block_diagonal(*covs: MajoranaCovariance) -> MajoranaCovariance:
    """Product state of independent Gaussian blocks.

    Mode labels are concatenated when they are distinct, else renumbered.
    """
    g = scipy.linalg.block_diag(*[c.gamma for c in covs])
    modes = [m for c in covs for m in c.modes]
    if len(set(modes)) != len(modes):
        modes = None
    return MajoranaCovariance(g, modes)
