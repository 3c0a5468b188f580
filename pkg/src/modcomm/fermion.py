"""Fermionic partial traces in the occupation-number representation.

Mode ``j`` of an ``n``-mode register is tensor factor ``j`` (most significant
bit first).  Annihilators carry Jordan-Wigner strings on the lower modes, so
``|n_1..n_N> = (a_1^dag)^{n_1} ... (a_N^dag)^{n_N} |0>`` without extra signs.
Majoranas are ``c = a + a^dag`` and ``d = i(a^dag - a)``.

Single-mode operators in the twirl of the fermionic partial trace are signed
permutation matrices, stored as ``(perm, phase)`` with
``U |b> = phase[b] |perm[b]>``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable

import numpy as np

from .dense import (DEFAULT_FLOOR, DensityOp, HermitianOp, PureState, SiteLayout,
                    hermitize, _qudit_matrix)
from .errors import OddParity, TwirlTooLarge, WrongStatistics

PARITY_TOL = 1e-12
MAX_TWIRL_MODES = 6


# --- explicit operators ------------------------------------------------------

def _bits(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return np.stack([(idx >> (n - 1 - j)) & 1 for j in range(n)], axis=1) if n else np.zeros((1, 0), int)


@lru_cache(maxsize=None)
def _occupations(n: int) -> np.ndarray:
    out = _bits(n)
    out.setflags(write=False)
    return out


def parity_vector(n: int) -> np.ndarray:
    """(-1)^N on each basis state."""
    return 1 - 2 * (_occupations(n).sum(axis=1) % 2)


def annihilator(n: int, j: int) -> np.ndarray:
    z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    op = np.eye(1)
    for k in range(n):
        op = np.kron(op, z if k < j else lower if k == j else np.eye(2))
    return op.astype(complex)


def majoranas(n: int) -> list[np.ndarray]:
    """[c_1, d_1, c_2, d_2, ...] as dense matrices."""
    out = []
    for j in range(n):
        a = annihilator(n, j)
        out += [a + a.conj().T, 1j * (a.conj().T - a)]
    return out


def parity_of(m: np.ndarray, tol: float = PARITY_TOL) -> str:
    n = int(np.log2(m.shape[0]))
    p = parity_vector(n)
    same = p[:, None] == p[None, :]
    odd = np.abs(m[~same]).max(initial=0) > tol
    even = np.abs(m[same]).max(initial=0) > tol
    return "mixed" if odd and even else "odd" if odd else "even"


def require_even(m: np.ndarray, tol: float = PARITY_TOL) -> None:
    if parity_of(m, tol) != "even":
        raise OddParity("operator has odd-parity matrix elements")


@dataclass(frozen=True)
class FermionOp:
    """Operator on the occupation basis of ``modes``."""

    matrix: np.ndarray
    modes: tuple

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2 ** len(self.modes),) * 2:
            raise ValueError("matrix shape does not match mode count")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def parity(self) -> str:
        return parity_of(self.matrix)

    @property
    def layout(self) -> SiteLayout:
        return SiteLayout.fermions(self.modes)


# --- twirl unitaries ---------------------------------------------------------

def twirl_monomial(n: int, j: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """u_j^(alpha) as (perm, phase): I, a^dag + a, a^dag - a, I - 2 a^dag a."""
    occ = _occupations(n)
    idx = np.arange(2 ** n)
    if alpha == 0:
        return idx, np.ones(2 ** n, dtype=complex)
    nj = occ[:, j]
    if alpha == 3:
        return idx, (1 - 2 * nj).astype(complex)
    string = 1 - 2 * (occ[:, :j].sum(axis=1) % 2)
    flip = idx ^ (1 << (n - 1 - j))
    if alpha == 1:
        return flip, string.astype(complex)
    if alpha == 2:
        return flip, (string * (1 - 2 * nj)).astype(complex)
    raise ValueError("alpha must be 0..3")


def monomial_matrix(perm: np.ndarray, phase: np.ndarray) -> np.ndarray:
    u = np.zeros((perm.size, perm.size), dtype=complex)
    u[perm, np.arange(perm.size)] = phase
    return u


def twirl_unitary(n: int, modes: Iterable[int], alphas: Iterable[int]) -> np.ndarray:
    """u(alpha) = u_{j1}^{alpha1} u_{j2}^{alpha2} ... as a dense matrix."""
    perm, phase = _compose(n, list(modes), list(alphas))
    return monomial_matrix(perm, phase)


def _compose(n, modes, alphas):
    perm = np.arange(2 ** n)
    phase = np.ones(2 ** n, dtype=complex)
    # rightmost factor acts first
    for j, al in reversed(list(zip(modes, alphas))):
        p, f = twirl_monomial(n, j, al)
        phase = phase * f[perm]
        perm = p[perm]
    return perm, phase


# --- mode reordering ---------------------------------------------------------

@lru_cache(maxsize=256)
def mode_permutation(n: int, order: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Signed permutation P with P a_{order[k]} P^dag = a_k.

    Returns ``(perm, sign)`` such that ``P|b> = sign[b] |perm[b]>``.
    """
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the modes")
    occ = _occupations(n)
    new = occ[:, list(order)]
    inversions = np.zeros(2 ** n, dtype=int)
    for k, l in itertools.combinations(range(n), 2):
        if order[k] > order[l]:
            inversions += new[:, k] & new[:, l]
    weights = 1 << np.arange(n - 1, -1, -1)
    perm = new @ weights if n else np.zeros(1, int)
    sign = 1 - 2 * (inversions % 2)
    perm.setflags(write=False)
    sign.setflags(write=False)
    return perm, sign


def _layout_of(rho) -> SiteLayout:
    layout = rho.layout
    if not layout.fermionic:
        raise WrongStatistics("expected a fermionic layout")
    return layout


def reorder_matrix(m: np.ndarray, order: list[int]) -> np.ndarray:
    n = int(round(np.log2(m.shape[0])))
    perm, sign = mode_permutation(n, tuple(order))
    out = np.empty_like(m)
    out[np.ix_(perm, perm)] = sign[:, None] * m * sign[None, :]
    return out


def reorder_state(state, modes_first: list) -> PureState | DensityOp:
    """Same physical state, with ``modes_first`` moved to the front (in order)."""
    layout = _layout_of(state)
    first = [layout.index(s) for s in modes_first]
    order = first + [i for i in range(len(layout.sites)) if i not in first]
    new_layout = SiteLayout.fermions([layout.sites[i] for i in order])
    n = len(order)
    perm, sign = mode_permutation(n, tuple(order))
    if isinstance(state, PureState):
        psi = np.empty_like(state.amplitudes)
        psi[perm] = sign * state.amplitudes
        return PureState(psi, new_layout)
    return DensityOp(reorder_matrix(state.matrix, order), new_layout, validate=False)


# --- partial traces ----------------------------------------------------------

def _as_matrix(rho) -> tuple[np.ndarray, tuple]:
    if isinstance(rho, FermionOp):
        return rho.matrix, rho.modes
    if isinstance(rho, PureState):
        layout = _layout_of(rho)
        return np.outer(rho.amplitudes, rho.amplitudes.conj()), layout.sites
    layout = _layout_of(rho)
    return rho.matrix, layout.sites


def ftrace(rho, traced: Iterable[Hashable], method: str = "auto") -> FermionOp:
    """Fermionic partial trace: the twirl average over traced modes.

    The result is an operator on the full register (identity on the traced
    modes, up to the 1/2^|A| normalization of the twirl).  ``method`` is
    "twirl" (the defining sum over 4^|A| unitaries), "blockwise" (reorder,
    contract, re-embed) or "auto".
    """
    m, modes = _as_matrix(rho)
    require_even(m)
    traced = [t for t in modes if t in set(traced)] if isinstance(traced, (set, frozenset)) else list(traced)
    idx = [modes.index(t) for t in traced]
    n = len(modes)
    if method == "auto":
        method = "twirl" if len(idx) <= 2 else "blockwise"
    if method == "twirl":
        if len(idx) > MAX_TWIRL_MODES:
            raise TwirlTooLarge(f"twirl over {len(idx)} modes exceeds cap {MAX_TWIRL_MODES}")
        acc = np.zeros_like(m)
        for alphas in itertools.product(range(4), repeat=len(idx)):
            perm, phase = _compose(n, idx, alphas)
            acc += phase.conj()[:, None] * m[np.ix_(perm, perm)] * phase[None, :]
        return FermionOp(acc / 4 ** len(idx), modes)
    if method != "blockwise":
        raise ValueError(f"unknown method {method!r}")
    keep = [i for i in range(n) if i not in idx]
    order = keep + idx
    moved = reorder_matrix(m, order)
    dk = 2 ** len(keep)
    red = np.einsum("abcb->ac", moved.reshape(dk, 2 ** len(idx), dk, 2 ** len(idx)))
    full = np.kron(red, np.eye(2 ** len(idx)) / 2 ** len(idx))
    # undo the reordering: P^dag X P
    perm, sign = mode_permutation(n, tuple(order))
    back = sign[:, None] * full[np.ix_(perm, perm)] * sign[None, :]
    return FermionOp(back, modes)


def fermionic_rdm(rho, keep: Iterable[Hashable]) -> DensityOp:
    """rho_A on the kept modes' own occupation basis, normalized to trace 1.

    Kept modes are relabelled in the order given (layout order for sets).
    """
    if isinstance(rho, FermionOp):
        rho = DensityOp(rho.matrix, SiteLayout.fermions(rho.modes), validate=False)
    layout = _layout_of(rho)
    keep = layout.ordered(keep)
    if isinstance(rho, PureState):
        moved = reorder_state(rho, keep)
        m = _qudit_matrix(moved, list(moved.layout.sites[: len(keep)]))
        return DensityOp(hermitize(m), layout.subset(keep), validate=False)
    require_even(rho.matrix)
    moved = reorder_state(rho, keep)
    m = _qudit_matrix(moved, list(moved.layout.sites[: len(keep)]))
    return DensityOp(hermitize(m), layout.subset(keep), validate=False)


def reduced_tilde(rho, keep: Iterable[Hashable], method: str = "auto") -> FermionOp:
    """rho~_A = fTr_{complement}(rho), an operator on the full register."""
    _, modes = _as_matrix(rho)
    keep = set(keep)
    return ftrace(rho, [m for m in modes if m not in keep], method=method)


# --- CMI operator ------------------------------------------------------------

@dataclass(frozen=True)
class CmiOperator:
    operator: HermitianOp
    rank_deficient: bool


def _log_floor(m: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    w, v = np.linalg.eigh(m)
    return (v * np.log(np.maximum(w, floor))) @ v.conj().T, bool(w.min() < floor)


def operator_cmi_combination(rho, a, b, c, normalization: str = "blockwise",
                             floor: float = DEFAULT_FLOOR) -> CmiOperator:
    """ln rho_AB + ln rho_BC - ln rho_B - ln rho_ABC on the ABC register.

    ``normalization="blockwise"`` uses trace-one reduced states embedded with
    identities; ``"tilde"`` uses the twirled operators rho~ on the full register.
    Both agree exactly when the reductions are full rank.  When any reduction
    is rank deficient the result is projected onto the support of rho_ABC.
    """
    m, modes = _as_matrix(rho)
    lay = SiteLayout.fermions(modes)
    a, b, c = lay.ordered(a), lay.ordered(b), lay.ordered(c)
    rho_abc = fermionic_rdm(DensityOp(m, lay, validate=False), a + b + c)
    sub = rho_abc.layout.sites
    terms = (((a + b), 1), ((b + c), 1), (b, -1), ((a + b + c), -1))
    deficient = False
    total = np.zeros_like(rho_abc.matrix)
    if normalization == "blockwise":
        for region, sgn in terms:
            red = fermionic_rdm(rho_abc, region)
            lg, bad = _log_floor(red.matrix, floor)
            deficient |= bad
            total += sgn * _embed(lg, region, list(sub))
    elif normalization == "tilde":
        for region, sgn in terms:
            red = reduced_tilde(rho_abc, region)
            lg, bad = _log_floor(red.matrix, floor / 2 ** (len(sub) - len(region)))
            deficient |= bad
            total += sgn * lg
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if deficient:
        w, v = np.linalg.eigh(rho_abc.matrix)
        proj = v[:, w > floor]
        proj = proj @ proj.conj().T
        total = proj @ total @ proj
    return CmiOperator(HermitianOp(hermitize(total), rho_abc.layout), deficient)


def _embed(op: np.ndarray, region: list, modes: list) -> np.ndarray:
    """Even operator on ``region`` embedded into the ordered register ``modes``."""
    n = len(modes)
    rest = [s for s in modes if s not in region]
    full = np.kron(op, np.eye(2 ** len(rest)))
    order = [modes.index(s) for s in region + rest]
    perm, sign = mode_permutation(n, tuple(order))
    return sign[:, None] * full[np.ix_(perm, perm)] * sign[None, :]
