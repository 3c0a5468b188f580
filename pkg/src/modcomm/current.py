"""Local decomposition of a disk's modular Hamiltonian and its modular current.

The disk's modular Hamiltonian is written as a signed sum of face, edge and
vertex terms (faces +1, edges not lying entirely on the boundary -1, interior
vertices +1).  Each term is shared equally among its cells to give per-site
generators, and the modular current is ``f_uv = i<[K_u, K_v]>``.

Symbolic mode evaluates every ``i<[K_X, K_Y]>`` with exact rationals, in
units of the reference value J, under ideal area-law rules.  Numeric mode
hands the same pairs to a backend evaluator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ConservationViolated, CutTooShallow, UnreducedTerm
from .lattice import (Cell, Disk, adjacent, hex_distance, is_chain_like, neighbors,
                      orientation, position)

# The reference corner (A at -30 deg, B at 90 deg, C at 210 deg about the
# shared vertex) runs counterclockwise; J is defined as its value.
REFERENCE_ORIENTATION = 1
EDGE_WINDOW = 3.6


@dataclass(frozen=True, order=True)
class SymbolicValue:
    """An exact rational multiple of J."""

    coefficient: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))

    def __add__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        return SymbolicValue(self.coefficient + other.coefficient)

    __radd__ = __add__

    def __neg__(self):
        return SymbolicValue(-self.coefficient)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k):
        return SymbolicValue(self.coefficient * Fraction(k))

    __rmul__ = __mul__

    def __bool__(self):
        return self.coefficient != 0

    def __float__(self):
        return float(self.coefficient)

    def __str__(self):
        q = self.coefficient
        return "0" if q == 0 else f"{q} J"

    def to_json(self) -> list[int]:
        return [self.coefficient.numerator, self.coefficient.denominator]


ZERO = SymbolicValue()


@dataclass(frozen=True)
class Term:
    support: frozenset
    kind: str  # face | edge | vertex
    coefficient: Fraction


@dataclass(frozen=True)
class TermList:
    entries: tuple

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def count(self, kind: str) -> int:
        return sum(1 for t in self.entries if t.kind == kind)

    def as_multiset(self) -> dict[frozenset, Fraction]:
        out: dict[frozenset, Fraction] = {}
        for t in self.entries:
            out[t.support] = out.get(t.support, Fraction(0)) + t.coefficient
        return {k: v for k, v in out.items() if v}


def _sort_key(support: frozenset):
    return (len(support), sorted(support))


def decompose_modular_ham(disk: Disk) -> TermList:
    faces = [Term(f, "face", Fraction(1)) for f in disk.faces]
    edges = [Term(e, "edge", Fraction(-1)) for e in disk.edges - disk.boundary_edges]
    verts = [Term(frozenset({v}), "vertex", Fraction(1)) for v in disk.interior]
    entries = sorted(faces + edges + verts, key=lambda t: _sort_key(t.support))
    return TermList(tuple(entries))


@dataclass(frozen=True)
class SiteGenerator:
    site: Cell
    weights: tuple  # ((support, Fraction), ...)

    def items(self):
        return iter(self.weights)

    def as_dict(self) -> dict[frozenset, Fraction]:
        return dict(self.weights)


def site_generators(terms: TermList, disk: Disk) -> dict[Cell, SiteGenerator]:
    """Share each term equally among its cells (1/3 per face, 1/2 per edge)."""
    acc: dict[Cell, dict] = {c: {} for c in sorted(disk.cells)}
    for t in terms:
        share = t.coefficient / len(t.support)
        for c in t.support:
            if c not in acc:
                raise ValueError(f"term support leaves the disk at {c}")
            acc[c][t.support] = acc[c].get(t.support, Fraction(0)) + share
    return {c: SiteGenerator(c, tuple(sorted(w.items(), key=lambda kv: _sort_key(kv[0]))))
            for c, w in acc.items() if w}


# --- rule engine -------------------------------------------------------------

@lru_cache(maxsize=None)
def pair_commutator(x: frozenset, y: frozenset) -> int:
    """i<[K_X, K_Y]> in units of J under ideal area-law rules."""
    if not x & y:
        return 0  # disjoint supports
    if x <= y or y <= x:
        return 0  # i<[K_XY, K_Y]> and equal supports
    a, b, c = x - y, x & y, y - x
    if is_chain_like(a, b, c):
        return 0  # Markov chain, CMI = 0
    corners = [(p, q, r) for p in a for q in b for r in c
               if adjacent(p, q) and adjacent(q, r) and adjacent(p, r)]
    if len(corners) != 1:
        raise UnreducedTerm(f"no reduction rule for A={sorted(a)}, B={sorted(b)}, C={sorted(c)}")
    return orientation(*corners[0]) * REFERENCE_ORIENTATION


def _overlap(gu: SiteGenerator, gv: SiteGenerator) -> bool:
    return hex_distance(gu.site, gv.site) <= 2


class SymbolicCurrent:
    """Exact modular currents on a disk, cached per site pair."""

    def __init__(self, disk: Disk):
        self.disk = disk
        self.terms = decompose_modular_ham(disk)
        self.generators = site_generators(self.terms, disk)
        self._cache: dict = {}

    def f(self, u: Cell, v: Cell) -> SymbolicValue:
        if u == v:
            raise ValueError("u and v must differ")
        if (v, u) in self._cache:
            return -self._cache[(v, u)]
        if (u, v) not in self._cache:
            gu, gv = self.generators.get(u), self.generators.get(v)
            total = Fraction(0)
            if gu and gv and _overlap(gu, gv):
                for x, cx in gu.items():
                    for y, cy in gv.items():
                        k = pair_commutator(x, y)
                        if k:
                            total += cx * cy * k
            self._cache[(u, v)] = SymbolicValue(total)
        return self._cache[(u, v)]


def symbolic_current(u: Cell, v: Cell, disk: Disk) -> SymbolicValue:
    return SymbolicCurrent(disk).f(u, v)


# --- numeric evaluation ------------------------------------------------------

class PairEvaluator:
    """Backend hook: ``pair(X, Y)`` returns i<[K_X, K_Y]> for cell sets X, Y."""

    def __init__(self):
        self._cache: dict = {}

    def pair(self, x: frozenset, y: frozenset) -> float:
        if not x & y or x <= y or y <= x:
            return 0.0
        if (y, x) in self._cache:
            return -self._cache[(y, x)]
        if (x, y) not in self._cache:
            self._cache[(x, y)] = self._compute(x, y)
        return self._cache[(x, y)]

    def _compute(self, x: frozenset, y: frozenset) -> float:
        raise NotImplementedError


class GaussianPairEvaluator(PairEvaluator):
    """Pairs evaluated on a Majorana covariance; ``cells`` maps cell -> modes."""

    def __init__(self, cov, cells: Mapping[Cell, Iterable], clamp: float = 1e-12):
        super().__init__()
        from .gaussian import majorana_indices
        self.cov = cov
        self.clamp = clamp
        self._maj = {c: majorana_indices(cov.index(list(ms))) for c, ms in cells.items()}
        self._kernels: dict = {}

    def _indices(self, cells: Iterable[Cell]) -> np.ndarray:
        return np.concatenate([self._maj[c] for c in sorted(cells)])

    def kernel(self, x: frozenset) -> np.ndarray:
        from .gaussian import _kernel
        if x not in self._kernels:
            idx = self._indices(x)
            self._kernels[x] = _kernel(self.cov.gamma[np.ix_(idx, idx)], self.clamp).matrix
        return self._kernels[x]

    def _compute(self, x, y):
        union = self._indices(x | y)
        where = {m: i for i, m in enumerate(union)}
        ix = [where[m] for m in self._indices(x)]
        iy = [where[m] for m in self._indices(y)]
        n = len(union)
        h1 = np.zeros((n, n))
        h2 = np.zeros((n, n))
        h1[np.ix_(ix, ix)] = self.kernel(x)
        h2[np.ix_(iy, iy)] = self.kernel(y)
        g = self.cov.gamma[np.ix_(union, union)]
        return float(0.25 * np.einsum("ij,ji->", h1 @ h2 - h2 @ h1, g))


class DensePairEvaluator(PairEvaluator):
    """Pairs evaluated with the dense backend; ``cells`` maps cell -> sites."""

    def __init__(self, state, cells: Mapping[Cell, Iterable], floor: float = 1e-12):
        super().__init__()
        self.state = state
        self.floor = floor
        self._sites = {c: list(s) for c, s in cells.items()}

    def _sites_of(self, cells):
        return [s for c in sorted(cells) for s in self._sites[c]]

    def _compute(self, x, y):
        from .dense import modular_commutator
        return modular_commutator(self.state, self._sites_of(x - y), self._sites_of(x & y),
                                  self._sites_of(y - x), self.floor)


def numeric_current(evaluator: PairEvaluator, generators: Mapping[Cell, SiteGenerator],
                    u: Cell, v: Cell) -> float:
    gu, gv = generators.get(u), generators.get(v)
    if not gu or not gv or not _overlap(gu, gv):
        return 0.0
    return float(sum(float(cx * cy) * evaluator.pair(x, y)
                     for x, cx in gu.items() for y, cy in gv.items()))


# --- current maps ------------------------------------------------------------

def _cell_key(c: Cell) -> str:
    return f"{c[0]},{c[1]}"


@dataclass(frozen=True)
class CurrentMap:
    mode: str
    values: Mapping  # (u, v) with u < v -> value
    divergence: Mapping  # u -> sum_v f_uv
    cells: tuple = field(default=())

    def f(self, u: Cell, v: Cell):
        zero = ZERO if self.mode == "symbolic" else 0.0
        if (u, v) in self.values:
            return self.values[(u, v)]
        if (v, u) in self.values:
            return -self.values[(v, u)]
        return zero

    def nonzero(self):
        return {k: v for k, v in self.values.items() if (v if self.mode == "symbolic" else v != 0)}

    def to_dict(self) -> dict:
        enc = (lambda v: v.to_json()) if self.mode == "symbolic" else float
        return {
            "mode": self.mode,
            "cells": [list(c) for c in self.cells],
            "currents": [{"u": list(u), "v": list(v), "f": enc(val)}
                         for (u, v), val in sorted(self.values.items())],
            "divergence": {_cell_key(c): enc(val) for c, val in sorted(self.divergence.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _pairs(disk: Disk):
    cells = sorted(disk.cells)
    for u, v in combinations(cells, 2):
        if hex_distance(u, v) <= 2:
            yield u, v


def current_report(disk: Disk, mode: str = "symbolic",
                   evaluator: PairEvaluator | None = None) -> CurrentMap:
    """All modular currents on a disk plus per-site divergence."""
    if mode == "symbolic":
        engine = SymbolicCurrent(disk)
        values = {(u, v): engine.f(u, v) for u, v in _pairs(disk)}
        zero = ZERO
    elif mode == "numeric":
        if evaluator is None:
            raise ValueError("numeric mode needs a pair evaluator")
        gens = site_generators(decompose_modular_ham(disk), disk)
        values = {(u, v): numeric_current(evaluator, gens, u, v) for u, v in _pairs(disk)}
        zero = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    div = {c: zero for c in disk.cells}
    for (u, v), val in values.items():
        div[u] = div[u] + val
        div[v] = div[v] - val
    if mode == "symbolic":
        bad = [c for c, d in div.items() if d]
        if bad:
            raise ConservationViolated(f"nonzero divergence at {sorted(bad)[:5]}")
    return CurrentMap(mode, values, div, tuple(sorted(disk.cells)))


# --- edge current ------------------------------------------------------------

@dataclass(frozen=True)
class Cut:
    """A cut between adjacent boundary cells; ``right`` follows ``left`` counterclockwise."""

    left: Cell
    right: Cell


def boundary_cuts(disk: Disk) -> list[Cut]:
    ring = disk.boundary_ring()
    cuts = []
    for i, p in enumerate(ring):
        q = ring[(i + 1) % len(ring)]
        if adjacent(p, q):
            cuts.append(Cut(p, q))
    return cuts


@dataclass(frozen=True)
class EdgeCurrent:
    total: object  # SymbolicValue or float
    contributions: Mapping
    left: frozenset
    right: frozenset


def cut_sides(disk: Disk, cut: Cut, window: float = EDGE_WINDOW) -> tuple[frozenset, frozenset]:
    """Cells near the cut, split by the radial line through the cut midpoint."""
    cx, cy = disk.centroid
    (x1, y1), (x2, y2) = position(cut.left), position(cut.right)
    mx, my = (x1 + x2) / 2 - cx, (y1 + y2) / 2 - cy
    left, right = set(), set()
    for c in disk.cells:
        x, y = position(c)
        x, y = x - cx, y - cy
        if math.hypot(x - mx, y - my) > window:
            continue
        s = mx * y - my * x
        (right if s > 1e-9 else left).add(c)
    return frozenset(left), frozenset(right)


def edge_current(disk: Disk, cut: Cut, mode: str = "symbolic",
                 evaluator: PairEvaluator | None = None,
                 window: float = EDGE_WINDOW) -> EdgeCurrent:
    """I = sum over u in L, v in R of f_uv; L is the clockwise side of the cut."""
    if cut.left not in disk.boundary or cut.right not in disk.boundary or \
            not adjacent(cut.left, cut.right):
        raise CutTooShallow("a cut must separate two adjacent boundary cells")
    left, right = cut_sides(disk, cut, window)
    for side in (left, right):
        if sum(1 for c in side if disk.depth(c) <= 2) < 3:
            raise CutTooShallow("each side needs at least 3 cells within depth 2")
        # the edge value needs bulk (depth >= 3) behind the boundary layer on both sides
        if not any(disk.depth(c) >= 3 for c in side):
            raise CutTooShallow("the cut does not reach the bulk on both sides")
    if mode == "symbolic":
        engine = SymbolicCurrent(disk)
        fval: Callable = engine.f
        total = ZERO
    else:
        if evaluator is None:
            raise ValueError("numeric mode needs a pair evaluator")
        gens = site_generators(decompose_modular_ham(disk), disk)
        fval = lambda u, v: numeric_current(evaluator, gens, u, v)  # noqa: E731
        total = 0.0
    contrib = {}
    for u in sorted(left):
        for v in sorted(right):
            if hex_distance(u, v) > 2:
                continue
            val = fval(u, v)
            if val:
                contrib[(u, v)] = val
                total = total + val
    return EdgeCurrent(total, contrib, left, right)


# --- rendering ---------------------------------------------------------------

def render_svg(current: CurrentMap, scale: float = 40.0) -> str:
    """Hex cells with one arrow per nonzero current, width proportional to |f|."""
    cells = current.cells
    pts = {c: position(c) for c in cells}
    xs = [p[0] for p in pts.values()] or [0.0]
    ys = [p[1] for p in pts.values()] or [0.0]
    pad = 1.0
    x0, y1 = min(xs) - pad, max(ys) + pad
    width = (max(xs) - min(xs) + 2 * pad) * scale
    height = (max(ys) - min(ys) + 2 * pad) * scale

    def tr(x, y):
        return ((x - x0) * scale, (y1 - y) * scale)

    rad = 1 / math.sqrt(3)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           f'width="{width:.1f}" height="{height:.1f}">',
           '<defs><marker id="arr" markerWidth="6" markerHeight="6" refX="5" refY="3" '
           'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#c0392b"/></marker></defs>']
    for c in cells:
        x, y = pts[c]
        corners = [tr(x + rad * math.cos(math.pi / 6 + k * math.pi / 3),
                      y + rad * math.sin(math.pi / 6 + k * math.pi / 3)) for k in range(6)]
        poly = " ".join(f"{px:.2f},{py:.2f}" for px, py in corners)
        out.append(f'<polygon points="{poly}" fill="#f4f4f4" stroke="#888" stroke-width="1"/>')
    vals = {k: float(v) for k, v in current.values.items() if float(v) != 0}
    top = max((abs(v) for v in vals.values()), default=1.0)
    for (u, v), val in sorted(vals.items()):
        a, b = (u, v) if val > 0 else (v, u)
        (ax, ay), (bx, by) = tr(*pts[a]), tr(*pts[b])
        # shorten so arrows sit between cell centres
        sx, sy = ax + 0.25 * (bx - ax), ay + 0.25 * (by - ay)
        ex, ey = ax + 0.75 * (bx - ax), ay + 0.75 * (by - ay)
        w = 0.5 + 3.0 * abs(val) / top
        out.append(f'<line x1="{sx:.2f}" y1="{sy:.2f}" x2="{ex:.2f}" y2="{ey:.2f}" '
                   f'stroke="#c0392b" stroke-width="{w:.2f}" marker-end="url(#arr)"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
