from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from modcomm import current as cur
from modcomm import dense
from modcomm.errors import CutTooShallow
from modcomm.lattice import build_disk, neighbors, orientation


def disk(r):
    return build_disk(None, (0, 0), r)


# --- independent oracle for the decomposition --------------------------------
# Repeated Markov splitting K_XYZ = K_XY + K_YZ - K_Y: the disk splits into
# overlapping two-row strips, each strip into a zigzag of triangles and each
# shared row into a chain of edges.

def _segment(cells):
    cells = sorted(cells)
    out = Counter()
    for a, b in zip(cells, cells[1:]):
        out[frozenset((a, b))] += 1
    for c in cells[1:-1]:
        out[frozenset((c,))] -= 1
    return out


def _strip(lower, upper):
    cells = set(lower) | set(upper)
    tris = []
    for q, r in lower:
        for t in (((q, r), (q + 1, r), (q + 1, r + 1)), ((q, r), (q, r + 1), (q + 1, r + 1))):
            if all(c in cells for c in t):
                tris.append(frozenset(t))
    tris.sort(key=lambda t: sum(c[0] - c[1] / 2 for c in t))
    out = Counter()
    for t in tris:
        out[t] += 1
    for s, t in zip(tris, tris[1:]):
        assert len(s & t) == 2
        out[s & t] -= 1
    return out


def splitting_oracle(d):
    rows = {}
    for c in d.cells:
        rows.setdefault(c[1], []).append(c)
    keys = sorted(rows)
    total = Counter()
    for lo, hi in zip(keys, keys[1:]):
        total.update(_strip(rows[lo], rows[hi]))
    for r in keys[1:-1]:
        total.subtract(_segment(rows[r]))
    return {k: Fraction(v) for k, v in total.items() if v}


@pytest.mark.parametrize("r", [2, 3, 4, 5])
def test_decomposition_matches_splitting_oracle(r):
    d = disk(r)
    assert cur.decompose_modular_ham(d).as_multiset() == splitting_oracle(d)


def test_term_counts():
    d = disk(3)
    terms = cur.decompose_modular_ham(d)
    assert terms.count("face") == 54
    assert terms.count("vertex") == len(d.interior)
    assert terms.count("edge") == len(d.edges) - len(d.boundary_edges)


def test_generator_weights():
    d = disk(3)
    gens = cur.site_generators(cur.decompose_modular_ham(d), d)
    # a hexagon corner touches two faces and one non-boundary edge
    corner = (3, 0)
    assert sum(1 for n in neighbors(corner) if n in d.cells) == 3
    weights = sorted(gens[corner].as_dict().values())
    assert weights == [Fraction(-1, 2), Fraction(1, 3), Fraction(1, 3)]
    # generators sum back to the decomposition
    total = Counter()
    for g in gens.values():
        for k, v in g.items():
            total[k] += v
    assert {k: v for k, v in total.items() if v} == cur.decompose_modular_ham(d).as_multiset()


def test_pair_rule_reference_orientation():
    a, b, c = (0, 0), (1, 0), (1, 1)
    x, y = frozenset((a, b)), frozenset((b, c))
    assert cur.pair_commutator(x, y) == orientation(a, b, c) * cur.REFERENCE_ORIENTATION
    assert cur.pair_commutator(y, x) == -cur.pair_commutator(x, y)
    assert cur.pair_commutator(x, frozenset(((5, 5),))) == 0
    assert cur.pair_commutator(x, frozenset((a,))) == 0


TABLE = {1: (-2, 0), 2: (-1, 1), 3: (-1, 0), 4: (0, 2), 5: (0, 1), 6: (1, 2),
         7: (1, 1), 8: (1, 0), 9: (2, 2), 10: (2, 1), 11: (2, 0)}
EXPECTED = {1: Fraction(-1, 9), 2: Fraction(-1, 18), 3: Fraction(5, 36), 4: 0, 5: 0, 6: 0,
            7: 0, 8: Fraction(-5, 36), 9: 0, 10: Fraction(1, 18), 11: Fraction(1, 9)}


def test_boundary_table():
    d = disk(6)
    engine = cur.SymbolicCurrent(d)
    v = (-3, -6)
    for k, (dq, dr) in TABLE.items():
        assert engine.f(v, (v[0] + dq, v[1] + dr)).coefficient == EXPECTED[k], k


@pytest.mark.parametrize("r", [3, 4])
def test_conservation_and_bulk(r):
    d = disk(r)
    cmap = cur.current_report(d, "symbolic")
    assert all(not v for v in cmap.divergence.values())
    for (u, v), val in cmap.values.items():
        if u in d.interior and v in d.interior:
            assert not val


def test_antisymmetry():
    d = disk(3)
    engine = cur.SymbolicCurrent(d)
    for u in d.cells:
        for v in neighbors(u):
            if v in d.cells:
                assert engine.f(u, v) == -engine.f(v, u)


def test_mirror_flips_sign():
    d = disk(4)
    m = build_disk(None, (0, 0), 4)
    engine = cur.SymbolicCurrent(d)
    mirror_engine = cur.SymbolicCurrent(m)

    def mirror(c):
        return (c[1] - c[0], c[1])

    for u in d.cells:
        for v in neighbors(u):
            if v in d.cells:
                assert mirror_engine.f(mirror(u), mirror(v)) == -engine.f(u, v)


@pytest.mark.parametrize("r", [3, 4, 5, 6])
def test_every_cut_carries_quarter_j(r):
    d = disk(r)
    fig4 = sorted([Fraction(-5, 36), Fraction(1, 9), Fraction(1, 18), Fraction(1, 9),
                   Fraction(1, 18), Fraction(1, 18)])
    straight = 0
    for cut in cur.boundary_cuts(d):
        ec = cur.edge_current(d, cut)
        assert ec.total.coefficient == Fraction(1, 4)
        corners = [c for c in (cut.left, cut.right)
                   if sum(n in d.cells for n in neighbors(c)) == 3]
        if not corners:
            straight += 1
            assert sorted(v.coefficient for v in ec.contributions.values()) == fig4
    assert straight == 6 * (r - 2)


def test_cut_too_shallow():
    d = disk(2)
    with pytest.raises(CutTooShallow):
        cur.edge_current(d, cur.boundary_cuts(d)[0])
    with pytest.raises(CutTooShallow):
        cur.edge_current(disk(3), cur.Cut((0, 0), (1, 0)))


def test_symbolic_value_format():
    assert str(cur.SymbolicValue(Fraction(1, 4))) == "1/4 J"
    assert str(cur.ZERO) == "0"
    assert cur.SymbolicValue(Fraction(-5, 36)).to_json() == [-5, 36]


def test_svg_deterministic():
    cmap = cur.current_report(disk(3), "symbolic")
    svg = cur.render_svg(cmap)
    assert svg == cur.render_svg(cmap)
    assert svg.startswith("<?xml") or svg.startswith("<svg")
    assert 'version="1.1"' in svg


def test_current_map_json():
    import json
    cmap = cur.current_report(disk(3), "symbolic")
    data = json.loads(cmap.to_json())
    assert data["mode"] == "symbolic"
    assert all(v == [0, 1] for v in data["divergence"].values())


# --- numeric mode ------------------------------------------------------------

def _cells_to_sites(d):
    return {c: [i] for i, c in enumerate(sorted(d.cells))}


def test_numeric_product_state_vanishes(rng):
    from modcomm.models import product_state
    d = disk(1)
    ev = cur.DensePairEvaluator(product_state(7, rng), _cells_to_sites(d))
    cmap = cur.current_report(d, "numeric", ev)
    assert max(abs(v) for v in cmap.values.values()) < 1e-10


def test_numeric_block_markov_state_vanishes(rng):
    d = disk(1)
    order = sorted(d.cells)
    psi = np.ones(1, complex)
    for block in (2, 2, 2, 1):
        psi = np.kron(psi, dense.random_pure_state(dense.SiteLayout.qubits(block), rng).amplitudes)
    state = dense.PureState(psi, dense.SiteLayout.qubits(7))
    ev = cur.DensePairEvaluator(state, {c: [i] for i, c in enumerate(order)})
    cmap = cur.current_report(d, "numeric", ev)
    assert max(abs(v) for v in cmap.values.values()) < 1e-9


@pytest.fixture(scope="module")
def chern_current():
    from modcomm import models
    from modcomm.gaussian import gaussian_modular_commutator
    from modcomm.lattice import standard_partition
    spec = models.ModelSpec("chern-insulator", {"mass": 1.0}, extent=(32, 32))
    cov = models.ground_state(spec)
    d = disk(4)
    cells = models.supersites(cov, d.cells, 3.0, models.default_center(spec))
    part = standard_partition(d)
    jref = gaussian_modular_commutator(
        cov, *[[m for c in sorted(part.region(k)) for m in cells[c]] for k in "ABC"], warn=False)
    ev = cur.GaussianPairEvaluator(cov, cells)
    return d, cur.current_report(d, "numeric", ev), jref, ev


def test_numeric_chern_interior_small(chern_current):
    d, cmap, jref, _ = chern_current
    interior = [abs(v) for (u, w), v in cmap.values.items() if u in d.interior and w in d.interior]
    assert max(interior) <= 0.05 * abs(jref)


def test_numeric_chern_matches_symbolic(chern_current):
    d, cmap, jref, _ = chern_current
    sym = cur.current_report(d, "symbolic")
    s = np.array([float(sym.values[k].coefficient) for k in cmap.values])
    f = np.array(list(cmap.values.values()))
    jfit = (s @ f) / (s @ s)
    assert abs(jfit - jref) <= 0.25 * abs(jref)
    big = np.abs(s) > 0
    assert np.all(np.abs(f[big] - jfit * s[big]) <= 0.25 * np.abs(jfit * s[big]))


def test_numeric_edge_current(chern_current):
    d, _, jref, ev = chern_current
    for cut in cur.boundary_cuts(d)[::4]:
        total = cur.edge_current(d, cut, "numeric", ev).total
        assert abs(total - jref / 4) <= 0.25 * abs(jref / 4)


def test_numeric_antisymmetric(chern_current):
    d, _, _, ev = chern_current
    gens = cur.site_generators(cur.decompose_modular_ham(d), d)
    u, v = (0, -4), (1, -3)
    assert abs(cur.numeric_current(ev, gens, u, v) + cur.numeric_current(ev, gens, v, u)) < 1e-9
