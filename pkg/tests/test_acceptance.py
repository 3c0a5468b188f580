"""Acceptance criteria 1-9.

Each test prints one ``CRITERION n: PASS|FAIL`` line (collected again in the
pytest terminal summary).  Run directly with ``python3 tests/test_acceptance.py``
to get just the nine lines.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from modcomm import current as cur
from modcomm import dense, gaussian, models
from modcomm.dense import DensityOp, SiteLayout
from modcomm.fermion import fermionic_rdm, majoranas, reduced_tilde
from modcomm.lattice import build_disk, neighbors
from modcomm.markov import markov_suite, random_markov_state

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------

def test_criterion_1_fermionic_partial_trace_example():
    t0 = time.perf_counter()
    m = np.zeros((4, 4), complex)
    m[0, 0] = 1
    rho = DensityOp(m, SiteLayout.fermions(2))
    c1, d1 = majoranas(2)[:2]
    err_tilde = np.abs(reduced_tilde(rho, [0]).matrix - (np.eye(4) - 1j * c1 @ d1) / 4).max()
    err_rdm = np.abs(fermionic_rdm(rho, [0]).matrix - np.diag([1.0, 0.0])).max()
    wall = time.perf_counter() - t0
    ok = err_tilde <= 1e-14 and err_rdm <= 1e-14 and wall < 1.0
    record(1, ok, f"tilde err {err_tilde:.1e}, rdm err {err_rdm:.1e}, {wall:.2f}s")


# 2 ---------------------------------------------------------------------------

def test_criterion_2_markov_implication():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = {"cmi": 0.0, "petz": 0.0, "J": 0.0, "gt": 0.0}
    for k in range(200):
        stats = "qudit" if k % 2 == 0 else "fermionic"
        sizes = tuple(int(v) for v in rng.integers(1, 3, size=4))
        state, (a, b, c) = random_markov_state(rng, sizes, stats)
        rep = markov_suite(state, a, b, c, strict=True)
        worst["cmi"] = max(worst["cmi"], rep.cmi_value)
        worst["petz"] = max(worst["petz"], rep.petz_residual)
        worst["J"] = max(worst["J"], abs(rep.j_value))
        worst["gt"] = max(worst["gt"], abs(rep.gt_trace - 1))
    wall = time.perf_counter() - t0
    ok = (worst["cmi"] <= 1e-10 and worst["petz"] <= 1e-8 and worst["J"] <= 1e-8
          and worst["gt"] <= 1e-9 and wall < 120)
    detail = ", ".join(f"max {k} {v:.1e}" for k, v in worst.items())
    record(2, ok, f"200 states, {detail}, {wall:.1f}s")


# 3 ---------------------------------------------------------------------------

def _pure_four_block(rng, fermionic):
    sizes = [int(v) for v in rng.integers(1, 3, size=4)]
    n = sum(sizes)
    lay = SiteLayout.fermions(n) if fermionic else SiteLayout.qubits(n)
    psi = dense.random_pure_state(lay, rng, even=fermionic)
    order = [int(v) for v in rng.permutation(n)]
    cuts = np.cumsum(sizes)
    a, b, c, d = (order[lo:hi] for lo, hi in zip([0, *cuts[:3]], cuts))
    return psi, a, b, c, d


def test_criterion_3_algebraic_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = {"imag": 0.0, "antisym": 0.0, "conj": 0.0, "swap": 0.0}

    def check(state, a, b, c):
        z = dense.modular_commutator_complex(state, a, b, c)
        worst["imag"] = max(worst["imag"], abs(z.imag))
        worst["antisym"] = max(worst["antisym"],
                               abs(z.real + dense.modular_commutator(state, c, b, a)))
        worst["conj"] = max(worst["conj"],
                            abs(z.real + dense.modular_commutator(dense.conjugate(state), a, b, c)))
        return z.real

    for k in range(50):
        fermionic = k % 2 == 1
        lay = SiteLayout.fermions(4) if fermionic else SiteLayout.qubits(4)
        rho = dense.random_density(lay, rng, rank=int(rng.integers(1, 17)), even=fermionic)
        perm = [int(v) for v in rng.permutation(4)]
        check(rho, perm[:1], perm[1:3], perm[3:])
    for k in range(50):
        psi, a, b, c, d = _pure_four_block(rng, fermionic=k % 2 == 1)
        j = check(psi, a, b, c)
        worst["swap"] = max(worst["swap"], abs(j - dense.modular_commutator(psi, b, a, d)))
    wall = time.perf_counter() - t0
    ok = (worst["imag"] <= 1e-10 and worst["antisym"] <= 1e-10 and worst["conj"] <= 1e-10
          and worst["swap"] <= 1e-8 and wall < 300)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(3, ok, f"100 states, {detail}, {wall:.1f}s")


# 4 ---------------------------------------------------------------------------

def test_criterion_4_gaussian_dense_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = {"entropy": 0.0, "cmi": 0.0, "J": 0.0}
    for k in range(100):
        n = int(rng.integers(3, 9))
        cov = gaussian.random_covariance(n, rng, pure=k % 3 == 0)
        rho = gaussian.to_density(cov)
        perm = [int(v) for v in rng.permutation(n)]
        i, j = sorted(int(v) for v in rng.choice(np.arange(1, n), size=2, replace=False))
        a, b, c = perm[:i], perm[i:j], perm[j:]
        for region in (a, a + b, b + c, a + b + c):
            worst["entropy"] = max(worst["entropy"], abs(gaussian.region_entropy(cov, region)
                                                         - dense.region_entropy(rho, region)))
        worst["cmi"] = max(worst["cmi"], abs(gaussian.gaussian_cmi(cov, a, b, c)
                                             - dense.cmi(rho, a, b, c)))
        gj = gaussian.gaussian_modular_commutator(cov, a, b, c, warn=False)
        worst["J"] = max(worst["J"], abs(gj - dense.modular_commutator(rho, a, b, c)))
    wall = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and wall < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(4, ok, f"100 states up to 8 modes, {detail}, {wall:.1f}s")


# 5 ---------------------------------------------------------------------------

TABLE_OFFSETS = {1: (-2, 0), 2: (-1, 1), 3: (-1, 0), 4: (0, 2), 5: (0, 1), 6: (1, 2),
                 7: (1, 1), 8: (1, 0), 9: (2, 2), 10: (2, 1), 11: (2, 0)}
TABLE_VALUES = [Fraction(-1, 9), Fraction(-1, 18), Fraction(5, 36), 0, 0, 0, 0,
                Fraction(-5, 36), 0, Fraction(1, 18), Fraction(1, 9)]
CUT_VALUES = sorted([Fraction(-5, 36), Fraction(1, 9), Fraction(1, 18), Fraction(1, 9),
                     Fraction(1, 18), Fraction(1, 18)])


def test_criterion_5_symbolic_reproduction():
    t0 = time.perf_counter()
    problems = []
    d6 = build_disk(None, (0, 0), 6)
    engine = cur.SymbolicCurrent(d6)
    v = (-3, -6)
    got = [engine.f(v, (v[0] + dq, v[1] + dr)).coefficient for dq, dr in TABLE_OFFSETS.values()]
    if got != TABLE_VALUES:
        problems.append(f"table {got}")
    if sum(CUT_VALUES) != Fraction(1, 4):
        problems.append("cut coefficients do not sum to 1/4")
    ncuts = 0
    for r in (3, 4, 5, 6):
        d = build_disk(None, (0, 0), r)
        cmap = cur.current_report(d, "symbolic")
        if any(cmap.divergence.values()):
            problems.append(f"divergence r={r}")
        if any(val for (a, b), val in cmap.values.items() if a in d.interior and b in d.interior):
            problems.append(f"interior current r={r}")
        for cut in cur.boundary_cuts(d):
            ncuts += 1
            ec = cur.edge_current(d, cut)
            if ec.total.coefficient != Fraction(1, 4):
                problems.append(f"cut {cut} r={r}: {ec.total}")
            straight = all(sum(n in d.cells for n in neighbors(c)) > 3
                           for c in (cut.left, cut.right))
            if straight and sorted(x.coefficient for x in ec.contributions.values()) != CUT_VALUES:
                problems.append(f"cut coefficients at {cut} r={r}")
    wall = time.perf_counter() - t0
    ok = not problems and wall < 60
    record(5, ok, f"table exact, {ncuts} cuts on r=3..6 at J/4, {wall:.1f}s"
           if ok else "; ".join(problems[:3]))


# 6 ---------------------------------------------------------------------------

def _ccc(spec, radii):
    cov = models.ground_state(spec)
    out = []
    for r in radii:
        regs = models.disk_regions(cov, float(r), models.default_center(spec))
        j = gaussian.gaussian_modular_commutator(cov, regs["A"], regs["B"], regs["C"], warn=False)
        out.append(3 * j / math.pi)
    return out


def test_criterion_6_free_fermion_ccc():
    t0 = time.perf_counter()
    radii = (4, 6, 8)
    cases = [("chern-insulator", {"mass": 1.0}), ("chern-insulator", {"mass": -1.0}),
             ("p-plus-ip", {"mu": 2.0}), ("p-plus-ip", {"mu": -2.0})]
    problems, parts = [], []
    signs = {}
    for kind, params in cases:
        spec = models.ModelSpec(kind, params, extent=(24, 24))
        expected = models.expected_ccc(spec)
        vals = _ccc(spec, radii)
        errs = [abs(v - expected) for v in vals]
        signs[(kind, next(iter(params.values())))] = math.copysign(1, vals[1])
        parts.append(f"{kind}{params} r6 {vals[1]:+.4f} (exp {expected:+.1f})")
        if errs[1] > 0.2:
            problems.append(f"{kind} {params}: error {errs[1]:.3f}")
        if not errs[0] > errs[1] > errs[2]:
            problems.append(f"{kind} {params}: errors not monotone {errs}")
    if signs[("chern-insulator", 1.0)] == signs[("chern-insulator", -1.0)]:
        problems.append("sign of J does not follow C")
    triv = _ccc(models.ModelSpec("trivial-insulator", extent=(24, 24)), (6,))[0]
    parts.append(f"trivial {triv:+.1e}")
    if abs(triv) > 0.02:
        problems.append(f"trivial phase {triv:.3f}")
    wall = time.perf_counter() - t0
    ok = not problems and wall < 15 * 60
    record(6, ok, "; ".join(parts) + f", {wall:.1f}s" if ok else "; ".join(problems))


# 7 ---------------------------------------------------------------------------

def test_criterion_7_deformation_invariance():
    t0 = time.perf_counter()
    spec = models.ModelSpec("chern-insulator", {"mass": 1.0}, extent=(24, 24))
    cov = models.ground_state(spec)
    cx, cy = models.default_center(spec)
    regs = models.disk_regions(cov, 6.0, (cx, cy))

    def jval(a, b, c):
        return gaussian.gaussian_modular_commutator(cov, a, b, c, warn=False)

    j0 = jval(regs["A"], regs["B"], regs["C"])
    pos = {m: p for m, p in zip(cov.modes, cov.positions)}
    # small regions next to the A|C boundary ray (straight down), far from B
    near_ray = [m for m in regs["C"] if pos[m][1] - cy < -3 and pos[m][0] - cx > -1.6]
    near_ray_a = [m for m in regs["A"] if pos[m][1] - cy < -3 and pos[m][0] - cx < 1.6]
    deformations = {
        "C->A": (regs["A"] + near_ray, regs["B"], [m for m in regs["C"] if m not in near_ray]),
        "A->C": ([m for m in regs["A"] if m not in near_ray_a], regs["B"], regs["C"] + near_ray_a),
    }
    devs = {k: abs(jval(*r) - j0) / abs(j0) for k, r in deformations.items()}
    used = set(regs["A"]) | set(regs["B"]) | set(regs["C"])
    d = [m for m in cov.modes if m not in used]
    j_comp = jval(regs["B"], regs["A"], d)
    comp_dev = abs(j_comp - j0) / abs(j0)
    wall = time.perf_counter() - t0
    ok = max(devs.values()) <= 0.05 and comp_dev <= 0.05 and len(near_ray) > 0
    detail = ", ".join(f"{k} rel {v:.1e}" for k, v in devs.items())
    record(7, ok, f"J={j0:.4f}, {detail}, J(B,A,D) rel {comp_dev:.1e}, {wall:.1f}s")


# 8 ---------------------------------------------------------------------------

def test_criterion_8_tee():
    t0 = time.perf_counter()
    spec = models.ModelSpec("trivial-insulator", extent=(24, 24))
    cov = models.ground_state(spec)
    regs = models.disk_regions(cov, 6.0, models.default_center(spec))
    triv = gaussian.gaussian_tee(cov, regs["A"], regs["B"], regs["C"])
    tspec = models.ModelSpec("toric-code")
    state = models.build(tspec)
    tregs = models.default_regions(tspec)
    toric = dense.tee_kitaev_preskill(state, tregs["A"], tregs["B"], tregs["C"])
    wall = time.perf_counter() - t0
    ok = abs(triv) <= 1e-3 and abs(toric + math.log(2)) <= 1e-6
    record(8, ok, f"trivial {triv:+.1e}, toric code {toric / math.log(2):+.9f} ln2, {wall:.1f}s")


# 9 ---------------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    from modcomm.cli import main
    t0 = time.perf_counter()
    runs = [["compute", "ccc", "--seed", "7", "--radius", "4"],
            ["verify", "markov", "--seed", "7", "--strict"],
            ["compute", "j", "--model", "random-pure", "--seed", "7"],
            ["current", "--symbolic", "--radius", "3", "--emit-svg"]]
    mismatched = []
    for i, argv in enumerate(runs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"run{i}-{rep}"
            assert main(argv + ["--out", str(out)]) == 0
            outs.append(out)
        for name in ("report.json", "current.json", "current.svg"):
            a, b = outs[0] / name, outs[1] / name
            if a.exists() and a.read_bytes() != b.read_bytes():
                mismatched.append(f"{argv[0]}:{name}")
    wall = time.perf_counter() - t0
    record(9, not mismatched, f"{len(runs)} commands run twice, "
           f"{'byte-identical' if not mismatched else 'differ: ' + ', '.join(mismatched)}, {wall:.1f}s")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
