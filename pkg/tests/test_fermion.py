import numpy as np
import pytest

from modcomm import dense
from modcomm.dense import DensityOp, SiteLayout
from modcomm.errors import OddParity, TwirlTooLarge
from modcomm.fermion import (annihilator, fermionic_rdm, ftrace, majoranas, mode_permutation,
                             operator_cmi_combination, reduced_tilde, reorder_state)


def vacuum_pair():
    m = np.zeros((4, 4), complex)
    m[0, 0] = 1
    return DensityOp(m, SiteLayout.fermions(2))


def test_car_relations():
    n = 3
    a = [annihilator(n, j) for j in range(n)]
    for i in range(n):
        for j in range(n):
            anti = a[i] @ a[j].conj().T + a[j].conj().T @ a[i]
            assert np.allclose(anti, np.eye(2 ** n) * (i == j))
            assert np.allclose(a[i] @ a[j] + a[j] @ a[i], 0)


def test_majorana_algebra():
    g = majoranas(2)
    for i, x in enumerate(g):
        for j, y in enumerate(g):
            assert np.allclose(x @ y + y @ x, 2 * np.eye(4) * (i == j))


def test_worked_example():
    rho = vacuum_pair()
    c1, d1 = majoranas(2)[:2]
    tilde = reduced_tilde(rho, [0])
    assert np.abs(tilde.matrix - (np.eye(4) - 1j * c1 @ d1) / 4).max() <= 1e-14
    rdm = fermionic_rdm(rho, [0])
    assert np.abs(rdm.matrix - np.diag([1, 0])).max() <= 1e-14


def test_twirl_equals_blockwise(rng):
    rho = dense.random_density(SiteLayout.fermions(4), rng, even=True)
    for traced in ([1], [0, 2], [3, 1, 0]):
        t = ftrace(rho, traced, method="twirl").matrix
        b = ftrace(rho, traced, method="blockwise").matrix
        assert np.abs(t - b).max() < 1e-13


def test_ftrace_composes(rng):
    rho = dense.random_density(SiteLayout.fermions(4), rng, even=True)
    once = ftrace(rho, [0, 2]).matrix
    twice = ftrace(ftrace(rho, [0]), [2]).matrix
    assert np.abs(once - twice).max() < 1e-13


def test_odd_operator_rejected():
    c1 = majoranas(2)[0]
    with pytest.raises(OddParity):
        ftrace(DensityOp(c1 / 4 + np.eye(4) / 4, SiteLayout.fermions(2), validate=False), [1])


def test_twirl_cap(rng):
    rho = dense.random_density(SiteLayout.fermions(7), rng, even=True)
    with pytest.raises(TwirlTooLarge):
        ftrace(rho, list(range(7)), method="twirl")


def test_mode_permutation_conjugates_annihilators():
    n = 4
    order = (2, 0, 3, 1)
    perm, sign = mode_permutation(n, order)
    p = np.zeros((2 ** n, 2 ** n))
    p[perm, np.arange(2 ** n)] = sign
    for k, j in enumerate(order):
        assert np.allclose(p @ annihilator(n, j) @ p.T, annihilator(n, k))


def test_reorder_preserves_entropies(rng):
    rho = dense.random_density(SiteLayout.fermions(4), rng, even=True)
    moved = reorder_state(rho, [3, 1])
    for region in ([0], [1, 3], [0, 2, 3]):
        assert abs(dense.region_entropy(rho, region) - dense.region_entropy(moved, region)) < 1e-12


def test_rdm_of_noncontiguous_modes_matches_gaussian(rng):
    from modcomm.gaussian import random_covariance, region_entropy, to_density
    cov = random_covariance(4, rng)
    rho = to_density(cov)
    for region in ([0, 2], [1, 3], [3, 0]):
        assert abs(dense.region_entropy(rho, region) - region_entropy(cov, region)) < 1e-12


def test_tilde_entropy_bridge(rng):
    rho = dense.random_density(SiteLayout.fermions(3), rng, even=True)
    keep, k = [0, 2], 1
    tilde = reduced_tilde(rho, keep).matrix
    w = np.clip(np.linalg.eigvalsh(tilde), 1e-300, None)
    s_tilde = float(-(w * np.log(w)).sum())
    assert abs(s_tilde - dense.region_entropy(rho, keep) - k * np.log(2)) < 1e-12


def test_cmi_operator_normalizations_agree(rng):
    rho = dense.random_density(SiteLayout.fermions(4), rng, even=True)
    a, b, c = [0], [1, 2], [3]
    x = operator_cmi_combination(rho, a, b, c, "blockwise")
    y = operator_cmi_combination(rho, a, b, c, "tilde")
    assert np.abs(x.operator.matrix - y.operator.matrix).max() < 1e-10
    # <ln rho_AB + ln rho_BC - ln rho_B - ln rho_ABC> = -I(A:C|B)
    ev = np.trace(rho.matrix @ x.operator.matrix).real
    assert abs(ev + dense.cmi(rho, a, b, c)) < 1e-10


def test_fermionic_ssa(rng):
    for _ in range(10):
        rho = dense.random_density(SiteLayout.fermions(4), rng, rank=2, even=True)
        perm = [int(v) for v in rng.permutation(4)]
        assert dense.cmi(rho, perm[:1], perm[1:3], perm[3:]) > -1e-12
