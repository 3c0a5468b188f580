import numpy as np
import pytest

from modcomm import dense
from modcomm.errors import ImplicationViolated
from modcomm.markov import (gt_lieb_check, markov_suite, petz_residual,
                            random_gaussian_markov_state, random_markov_state)
from modcomm.models import ghz_state


@pytest.mark.parametrize("statistics", ["qudit", "fermionic"])
def test_constructed_markov_states(rng, statistics):
    for sizes in ((1, 1, 1, 1), (2, 1, 1, 1), (1, 2, 1, 2)):
        state, (a, b, c) = random_markov_state(rng, sizes, statistics)
        rep = markov_suite(state, a, b, c)
        assert rep.cmi_value <= 1e-10
        assert rep.petz_residual <= 1e-8
        assert abs(rep.j_value) <= 1e-8
        assert abs(rep.gt_trace - 1) <= 1e-9
        assert rep.rel_ent_identity_residual <= 1e-9
        assert rep.statistics == statistics


def test_gaussian_markov_state(rng):
    cov, (a, b, c) = random_gaussian_markov_state(rng, (1, 1, 1, 1))
    rep = markov_suite(cov, a, b, c)
    assert rep.cmi_value <= 1e-10 and abs(rep.j_value) <= 1e-8


def test_generic_state_not_markov(rng):
    rho = dense.random_density(dense.SiteLayout.qubits(3), rng)
    rep = markov_suite(rho, [0], [1], [2])
    assert rep.cmi_value > 1e-4
    assert rep.petz_residual > 1e-4
    # the Lieb trace never exceeds one
    assert rep.gt_trace <= 1 + 1e-12
    assert rep.rel_ent_identity_residual < 1e-10


def test_ghz_rank_deficient():
    rep = markov_suite(ghz_state(3), [0], [1], [2], strict=True)
    assert rep.rank_deficient
    assert rep.cmi_value == pytest.approx(np.log(2))
    assert rep.petz_residual > 0.1
    assert rep.j_value == pytest.approx(0.0, abs=1e-12)


def test_strict_raises_on_violation(monkeypatch, rng):
    import modcomm.markov as mk
    state, (a, b, c) = random_markov_state(rng)
    monkeypatch.setattr(mk.dense, "modular_commutator", lambda *args, **kw: 1.0)
    with pytest.raises(ImplicationViolated):
        mk.markov_suite(state, a, b, c, strict=True)
    assert mk.markov_suite(state, a, b, c, strict=False).j_value == 1.0


def test_report_json_keys(rng):
    state, regs = random_markov_state(rng)
    d = markov_suite(state, *regs).to_dict()
    assert {"cmiValue", "petzResidual", "gtTrace", "relEntIdentityResidual", "jValue",
            "rankDeficient"} <= set(d)


def test_petz_norms(rng):
    rho = dense.random_density(dense.SiteLayout.qubits(3), rng)
    op = petz_residual(rho, [0], [1], [2])
    tr = petz_residual(rho, [0], [1], [2], norm="trace")
    assert 0 < op <= tr
    with pytest.raises(ValueError):
        petz_residual(rho, [0], [1], [2], norm="frobenius")


def test_shuffled_regions_are_respected(rng):
    state, (a, b, c) = random_markov_state(rng, (1, 1, 1, 1), "fermionic", shuffle=True)
    assert gt_lieb_check(state, a, b, c).gt_trace == pytest.approx(1.0, abs=1e-9)
