import dataclasses
import math

import numpy as np
import pytest

from mixchain.building_blocks import SBlockParams, build_s_block
from mixchain.chain_core import FiniteChain, pair_joint
from mixchain.dependence import beta_from_joint, entropy, info_from_joint, rho_index_sets, rho_max_corr
from mixchain.errors import CalibrationFailed, ConditionFailed, InvalidParams, NoAnchorLag
from mixchain.product_chain import (
    CONDITIONS,
    build_product_spec,
    calibrate_epsilon,
    certify_component,
    info_truncation_tail,
    product_beta_bound,
    product_coeff_info,
    product_coeff_rho,
    product_entropy,
    product_interlaced_lower,
    verify_theorem,
)

from oracles import product_chain, random_chain


@pytest.fixture(scope="module")
def spec():
    return build_product_spec(0.5, 7)


def _pair(seed, k1=3, k2=3):
    rng = np.random.default_rng(seed)
    a = FiniteChain(*random_chain(rng, k1))
    b = FiniteChain(*random_chain(rng, k2))
    return a, b, FiniteChain(*product_chain(a.pi, a.p, b.pi, b.p))


@pytest.mark.parametrize("seed", range(10))
def test_product_rules_against_explicit_product(seed):
    a, b, ab = _pair(seed)
    for n in (1, 2, 4):
        assert product_coeff_rho([a, b], n) == pytest.approx(rho_max_corr(pair_joint(ab, n)), abs=1e-9)
        assert product_coeff_info([a, b], n) == pytest.approx(info_from_joint(pair_joint(ab, n)), abs=1e-10)
        assert product_beta_bound([a, b], n) >= beta_from_joint(pair_joint(ab, n)) - 1e-12
    assert product_entropy([a, b]) == pytest.approx(entropy(ab.pi), abs=1e-12)


def test_product_interlaced_against_explicit_product():
    a, b, ab = _pair(42, 2, 3)
    for n in (1, 2):
        assert product_interlaced_lower([a, b], n) == pytest.approx(rho_index_sets(ab, {0}, {-n, n}), abs=1e-9)


def test_single_component_degenerates():
    c = build_s_block(3, 0.01)
    assert product_coeff_rho(c, 2) == rho_max_corr(pair_joint(c, 2))
    assert product_coeff_info([c], 2) == info_from_joint(pair_joint(c, 2))


def test_truncation_tail_closed_form():
    r, n, n_max = 0.5, 2, 7
    direct = math.fsum((2.0**-k * r) ** (2 * n) for k in range(n_max + 1, 400))
    assert info_truncation_tail(r, n, n_max) == pytest.approx(direct, rel=1e-14)


def test_calibrated_n3_certificate():
    eps, cert = calibrate_epsilon(3, 0.5)
    assert cert.admissible and cert.failed() == []
    assert cert.eps == eps and cert.h_star <= cert.h_max == 30
    assert len(cert.info_finite) == 2 * cert.h_star
    assert cert.recheck()
    # the previous grid point fails
    coarse = SBlockParams(3, 2 * eps)
    assert not certify_component(build_s_block(coarse), coarse, 0.5).admissible


def test_coarse_eps_fails_rho1():
    p = SBlockParams(3, 1 / 3)
    cert = certify_component(build_s_block(p), p, 0.5)
    assert not cert.rho1_ok and not cert.admissible
    with pytest.raises((ConditionFailed, NoAnchorLag)):
        cert.require()
    with pytest.raises((ConditionFailed, NoAnchorLag)):
        certify_component(build_s_block(p), p, 0.5, strict=True)


def test_require_reports_missing_anchor_then_condition():
    p = SBlockParams(3, 0.01)
    cert = certify_component(build_s_block(p), p, 0.5)
    assert cert.h_star is None and not cert.info_tail_ok
    with pytest.raises(NoAnchorLag):
        cert.require()
    _, good = calibrate_epsilon(3, 0.5)
    bad = dataclasses.replace(good, interlaced_ok=False)
    with pytest.raises(ConditionFailed) as err:
        bad.require()
    assert err.value.name == "interlaced"
    assert not bad.recheck()


def test_r_domain():
    p = SBlockParams(3, 0.01)
    for r in (0.0, 1.0, 1.5):
        with pytest.raises(InvalidParams):
            certify_component(build_s_block(p), p, r)
    with pytest.raises(InvalidParams):
        calibrate_epsilon(9, 0.5)


def test_weaker_r_calibrates_no_smaller():
    assert calibrate_epsilon(3, 0.99)[0] >= calibrate_epsilon(3, 0.5)[0]


def test_n8_boundary():
    eps, cert = calibrate_epsilon(8, 0.5)
    assert cert.admissible
    with pytest.raises(CalibrationFailed) as err:
        calibrate_epsilon(8, 0.5, tail="psi")
    assert err.value.binding


def test_psi_route_certifies_n3():
    eps, cert = calibrate_epsilon(3, 0.5, tail="psi")
    assert cert.tail_method == "psi" and cert.admissible
    assert 0 < cert.tail_value <= 0.5 * cert.q ** (4 * cert.h_star)


@pytest.mark.parametrize("n", range(3, 8))
def test_certificate_soundness_beyond_horizon(spec, n):
    comp = spec.components[n - 3]
    cert = comp.certificate
    q = cert.q
    for lag in range(1, 4 * cert.h_star + 1):
        assert info_from_joint(pair_joint(comp.chain, lag)) <= q ** (2 * lag)


def test_spec_invariants(spec):
    assert spec.n_max == 7 and [c.params.n_cap for c in spec.components] == list(range(3, 8))
    assert product_entropy(spec) <= 0.5
    assert product_coeff_rho(spec, 1) <= 0.5
    vals = [product_interlaced_lower(spec.truncated(k), 1) for k in range(3, 8)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[0] >= 2 / 3 and vals[-1] >= 6 / 7


def test_verify_theorem_report():
    rep = verify_theorem(0.5, 7, 10)
    assert rep.passed, rep.checks
    assert rep.interlaced_lower[0] >= 6 / 7
    d = rep.to_dict()
    assert len(d["certificates"]) == 5 and d["passed"]
    header, rows = rep.csv_table()
    assert header == ["n", "rho", "rho_bound", "info", "info_bound", "beta_bound", "interlaced_lower"]
    assert len(rows) == 10
    for n, rho in zip(rep.n_range, rep.rho_values):
        assert rho <= rep.rho_values[0] ** n + 1e-10
    for b, i in zip(rep.beta_bounds, rep.info_values):
        assert b * b <= i * (1 + 4.5e-16)


def test_verify_theorem_small_and_loose():
    rep = verify_theorem(0.5, 3, 3)
    assert rep.passed and rep.interlaced_lower[0] >= 2 / 3
    assert verify_theorem(0.95, 5, 5).passed
