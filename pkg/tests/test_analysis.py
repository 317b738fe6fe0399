import math

import numpy as np
import pytest

from mixchain.analysis import (
    fit_exponent,
    inequality_battery,
    pair_frequency_check,
    plugin_coefficient_check,
    spectral_rho_check,
    sweep,
)
from mixchain.building_blocks import build_s_block, dyadic_grid
from mixchain.chain_core import FiniteChain, pair_joint
from mixchain.dependence import beta_from_joint, info_from_joint, psi_from_joint, rho_max_corr
from mixchain.errors import InvalidParams, NonPositiveValue, NotReversible

from oracles import random_chain


def test_fit_exponent_synthetic():
    pts = [(e, 3.0 * e**2) for e in dyadic_grid()]
    assert fit_exponent(pts) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(NonPositiveValue):
        fit_exponent([(e, 0.0) for e in dyadic_grid()])
    with pytest.raises(ValueError):
        fit_exponent(pts[:3])


def test_fit_uses_finest_window():
    # curvature only at coarse eps
    pts = [(e, e**3 * (1 + 1e3 * e**2)) for e in dyadic_grid()]
    assert fit_exponent(pts) == pytest.approx(3.0, rel=1e-3)


def test_marginal_and_mstep_exponents_n4():
    assert sweep(4, "marginal_m", m=4).fitted_exponent == pytest.approx(7, rel=0.05)
    assert sweep(4, "mstep_ij", i=0, j=2).fitted_exponent == pytest.approx(4, rel=0.05)


def test_sweep_limits():
    ent = sweep(3, "entropy")
    assert ent.monotone and ent.direction == "decreasing" and ent.terminal_value < 1e-3 and ent.passed
    inter = sweep(3, "interlaced_m", m=1)
    assert inter.direction == "increasing" and inter.terminal_value >= 0.9
    assert sweep(3, "rho1").terminal_value < 0.05
    lam = sweep(4, "lambda1")
    assert lam.passed
    d = ent.to_dict()
    assert list(d) == ["quantity", "exponent", "monotone", "terminal", "pass"]
    header, rows = ent.csv_table()
    assert header == ["eps", "value"] and len(rows) == 14


def test_sweep_rejects_bad_input():
    with pytest.raises(InvalidParams):
        sweep(3, "nonsense")
    with pytest.raises(InvalidParams):
        sweep(3, "entropy", grid=[0.01, 0.1])
    with pytest.raises(InvalidParams):
        sweep(11, "lambda1")


def test_lambda_sweep_below_rho():
    lam = sweep(3, "lambda1")
    rho = sweep(3, "rho1")
    for (_, a), (_, b) in zip(lam.grid, rho.grid):
        assert a <= b + 1e-12


def test_inequality_battery_examples():
    rep = inequality_battery(np.array([[0.4, 0.1], [0.1, 0.4]]))
    assert rep.passed
    assert rep.values["beta"] ** 2 == pytest.approx(0.09)
    assert rep.values["info"] == pytest.approx(0.192745, abs=1e-6)
    assert rep.values["psi_info_bound"] == pytest.approx(1.6 * math.log(1.6))
    ind = inequality_battery(np.outer([0.3, 0.7], [0.6, 0.4]))
    assert ind.slacks["info<=h_row"] == pytest.approx(ind.values["h_row"], abs=1e-15)


def test_battery_on_s_blocks():
    for n in (3, 5, 8):
        for eps in dyadic_grid()[::3]:
            c = build_s_block(n, eps)
            for lag in (1, 2, 7):
                assert inequality_battery(pair_joint(c, lag)).passed


def test_coefficients_nonincreasing_in_lag():
    rng = np.random.default_rng(8)
    chains = [build_s_block(3, 0.05), build_s_block(5, 1e-3)] + [FiniteChain(*random_chain(rng, 4)) for _ in range(5)]
    for c in chains:
        for f in (psi_from_joint, rho_max_corr, beta_from_joint, info_from_joint):
            vals = [f(pair_joint(c, n)) for n in range(1, 12)]
            assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(vals, vals[1:]))


def test_spectral_identity_examples():
    a = 0.2
    c = FiniteChain(np.array([0.5, 0.5]), np.array([[1 - a, a], [a, 1 - a]]))
    rep = spectral_rho_check(c, 8)
    assert rep.passed and rep.lambda2 == pytest.approx(abs(1 - 2 * a))
    for n, v in enumerate(rep.rho_values, start=1):
        assert v == pytest.approx(abs(1 - 2 * a) ** n, rel=1e-12)
    assert spectral_rho_check(build_s_block(3, 0.1), 10).passed
    ident = FiniteChain(np.array([0.5, 0.5]), np.eye(2))
    rep = spectral_rho_check(ident, 5)
    assert rep.passed and rep.rho_values == (1.0,) * 5
    nonrev = FiniteChain.from_transition(np.array([[0.1, 0.6, 0.3], [0.3, 0.1, 0.6], [0.6, 0.3, 0.1]]))
    with pytest.raises(NotReversible):
        spectral_rho_check(nonrev, 3)


def test_pair_frequency_small_run():
    rep = pair_frequency_check(build_s_block(3, 0.1), n_steps=200_000, seed=1, min_expected=50)
    assert rep.cells and all(s > 0 for s in rep.std_errors)
    assert rep.passed


def test_plugin_coefficients_converge():
    rng = np.random.default_rng(12)
    for _ in range(3):
        pi, p = random_chain(rng, 3)
        c = FiniteChain(pi, p)
        assert c.pi.min() >= 0.05
        rep = plugin_coefficient_check(c, n_steps=10**6, seed=int(rng.integers(2**31)))
        assert rep.passed, rep.to_dict()
