import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixchain.building_blocks import build_s_block
from mixchain.chain_core import (
    FiniteChain,
    JointPMF2,
    as_prob_vector,
    as_transition_matrix,
    centered_step,
    is_irreducible,
    is_reversible,
    joint_lags,
    m_step,
    pair_joint,
    sample_path,
    stationary_distribution,
    support_period,
)
from mixchain.errors import InvalidChain, NotIrreducible, Periodic, TensorTooLarge

from oracles import pair_law, random_chain

TWO = np.array([[0.9, 0.1], [0.3, 0.7]])


def test_stationary_two_state():
    np.testing.assert_allclose(stationary_distribution(TWO), [0.75, 0.25], atol=1e-15)


def test_stationary_errors():
    with pytest.raises(NotIrreducible):
        stationary_distribution(np.eye(2))
    with pytest.raises(Periodic):
        stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_structure_helpers():
    assert is_irreducible(TWO)
    assert not is_irreducible(np.eye(3))
    cyc = np.roll(np.eye(3), 1, axis=1)
    assert support_period(cyc) == 3
    assert support_period(TWO) == 1


def test_validators_reject_bad_input():
    with pytest.raises(InvalidChain):
        as_prob_vector([0.5, 0.6])
    with pytest.raises(InvalidChain):
        as_prob_vector([1.5, -0.5])
    with pytest.raises(InvalidChain):
        as_transition_matrix([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(InvalidChain):
        FiniteChain(np.array([0.5, 0.5]), TWO)


def test_chain_is_read_only():
    c = FiniteChain.from_transition(TWO)
    with pytest.raises(ValueError):
        c.p[0, 0] = 1.0


def test_m_step_matches_repeated_product():
    p = np.linalg.matrix_power(TWO, 7)
    np.testing.assert_allclose(m_step(TWO, 7), p, rtol=1e-14)
    np.testing.assert_array_equal(m_step(TWO, 0), np.eye(2))


def test_reversibility_detected():
    rng = np.random.default_rng(3)
    pi, p = random_chain(rng, 4, reversible=True)
    assert is_reversible(FiniteChain(pi, p))
    assert not is_reversible(FiniteChain.from_transition(np.array([[0.1, 0.6, 0.3], [0.3, 0.1, 0.6], [0.6, 0.3, 0.1]])))


def test_pair_joint_and_deviation():
    rng = np.random.default_rng(5)
    pi, p = random_chain(rng, 4)
    c = FiniteChain(pi, p)
    for lag in (1, 2, 5):
        j = pair_joint(c, lag)
        np.testing.assert_allclose(j.q, pair_law(pi, p, lag), atol=1e-15)
        s = np.sqrt(np.outer(pi, pi))
        np.testing.assert_allclose(j.normalized_deviation(), (j.q - np.outer(pi, pi)) / s, atol=1e-13)


def test_centered_step_is_power():
    c = build_s_block(4, 0.05)
    b1 = centered_step(c, 1)
    np.testing.assert_allclose(centered_step(c, 3), b1 @ b1 @ b1, atol=1e-15)


def test_joint_pmf_validation():
    with pytest.raises(InvalidChain):
        JointPMF2(np.array([[0.5, 0.5]]), np.array([1.0]), np.array([0.4, 0.6]))
    j = JointPMF2.from_matrix([[0.2, 0.0], [0.3, 0.5]])
    np.testing.assert_allclose(j.transpose().q, j.q.T)
    assert JointPMF2.from_matrix([[0.5, 0.0], [0.5, 0.0]]).drop_zero_marginals().shape == (2, 1)


def test_joint_lags_marginals_and_bipartite():
    c = build_s_block(3, 0.1)
    t = joint_lags(c, (-1, 0, 1))
    assert t.mass.shape == (4, 4, 4)
    np.testing.assert_allclose(t.mass.sum(), 1.0, atol=1e-15)
    for lag in (-1, 0, 1):
        np.testing.assert_allclose(t.marginal(lag), c.pi, atol=1e-15)
    np.testing.assert_allclose(t.bipartite({0}, {1}).q, pair_joint(c, 1).q, atol=1e-16)
    with pytest.raises(TensorTooLarge):
        joint_lags(c, range(20), max_cells=10**6)


def test_lag_one_pair_reproduces_block_joint():
    from mixchain.building_blocks import s_block_joint

    c = build_s_block(5, 0.01)
    np.testing.assert_allclose(joint_lags(c, (0, 1)).mass, s_block_joint(5, 0.01).q, rtol=1e-15, atol=0)


def test_sample_path_is_reproducible():
    c = build_s_block(3, 0.1)
    a = sample_path(c, 1000, seed=7).states
    b = sample_path(c, 1000, seed=7).states
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 3
    # transitions only along the support of p
    assert np.all(c.p[a[:-1], a[1:]] > 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_stationary_property(k, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(k), size=k) + 0.01
    p /= p.sum(axis=1, keepdims=True)
    pi = stationary_distribution(p)
    assert np.max(np.abs(pi @ p - pi)) <= 1e-13
    assert abs(pi.sum() - 1) <= 1e-14
