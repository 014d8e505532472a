import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.stats import entropy as scipy_entropy

import oracle
from gclab.info import (
    FirstVisitVector,
    JointDistribution,
    behavior_joint,
    binary_entropy,
    decoder_errors,
    entropy,
    goal_behavior_mi,
    info_measures,
    kl_divergence,
    mutual_information,
    ow_delta_closed_form,
    ow_mi_lower_bound,
    phi_down,
    phi_up,
    support_gap,
    total_variation,
)
from gclab.mdp import build_fork_env, random_mdp
from gclab.policy import (
    deterministic_branch,
    goal_independent_policy,
    goal_policy_from_branches,
    uniform_random_policy,
)
from gclab.values import SK, SGammaPlus

probs = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: np.asarray(v) / sum(v)
)


def test_known_values():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert kl_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(5), abs=1e-15)
    assert total_variation([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.4, abs=1e-15)
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    m = info_measures([0.5, 0.5], [0.9, 0.1])
    assert set(m) == {"H", "H_q", "KL", "TV"}


def test_joint_mi_matches_direct_sum():
    cond = np.array([[0.9, 0.1], [0.2, 0.8]])
    j = JointDistribution(("a", "b"), np.array([0.5, 0.5]), ("x", "y"), cond)
    assert mutual_information(j) == pytest.approx(oracle.mi_from_joint(0.5 * cond), abs=1e-15)
    assert np.allclose(j.marginal, [0.55, 0.45])


@given(p=probs)
def test_entropy_matches_scipy(p):
    assert abs(entropy(p) - scipy_entropy(p)) < 1e-12


def _pair(n):
    w = st.lists(st.floats(1e-6, 1.0), min_size=n, max_size=n).map(lambda v: np.asarray(v) / sum(v))
    return st.tuples(w, w)


@given(pq=st.integers(2, 6).flatmap(_pair))
def test_pinsker_and_gibbs(pq):
    p, q = pq
    kl = kl_divergence(p, q)
    assert kl >= -1e-15
    assert kl >= 2 * total_variation(p, q) ** 2 - 1e-12


# closed forms: phi_down(1/N) = 0, phi_down(1) = phi_up(1) = log N, phi_up(1/m) = log N - log m
@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_phi_endpoints(N):
    assert abs(phi_down(N, 1.0 / N)) < 1e-14
    assert phi_down(N, 1.0) == pytest.approx(math.log(N), abs=1e-15)
    assert phi_up(N, 1.0) == pytest.approx(math.log(N), abs=1e-15)
    for m in range(1, N + 1):
        assert phi_up(N, 1.0 / m) == pytest.approx(math.log(N) - math.log(m), abs=1e-13)


def test_phi_up_floor_plus_one_differs_from_ceiling():
    # with an integer 1/x the ceiling convention collapses to log N
    assert phi_up(4, 1 / 3) == pytest.approx(math.log(4 / 3), abs=1e-14)
    assert phi_up(4, 1 / 3, conventional_ceiling=True) == pytest.approx(math.log(4), abs=1e-14)


def test_phi_rejects_out_of_range():
    with pytest.raises(ValueError):
        phi_down(3, 1.5)
    with pytest.raises(ValueError):
        phi_up(3, 0.0)


@given(N=st.integers(2, 8), x=st.floats(0.0, 1.0))
def test_phi_down_below_phi_up(N, x):
    assume(x >= 1.0 / N)
    assert phi_down(N, x) <= phi_up(N, x) + 1e-12


@given(N=st.integers(2, 8), a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0))
def test_phi_down_increases_from_chance(N, a, b):
    lo, hi = sorted((a, b))
    assume(lo >= 1.0 / N)
    assert phi_down(N, lo) <= phi_down(N, hi) + 1e-12


def test_ow_lower_bound_and_support_gap():
    assert ow_mi_lower_bound(0.3) == pytest.approx(0.18, abs=1e-15)
    for K in (1, 2, 3, 5):
        for gam in (0.3, 0.5, 0.9):
            assert support_gap(K, gam) == pytest.approx(ow_delta_closed_form(K, gam), abs=1e-15)
        # at gamma = 1 every visit pays 1, so the only values are 0 and 1
        assert support_gap(K, 1.0) == 1.0
    assert support_gap(3, 0.5) == 0.25


def test_fork_mutual_information_values():
    # goal g1 -> a1, g2 -> a2, goal s -> a1: S_1 takes g1 w.p. 2/3
    m = build_fork_env()
    choose = [deterministic_branch(m, [[a, 0, 0]]) for a in (0, 0, 1)]
    pol = goal_policy_from_branches(m, choose)
    assert goal_behavior_mi(m, pol, 0, None, SK(1)) == pytest.approx(binary_entropy(1 / 3), abs=1e-15)


@given(seed=st.integers(0, 5000), K=st.integers(1, 3))
def test_terminal_mi_matches_oracle(seed, K):
    m = random_mdp(3, 2, 2, seed)
    rng = np.random.default_rng(seed)
    tables = rng.integers(2, size=(3, K, 3))
    pol = goal_policy_from_branches(m, [deterministic_branch(m, t) for t in tables])
    w = rng.dirichlet(np.ones(3))
    want = oracle.mi_from_joint(oracle.terminal_joint(m.P, tables, 0, K, w))
    assert abs(goal_behavior_mi(m, pol, 0, w, SK(K)) - want) < 1e-13


@given(seed=st.integers(0, 5000))
def test_goal_independent_policy_carries_no_information(seed):
    m = random_mdp(4, 2, 2, seed)
    b = uniform_random_policy(m, seed, domain=1, horizon=2).table[0]
    pol = goal_independent_policy(m, b)
    for spec in (SK(2), SGammaPlus(0.6), FirstVisitVector(2, 0.8)):
        assert abs(goal_behavior_mi(m, pol, 0, None, spec)) < 1e-14


@given(seed=st.integers(0, 5000))
def test_mi_is_bounded_by_goal_entropy(seed):
    m = random_mdp(4, 2, 3, seed)
    pol = uniform_random_policy(m, seed, horizon=2)
    mi = goal_behavior_mi(m, pol, 1, None, SK(2))
    assert -1e-14 <= mi <= math.log(4) + 1e-14


@given(seed=st.integers(0, 5000))
def test_bayes_decoder_never_worse(seed):
    m = random_mdp(3, 2, 2, seed)
    pol = uniform_random_policy(m, seed, horizon=1)
    naive, bayes = decoder_errors(behavior_joint(m, pol, 0, None, SK(1)))
    assert bayes <= naive + 1e-15


def test_identity_decoder_needs_state_outcomes():
    j = JointDistribution(("a",), np.array([1.0]), ("x",), np.array([[1.0]]))
    with pytest.raises(ValueError):
        decoder_errors(j)
