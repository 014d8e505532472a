import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from gclab.control import (
    blahut_arimoto,
    check_consistency,
    first_visit_marginal,
    first_visit_time_law,
    goal_sensitivity,
    goal_sensitivity_all,
    klyubin_empowerment,
    objective_controllability,
    one_step_controllability,
    search_max_incontrol,
    sequence_channel,
    support_values,
)
from gclab.info import binary_entropy
from gclab.mdp import build_fork_env, build_river_env, build_star_env, deterministic_grid, random_mdp
from gclab.policy import (
    deterministic_branch,
    goal_independent_policy,
    goal_policy_from_branches,
    uniform_random_policy,
)
from gclab.values import ET, OW, Pe, optimal_policy, optimal_values, value_matrix


def test_river_sensitivity_values():
    # with goals uniform, C of the optimal policy is J* minus chance
    m = build_river_env(0.08, 0.2)
    pol = optimal_policy(m, ET(3))
    c = goal_sensitivity(m, ET(3), pol, "s1").c_value
    J = optimal_values(m, ET(3))[0].mean()
    assert c == pytest.approx(J - 0.2, abs=1e-15)
    assert objective_controllability(m, ET(3), "s1").value == pytest.approx(c, abs=1e-15)


def test_goal_independent_policy_has_zero_sensitivity():
    m = random_mdp(4, 2, 2, 3)
    pol = goal_independent_policy(m, uniform_random_policy(m, 3, domain=1, horizon=2).table[0])
    for f in (Pe(0.5), ET(2), OW(2, 0.7)):
        assert np.abs(goal_sensitivity_all(m, f, pol)).max() < 1e-15


@pytest.mark.parametrize("seed", range(8))
def test_ow_controllability_matches_enumeration(seed):
    m = random_mdp(3, 2, 2, seed)
    K, gam = 1 + seed % 3, (0.5, 1.0)[seed % 2]
    N = m.n_states
    scores = np.full((N, N), -np.inf)
    for ch in oracle.action_tables(m.n_actions, K):
        V = oracle.ow_values(m.P, ch, K, gam)
        scores = np.maximum(scores, V - V.mean(axis=1, keepdims=True))
    for s0 in range(N):
        res = objective_controllability(m, OW(K, gam), s0)
        assert res.exact
        assert res.value == pytest.approx(scores[s0].mean(), abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_et_controllability_is_optimum_minus_chance(seed):
    m = random_mdp(3, 2, 2, seed)
    K = 1 + seed % 3
    best = oracle.best_over_tables(m.P, m.n_actions, "et", K)
    for s0 in range(3):
        assert objective_controllability(m, ET(K), s0).value == pytest.approx(best[s0].mean() - 1 / 3, abs=1e-12)


def test_search_max_incontrol_reaches_controllability():
    m = random_mdp(4, 2, 2, 1)
    f = OW(2, 0.8)
    pol, c, exhaustive = search_max_incontrol(m, f, 0)
    assert exhaustive
    assert goal_sensitivity(m, f, pol, 0).c_value == pytest.approx(c, abs=1e-14)
    assert c == pytest.approx(objective_controllability(m, f, 0).value, abs=1e-14)


def test_one_step_count_formula():
    # star hub can stand still or step to any leaf: every state is reachable in one step
    m = build_star_env(3)
    assert one_step_controllability(m, 0) == pytest.approx(1 - 1 / 4, abs=1e-15)
    assert one_step_controllability(m, 1) == 0.0


@given(seed=st.integers(0, 5000))
def test_one_step_matches_et_controllability(seed):
    m = random_mdp(4, 3, 2, seed)
    for s in range(4):
        assert abs(one_step_controllability(m, s) - objective_controllability(m, ET(1), s).value) < 1e-12


def test_optimal_policy_is_consistent_everywhere():
    m = random_mdp(4, 2, 2, 6)
    for f in (Pe(0.6), ET(2), OW(2, 0.9)):
        assert check_consistency(m, f, optimal_policy(m, f)).passed


def test_inconsistent_policy_reports_violation():
    m = build_fork_env()
    # goal g1 takes a2 and goal g2 takes a1
    b = {a: deterministic_branch(m, [[a, 0, 0]]) for a in (0, 1)}
    pol = goal_policy_from_branches(m, [b[0], b[1], b[0]])
    rep = check_consistency(m, ET(1), pol, starts=[0])
    assert not rep.passed
    assert {(v.g, v.other) for v in rep.violations} >= {(1, 2), (2, 1)}


def test_binary_symmetric_channel_capacity():
    p = 0.11
    W = np.array([[1 - p, p], [p, 1 - p]])
    res = blahut_arimoto(W)
    assert res.value == pytest.approx(math.log(2) - binary_entropy(p), abs=1e-10)
    assert res.value <= res.upper + 1e-15 and res.upper - res.value < 1e-9


def test_fork_capacity_and_gap():
    m = build_fork_env()
    assert klyubin_empowerment(m, 0, 1, method="blahut-arimoto").value == pytest.approx(math.log(2), abs=1e-10)
    assert math.log(2) - binary_entropy(1 / 3) > 0.05


@pytest.mark.parametrize("n", [2, 3])
def test_deterministic_empowerment_counts_reachable_states(n):
    m = deterministic_grid(n)
    for K in (1, 2):
        for s in range(m.n_states):
            e = klyubin_empowerment(m, s, K).value
            c = objective_controllability(m, ET(K), s).value
            assert e == pytest.approx(math.log(1 + m.n_states * c), abs=1e-10)


def test_sequence_channel_rows():
    m = random_mdp(3, 2, 2, 0)
    W = sequence_channel(m, 0, 2)
    assert W.shape == (4, 3)
    assert np.allclose(W.sum(axis=1), 1.0)


def test_first_visit_laws():
    m = random_mdp(3, 2, 2, 2)
    b = uniform_random_policy(m, 2, horizon=3).branch(1)
    law = first_visit_time_law(m, b, 0, 1, 3)
    # P(T_g = t) for t = 1..K; the rest is the chance of no visit
    assert law.shape == (3,) and -1e-15 <= law.sum() <= 1 + 1e-15
    assert (law * 0.5 ** np.arange(3)).sum() == pytest.approx(value_matrix(m, OW(3, 0.5), b)[0, 1], abs=1e-14)
    marg = first_visit_marginal(m, b, 0, 1, 3, 0.5)
    assert set(marg) <= set(support_values(3, 0.5).tolist())
    mean = sum(v * p for v, p in marg.items())
    assert mean == pytest.approx(value_matrix(m, OW(3, 0.5), b)[0, 1], abs=1e-14)
