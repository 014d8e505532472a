import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gclab.control import check_consistency
from gclab.info import binary_entropy, goal_behavior_mi
from gclab.mdp import deterministic_grid, random_mdp
from gclab.misl import (
    MislConfig,
    consistent_mapping,
    downstream_skill_distribution,
    mi_gap_bound,
    misl_gap,
    misl_objective,
    optimize_misl_tabular,
    verify_mi_identity,
)
from gclab.policy import GoalToSkillMap, compose_downstream, uniform_random_policy
from gclab.values import ET, Pe, SK, SGammaPlus


def test_gap_bound_closed_form():
    res = mi_gap_bound([0.75, 0.25], 2, 4)
    assert res.delta == pytest.approx(0.25)
    assert res.bound == pytest.approx(binary_entropy(0.25) + 0.25 * math.log(16 * 3), abs=1e-14)
    assert mi_gap_bound([0.5, 0.5], 2, 4).bound == 0.0
    # more skills than outcomes is outside the bound's range
    assert not mi_gap_bound([1 / 3] * 3, 3, 2).applicable


def test_downstream_skill_law():
    f = GoalToSkillMap.plain([0, 0, 0, 1], tuple("abcd"), ("z0", "z1"))
    assert np.allclose(downstream_skill_distribution(f).probs, [0.75, 0.25])


def test_equal_preimages_close_the_gap():
    m = random_mdp(4, 2, 2, 0)
    skills = uniform_random_policy(m, 0, domain=2, horizon=2)
    f = GoalToSkillMap.plain([0, 0, 1, 1], m.states, skills.conds)
    gap, bound = misl_gap(m, skills, f, 0, spec=SK(2))
    assert gap < 1e-12 and bound.delta == 0.0


@given(seed=st.integers(0, 5000), n_z=st.integers(1, 4))
def test_gap_within_bound(seed, n_z):
    m = random_mdp(4, 2, 2, seed)
    rng = np.random.default_rng(seed)
    skills = uniform_random_policy(m, seed, domain=n_z, horizon=2)
    f = GoalToSkillMap.plain(rng.integers(n_z, size=4), m.states, skills.conds)
    for spec in (SK(2), SGammaPlus(0.5)):
        gap, bound = misl_gap(m, skills, f, 0, spec=spec)
        assert gap <= bound.bound + 1e-10


@given(seed=st.integers(0, 5000))
def test_mi_identity_for_composed_policy(seed):
    m = random_mdp(3, 2, 2, seed)
    skills = uniform_random_policy(m, seed, domain=3, horizon=1)
    f = GoalToSkillMap.plain(np.random.default_rng(seed).permutation(3), m.states, skills.conds)
    lhs, rhs, diff = verify_mi_identity(m, skills, f, 0, spec=SK(1))
    assert diff < 1e-12


@given(seed=st.integers(0, 5000))
def test_consistent_mapping_gives_consistent_policy(seed):
    m = random_mdp(4, 2, 2, seed)
    skills = uniform_random_policy(m, seed, domain=3, horizon=2)
    for f in (ET(2), Pe(0.5)):
        fmap = consistent_mapping(m, f, skills)
        for s0 in range(4):
            down = compose_downstream(skills, fmap, s0)
            assert check_consistency(m, f, down, starts=[s0]).passed


def test_exhaustive_beats_ascent_and_matches_objective():
    m = random_mdp(4, 2, 2, 0)
    skills, best = optimize_misl_tabular(m, SK(2), 2, 0)
    assert misl_objective(m, skills, 0, spec=SK(2)) == pytest.approx(best, abs=1e-14)
    _, climbed = optimize_misl_tabular(m, SK(2), 2, 0, MislConfig("ascent", 3, 50))
    assert climbed <= best + 1e-14


def test_grid_skills_reach_log_of_skill_count():
    # on a 2x2 grid four skills can each park on a distinct cell after two moves
    m = deterministic_grid(2)
    _, best = optimize_misl_tabular(m, SK(2), 4, 0)
    assert best == pytest.approx(math.log(4), abs=1e-14)


def test_downstream_information_from_pretrained_skills():
    m = deterministic_grid(2)
    skills, _ = optimize_misl_tabular(m, SK(2), 4, 0)
    down = compose_downstream(skills, consistent_mapping(m, ET(2), skills), 0)
    assert goal_behavior_mi(m, down, 0, None, SK(2)) == pytest.approx(math.log(4), abs=1e-14)
