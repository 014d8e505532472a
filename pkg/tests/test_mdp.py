import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from gclab.mdp import (
    FiniteMdp,
    GoalDistribution,
    MdpParseError,
    MdpValidationError,
    build_fork_env,
    build_river_env,
    build_star_env,
    deterministic_grid,
    dumps_mdp,
    env_predicates,
    goal_weights,
    header_comments,
    loads_mdp,
    random_mdp,
    validate,
    with_waiting_actions,
)


def test_river_layout():
    m = build_river_env(0.08, 0.2)
    assert m.states == ("s1", "s2", "s3", "g", "T")
    s1 = m.state_index("s1")
    jump = m.action_index(s1, "a_j")
    assert m.P[s1, jump, m.state_index("g")] == 0.08
    assert m.P[s1, jump, m.state_index("T")] == pytest.approx(0.92, abs=1e-15)
    assert validate(m).ok


def test_river_text_round_trip_is_byte_identical():
    text = dumps_mdp(build_river_env(0.08, 0.2))
    assert dumps_mdp(loads_mdp(text)) == text


def test_shipped_river_file_matches_builder():
    from importlib.resources import files

    text = files("gclab").joinpath("data/river.mdp").read_text()
    assert text == dumps_mdp(build_river_env(0.08, 0.2))


def test_missing_header_reports_line_one():
    with pytest.raises(MdpParseError) as e:
        loads_mdp("states: a\nactions a: x\nt a x a 1.0\n")
    assert (e.value.line, e.value.column) == (1, 1)


def test_short_row_names_state_action():
    with pytest.raises(MdpValidationError, match=r"\(a,x\)"):
        loads_mdp("mdp v1\nstates: a\nactions a: x\nt a x a 0.9\n")


def test_unknown_state_position():
    text = "mdp v1\nstates: a b\nactions a: x\nactions b: y\nt a x c 1.0\nt b y b 1\n"
    with pytest.raises(MdpParseError) as e:
        loads_mdp(text)
    assert (e.value.line, e.value.column, e.value.token) == (5, 7, "c")


def test_duplicate_transition_rejected():
    with pytest.raises(MdpParseError, match="duplicate"):
        loads_mdp("mdp v1\nstates: a\nactions a: x\nt a x a 1.0\nt a x a 1.0\n")


def test_negative_probability_flagged():
    res = validate(FiniteMdp(["a"], [["x"]], [np.array([[-1.0]])]))
    assert not res.ok
    assert any(v.kind.startswith("negative") for v in res.violations)


def test_predicates():
    assert env_predicates(deterministic_grid(2)) == {"deterministic": True, "has_waiting_actions": True}
    assert not env_predicates(build_river_env(0.08, 0.2))["deterministic"]
    assert env_predicates(with_waiting_actions(random_mdp(3, 2, 2, 0)))["has_waiting_actions"]


def test_builders_are_valid():
    for m in (deterministic_grid(3), build_star_env(4), build_fork_env(), random_mdp(5, 3, 2, 7)):
        assert validate(m).ok


def test_grid_moves_stay_inside():
    m = deterministic_grid(3)
    corner = m.state_index("r0c0")
    assert m.P[corner, m.action_index(corner, "up"), corner] == 1.0
    assert m.P[corner, m.action_index(corner, "right"), m.state_index("r0c1")] == 1.0


def test_header_comments_read_back():
    text = dumps_mdp(build_fork_env(), ["alpha 1", "beta"])
    assert header_comments(text) == ["alpha 1", "beta"]
    assert dumps_mdp(loads_mdp(text)) == dumps_mdp(build_fork_env())


def test_goal_weights():
    assert np.allclose(goal_weights(None, 4), 0.25)
    with pytest.raises(ValueError):
        goal_weights([0.5, 0.5], 3)
    with pytest.raises(ValueError):
        GoalDistribution([0.5, 0.6])


def test_swap_fixture_parses():
    m = loads_mdp((FIXTURES / "swap.mdp").read_text())
    assert m.states == ("s0", "x", "y")


@given(n=st.integers(1, 6), a=st.integers(1, 3), b=st.integers(1, 6), seed=st.integers(0, 10_000))
def test_random_mdp_round_trips_and_rows_sum_to_one(n, a, b, seed):
    b = min(b, n)
    m = random_mdp(n, a, b, seed)
    assert np.allclose(m.P.sum(axis=2), 1.0, atol=1e-12)
    assert (np.count_nonzero(m.P, axis=2) == b).all()
    text = dumps_mdp(m)
    again = loads_mdp(text)
    assert np.array_equal(again.P, m.P)
    assert dumps_mdp(again) == text


@given(seed=st.integers(0, 10_000))
def test_random_mdp_is_seed_deterministic(seed):
    assert np.array_equal(random_mdp(4, 2, 3, seed).P, random_mdp(4, 2, 3, seed).P)
