"""Skill-behavior MI, downstream skill laws, the MI gap bound and a tabular optimizer."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._config import CapExceeded, enumeration_cap
from .info import (
    DiscreteDistribution,
    FirstVisitVector,
    behavior_joint,
    binary_entropy,
    mutual_information,
)
from .mdp import FiniteMdp, goal_weights
from .policy import (
    GoalConditionedPolicy,
    GoalToSkillMap,
    compose_downstream,
    deterministic_branch,
    enumerate_reachable_choices,
)
from .values import SGammaPlus, SK, cross_values

ROUND_OFF = 1e-14


@dataclass(frozen=True, eq=False)
class SkillPrior:
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("skill prior must be a probability vector")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n_z: int) -> "SkillPrior":
        return cls(np.full(n_z, 1.0 / n_z))


@dataclass(frozen=True)
class GapBoundResult:
    delta: float
    bound: float
    applicable: bool


def _prior(prior, n):
    if prior is None:
        return np.full(n, 1.0 / n)
    return prior.weights if isinstance(prior, SkillPrior) else np.asarray(prior, float)


def misl_objective(mdp: FiniteMdp, skill_policy: GoalConditionedPolicy, s0, prior=None, spec=None, cap=None):
    """I(Z; S') from s0 with Z drawn from the skill prior (uniform by default)."""
    w = _prior(prior, skill_policy.n_conds)
    return mutual_information(behavior_joint(mdp, skill_policy, s0, w, spec, cap))


def downstream_skill_distribution(f: GoalToSkillMap, p_goal=None, s0=None):
    """Law of f(G): p_f(z) = sum of p_goal over the goals mapped to z.

    For a state-dependent map without a start state, returns one law per start.
    """
    w = goal_weights(p_goal, len(f.goals))
    if f.mode == "state-dependent" and s0 is None:
        return [downstream_skill_distribution(f, w, s) for s in range(f.table.shape[0])]
    idx = f.at(s0)
    p = np.array([math.fsum(w[idx == z]) for z in range(f.n_skills)])
    return DiscreteDistribution(f.skills, p)


def mi_gap_bound(p_f, n_z: int, n_sprime: int) -> GapBoundResult:
    """Bound on |I(Z; S') - I(G; S')| from how far p_f is from uniform.

    delta = TV(p_f, Unif), bound = h(delta) + delta log(N'^2 (N' - 1)).
    """
    if n_z < 1 or n_sprime < 2:
        raise ValueError("need n_z >= 1 and n_sprime >= 2")
    p = p_f.probs if isinstance(p_f, DiscreteDistribution) else np.asarray(p_f, float)
    if len(p) != n_z:
        raise ValueError("p_f must have one entry per skill")
    delta = 0.5 * math.fsum(abs(x - 1.0 / n_z) for x in p)
    if delta <= ROUND_OFF:
        delta = 0.0
    bound = binary_entropy(min(delta, 1.0)) + delta * math.log(n_sprime**2 * (n_sprime - 1))
    return GapBoundResult(delta, bound, n_z <= n_sprime)


def consistent_mapping(mdp: FiniteMdp, formulation, skill_policy: GoalConditionedPolicy, tol=1e-13):
    """State-dependent map sending (s0, g) to the skill that reaches g best from s0."""
    X = cross_values(mdp, formulation, skill_policy)  # (s0, g, z)
    best = X.max(axis=2, keepdims=True)
    table = np.argmax(X >= best - tol, axis=2)
    return GoalToSkillMap(table, mdp.states, skill_policy.conds)


def verify_mi_identity(mdp: FiniteMdp, skill_policy, f: GoalToSkillMap, s0, p_goal=None, spec=None, cap=None):
    """(I(G; S') of the composed policy, I(Z; S') with Z ~ p_f, |difference|)."""
    s0i = mdp.state_index(s0)
    w = goal_weights(p_goal, mdp.n_states)
    composed = compose_downstream(skill_policy, f, s0i)
    lhs = mutual_information(behavior_joint(mdp, composed, s0i, w, spec, cap))
    pf = downstream_skill_distribution(f, w, s0i if f.mode != "plain" else None)
    zidx = [skill_policy.cond_index(z) for z in f.skills]
    sub = GoalConditionedPolicy(skill_policy.table[zidx], f.skills, "skill")
    rhs = mutual_information(behavior_joint(mdp, sub, s0i, pf.probs, spec, cap))
    return lhs, rhs, abs(lhs - rhs)


def misl_gap(mdp, skill_policy, f: GoalToSkillMap, s0, p_goal=None, spec=None, n_sprime=None, cap=None):
    """(|J_MISL - I(G; S')|, GapBoundResult) with J_MISL under a uniform skill prior."""
    s0i = mdp.state_index(s0)
    w = goal_weights(p_goal, mdp.n_states)
    zidx = [skill_policy.cond_index(z) for z in f.skills]
    sub = GoalConditionedPolicy(skill_policy.table[zidx], f.skills, "skill")
    j_misl = misl_objective(mdp, sub, s0i, None, spec, cap)
    composed = compose_downstream(skill_policy, f, s0i)
    i_goal = mutual_information(behavior_joint(mdp, composed, s0i, w, spec, cap))
    pf = downstream_skill_distribution(f, w, s0i if f.mode != "plain" else None)
    nsp = mdp.n_states if n_sprime is None else n_sprime
    return abs(j_misl - i_goal), mi_gap_bound(pf, f.n_skills, nsp)


# --- tabular optimizer ------------------------------------------------------


@dataclass(frozen=True)
class MislConfig:
    mode: str = "exhaustive"
    seed: int = 0
    iterations: int = 100
    cap: int | None = None


def _choice_shape(spec):
    return 1 if isinstance(spec, SGammaPlus) else spec.K


def _skill_policy(mdp, choice_list):
    branches = [deterministic_branch(mdp, c) for c in choice_list]
    return GoalConditionedPolicy(np.stack(branches), [f"z{i}" for i in range(len(branches))], "skill")


def _stationary_reachable_choices(mdp, s0, cap):
    support = mdp.P.sum(axis=1) > 0
    reach = np.zeros(mdp.n_states, bool)
    reach[s0] = True
    while True:
        nxt = reach | support[reach].any(axis=0)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    states = np.flatnonzero(reach)
    count = int(np.prod([mdp.n_actions[s] for s in states]))
    if count > cap:
        raise CapExceeded(count, cap, "policy enumeration")
    combos = np.array(list(itertools.product(*[range(int(mdp.n_actions[s])) for s in states])), int)
    out = np.zeros((len(combos), 1, mdp.n_states), int)
    out[:, 0, states] = combos
    return out


def optimize_misl_tabular(mdp: FiniteMdp, spec, n_z: int, s0, config: MislConfig | None = None):
    """Maximize I(Z; S') over deterministic skill branches under a uniform prior.

    ``exhaustive`` enumerates the branches that differ on decisions reachable
    from s0, keeps one branch per distinct outcome law, and scans every
    multiset of n_z laws. ``ascent`` changes one (skill, time, state) choice
    at a time from a seeded start and keeps strict improvements.

    Returns ``(skill_policy, objective)``.
    """
    config = config or MislConfig()
    s0 = mdp.state_index(s0)
    cap = enumeration_cap(config.cap)
    if config.mode == "exhaustive":
        return _exhaustive(mdp, spec, n_z, s0, cap)
    if config.mode == "ascent":
        return _ascent(mdp, spec, n_z, s0, config)
    raise ValueError(f"unknown mode {config.mode!r}")


def _exhaustive(mdp, spec, n_z, s0, cap):
    if isinstance(spec, SGammaPlus):
        choices = _stationary_reachable_choices(mdp, s0, cap)
    else:
        choices = enumerate_reachable_choices(mdp, s0, spec.K, cap)
    pol = _skill_policy(mdp, choices)
    joint = behavior_joint(mdp, pol, s0, None, spec, cap)
    _, first = np.unique(np.round(joint.cond, 12), axis=0, return_index=True)
    first = np.sort(first)
    rows = joint.cond[first]
    m = len(first)
    count = math.comb(m + n_z - 1, n_z)
    if count > cap:
        raise CapExceeded(count, cap, "skill multiset enumeration")
    prior = np.full(n_z, 1.0 / n_z)
    best, best_combo = -1.0, None
    for combo in itertools.combinations_with_replacement(range(m), n_z):
        cond = rows[list(combo)]
        marg = prior @ cond
        val = _entropy(marg) - sum(_entropy(r) for r in cond) / n_z
        if val > best + 1e-12:
            best, best_combo = val, combo
    skill = _skill_policy(mdp, [choices[first[i]] for i in best_combo])
    return skill, misl_objective(mdp, skill, s0, None, spec, cap)


def _entropy(p):
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _ascent(mdp, spec, n_z, s0, config):
    rng = np.random.default_rng(config.seed)
    T = _choice_shape(spec)
    ch = np.floor(rng.uniform(size=(n_z, T, mdp.n_states)) * mdp.n_actions[None, None, :]).astype(int)

    def score(c):
        return misl_objective(mdp, _skill_policy(mdp, list(c)), s0, None, spec, config.cap)

    best = score(ch)
    for _ in range(config.iterations):
        improved = False
        for z, t, s in itertools.product(range(n_z), range(T), range(mdp.n_states)):
            for a in range(mdp.n_actions[s]):
                if a == ch[z, t, s]:
                    continue
                trial = ch.copy()
                trial[z, t, s] = a
                val = score(trial)
                if val > best + 1e-12:
                    ch, best, improved = trial, val, True
        if not improved:
            break
    return _skill_policy(mdp, list(ch)), best


__all__ = [
    "SkillPrior",
    "GapBoundResult",
    "MislConfig",
    "misl_objective",
    "downstream_skill_distribution",
    "mi_gap_bound",
    "consistent_mapping",
    "verify_mi_identity",
    "misl_gap",
    "optimize_misl_tabular",
    "FirstVisitVector",
    "SK",
    "SGammaPlus",
]
