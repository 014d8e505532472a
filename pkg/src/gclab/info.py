"""Exact discrete information measures and goal-behavior joints.

All logarithms are natural and 0 log 0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._config import enumeration_cap
from .mdp import FiniteMdp, goal_weights
from .policy import GoalConditionedPolicy, state_path_law, trajectory_law
from .values import ET, OW, Pe, SGammaPlus, SK, value_matrix


@dataclass(frozen=True)
class FirstVisitVector:
    K: int
    gamma: float


@dataclass(frozen=True)
class TrajectoryK:
    K: int


@dataclass(frozen=True)
class StatePathK:
    """(S_1, ..., S_K), the trajectory with actions projected out."""

    K: int


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    labels: tuple
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, float)
        if p.ndim != 1 or len(p) != len(self.labels):
            raise ValueError("one probability per label")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("not a probability vector")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Prior over conditioning labels and one conditional law per label.

    ``cond[i, j] = P(outcome j | label i)``.
    """

    labels: tuple
    prior: np.ndarray = field(repr=False)
    outcomes: tuple
    cond: np.ndarray = field(repr=False)

    def __post_init__(self):
        prior = np.asarray(self.prior, float)
        cond = np.asarray(self.cond, float)
        if cond.shape != (len(self.labels), len(self.outcomes)) or prior.shape != (len(self.labels),):
            raise ValueError("joint shapes do not match labels and outcomes")
        if np.any(prior < 0) or abs(prior.sum() - 1) > 1e-12:
            raise ValueError("prior is not a distribution")
        if np.any(cond < 0) or np.any(np.abs(cond.sum(axis=1) - 1) > 1e-9):
            raise ValueError("a conditional is not a distribution")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "cond", cond)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    @property
    def marginal(self) -> np.ndarray:
        return self.prior @ self.cond

    @property
    def table(self) -> np.ndarray:
        return self.prior[:, None] * self.cond

    def project(self, fn) -> "JointDistribution":
        """Joint of (label, fn(outcome)), merging outcomes with equal images."""
        keys: dict = {}
        for o in self.outcomes:
            keys.setdefault(fn(o), len(keys))
        M = np.zeros((len(self.outcomes), len(keys)))
        for j, o in enumerate(self.outcomes):
            M[j, keys[fn(o)]] = 1.0
        return JointDistribution(self.labels, self.prior, tuple(keys), self.cond @ M)

    def with_prior(self, prior) -> "JointDistribution":
        return JointDistribution(self.labels, prior, self.outcomes, self.cond)


def entropy(p) -> float:
    p = np.asarray(p, float).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("binary entropy needs x in [0, 1]")
    return entropy([x, 1.0 - x])


def kl_divergence(p, q) -> float:
    """KL(p || q); +inf when p puts mass where q has none."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    m = p > 0
    if np.any(q[m] <= 0):
        return math.inf
    return float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m]))))


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def mutual_information(joint: JointDistribution) -> float:
    """H(marginal) - sum_i prior_i H(cond_i); clipped at 0 against round-off."""
    val = entropy(joint.marginal) - sum(
        w * entropy(row) for w, row in zip(joint.prior, joint.cond) if w > 0
    )
    return max(val, 0.0)


def info_measures(p, q=None) -> dict:
    """Bundle of the standard measures.

    ``p`` a JointDistribution: entropy of the outcome marginal and MI.
    ``p`` a distribution and ``q`` another one: entropies, KL and TV.
    """
    if isinstance(p, JointDistribution):
        return {"H": entropy(p.marginal), "H_prior": entropy(p.prior), "MI": mutual_information(p)}
    pv = p.probs if isinstance(p, DiscreteDistribution) else np.asarray(p, float)
    out = {"H": entropy(pv)}
    if q is not None:
        qv = q.probs if isinstance(q, DiscreteDistribution) else np.asarray(q, float)
        out.update(H_q=entropy(qv), KL=kl_divergence(pv, qv), TV=total_variation(pv, qv))
    return out


# --- Fano-type functions ----------------------------------------------------


def _log_n(N, goal_entropy):
    if N < 2:
        raise ValueError("need N >= 2")
    return math.log(N) if goal_entropy is None else float(goal_entropy)


def phi_down(N: int, x: float, goal_entropy: float | None = None) -> float:
    """log N - h(x) - (1 - x) log(N - 1): the least MI compatible with success rate x."""
    if not -1e-12 <= x <= 1 + 1e-12:
        raise ValueError("phi_down needs x in [0, 1]")
    x = min(max(x, 0.0), 1.0)
    return _log_n(N, goal_entropy) - binary_entropy(x) - (1 - x) * math.log(N - 1)


def phi_up(N: int, x: float, goal_entropy: float | None = None, conventional_ceiling: bool = False) -> float:
    """Largest MI compatible with Bayes success rate x.

    Subtracts from log N the entropy of the law that spreads x over as many
    outcomes as possible, interpolating linearly between m = floor(1/x) and
    the next integer. That neighbour is floor + 1 even when 1/x is an
    integer; ``conventional_ceiling`` uses the usual ceiling instead, for
    comparison only.
    """
    if x <= 0:
        raise ValueError("phi_up needs x > 0")
    if x > 1 + 1e-12:
        raise ValueError("phi_up needs x <= 1")
    x = min(x, 1.0)
    lo = math.floor(1.0 / x)
    hi = math.ceil(1.0 / x) if conventional_ceiling else lo + 1

    def xlogx(k):
        return 0.0 if k <= 1 else k * math.log(k)

    return _log_n(N, goal_entropy) - (hi * x - 1.0) * xlogx(lo) - (1.0 - lo * x) * xlogx(hi)


def ow_mi_lower_bound(c_ow: float) -> float:
    return 2.0 * c_ow * c_ow


# --- behavior joints --------------------------------------------------------


def _branches(policy):
    if isinstance(policy, GoalConditionedPolicy):
        return policy.conds, list(policy.table)
    raise TypeError("behavior joints need a GoalConditionedPolicy")


def first_visit_outcome(path, s0, K, gamma, n_states):
    """F vector of a state path (S_1..S_K): gamma^(T_g-1) for visited g, else 0."""
    pw = [float(gamma**t) for t in range(K)]
    out = [0.0] * n_states
    seen = set()
    for t, s in enumerate(path):
        if s not in seen:
            seen.add(s)
            out[s] = pw[t]
    return tuple(out)


def behavior_joint(mdp: FiniteMdp, policy: GoalConditionedPolicy, s0, prior=None, spec=None, cap=None):
    """Exact joint of the conditioning variable and a behavioral outcome from s0.

    Specs: SGammaPlus, SK (state outcomes), StatePathK (state paths),
    FirstVisitVector (per-goal first-visit payoffs) and TrajectoryK
    ((action, state) sequences).
    """
    s0 = mdp.state_index(s0)
    labels, branches = _branches(policy)
    w = goal_weights(prior, len(labels))
    if isinstance(spec, (SGammaPlus, SK)):
        f = Pe(spec.gamma) if isinstance(spec, SGammaPlus) else ET(spec.K)
        cond = np.stack([value_matrix(mdp, f, b)[s0] for b in branches])
        cond = np.clip(cond, 0, None)
        cond /= cond.sum(axis=1, keepdims=True)
        return JointDistribution(labels, w, mdp.states, cond)
    cap = enumeration_cap(cap)
    if isinstance(spec, (FirstVisitVector, StatePathK)):
        laws = [state_path_law(mdp, b, s0, spec.K, cap=cap) for b in branches]
        if isinstance(spec, FirstVisitVector):
            N = mdp.n_states
            key = lambda path: first_visit_outcome(path, s0, spec.K, spec.gamma, N)  # noqa: E731
            laws = [_push(law, key) for law in laws]
    elif isinstance(spec, TrajectoryK):
        laws = [trajectory_law(mdp, b, s0, spec.K, cap=cap) for b in branches]
    else:
        raise TypeError(f"unknown behavior spec {spec!r}")
    return _joint_from_laws(labels, w, laws)


def _push(law: dict, fn) -> dict:
    out: dict = {}
    for k, p in law.items():
        v = fn(k)
        out[v] = out.get(v, 0.0) + p
    return out


def _joint_from_laws(labels, w, laws):
    keys = sorted(set().union(*laws))
    idx = {k: j for j, k in enumerate(keys)}
    cond = np.zeros((len(laws), len(keys)))
    for i, law in enumerate(laws):
        for k, p in law.items():
            cond[i, idx[k]] += p
    return JointDistribution(labels, w, tuple(keys), cond)


def goal_behavior_mi(mdp, policy, s0, p_goal=None, spec=None, cap=None) -> float:
    return mutual_information(behavior_joint(mdp, policy, s0, p_goal, spec, cap))


def decoder_errors(joint: JointDistribution):
    """(naive identity-decoder error, Bayes decoder error) for state-valued outcomes."""
    if set(joint.labels) - set(joint.outcomes):
        raise ValueError("identity decoder needs every label among the outcomes")
    pos = {o: j for j, o in enumerate(joint.outcomes)}
    hit = sum(joint.prior[i] * joint.cond[i, pos[g]] for i, g in enumerate(joint.labels))
    T = joint.table
    best = np.argmax(T >= T.max(axis=0, keepdims=True), axis=0)
    bayes = T[best, np.arange(T.shape[1])].sum()
    return float(1.0 - hit), float(1.0 - bayes)


# --- first-visit upper bound ------------------------------------------------


@dataclass(frozen=True)
class OwBoundDiagnostics:
    eta: float
    delta_min: float
    epsilon_interference: float
    assumption_consistency: bool
    assumption_support: bool
    assumption_interference: bool
    c_ow: float
    mi: float
    bound: float

    @property
    def applicable(self) -> bool:
        return self.assumption_consistency and self.assumption_support and self.assumption_interference

    @property
    def reason(self) -> str:
        if not self.assumption_consistency:
            return "assumption-1-stochastic-consistency"
        if not self.assumption_support:
            return "assumption-2-support-floor"
        if not self.assumption_interference:
            return "assumption-3-interference"
        return ""


def support_gap(K: int, gamma: float) -> float:
    """Smallest gap between distinct values of F_g, i.e. of {0, gamma^(K-1), ..., 1}."""
    vals = np.array(sorted({0.0} | {float(gamma**t) for t in range(K)}))
    return float(np.diff(vals).min()) if len(vals) > 1 else 1.0


def ow_upper_bound(mdp: FiniteMdp, policy, s0, K: int, gamma: float, p_goal=None, cap=None,
                   support_floor: float = 1e-12) -> OwBoundDiagnostics:
    """I(G; F) <= 4 C_OW / (eta delta^2) + eps with its assumption checks.

    eta is the least positive probability any F_g value gets under the
    mixture, delta the smallest gap between F_g values, and eps the part of
    I(G; F) not explained by the per-goal marginals F_g (chain rule), which
    is never negative.
    """
    from .control import check_consistency, first_visit_marginal, goal_sensitivity

    s0 = mdp.state_index(s0)
    N = mdp.n_states
    w = goal_weights(p_goal, N)
    joint = behavior_joint(mdp, policy, s0, w, FirstVisitVector(K, gamma), cap)
    mi = mutual_information(joint)
    f = OW(K, gamma)
    c_ow = goal_sensitivity(mdp, f, policy, s0, w).c_value
    cons = check_consistency(mdp, f, policy, "stochastic", w, starts=[s0]).passed
    eta = math.inf
    marg_kl = 0.0
    for g in range(N):
        own = first_visit_marginal(mdp, policy.branch(g), s0, g, K, gamma)
        mix: dict = {}
        for c in range(N):
            for v, p in first_visit_marginal(mdp, policy.branch(c), s0, g, K, gamma).items():
                mix[v] = mix.get(v, 0.0) + w[c] * p
        positive = [p for p in mix.values() if p > support_floor]
        eta = min(eta, min(positive))
        vals = sorted(mix)
        marg_kl += w[g] * kl_divergence([own.get(v, 0.0) for v in vals], [mix[v] for v in vals])
    eps = mi - marg_kl
    delta = support_gap(K, gamma)
    support_ok = eta > support_floor
    interf_ok = math.isfinite(eps)
    bound = 4.0 / (eta * delta**2) * c_ow + eps if support_ok else math.inf
    return OwBoundDiagnostics(eta, delta, eps, cons, support_ok, interf_ok, c_ow, mi, bound)


def ow_delta_closed_form(K: int, gamma: float) -> float:
    """min{gamma^(K-1), gamma^(K-2) (1 - gamma)}, and 1 when K = 1."""
    if K == 1:
        return 1.0
    return min(gamma ** (K - 1), gamma ** (K - 2) * (1 - gamma))
