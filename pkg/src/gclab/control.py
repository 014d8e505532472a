"""Goal-sensitivity, consistency, controllability and empowerment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._config import CapExceeded, enumeration_cap
from .mdp import FiniteMdp, goal_weights
from .policy import (
    GoalConditionedPolicy,
    count_reachable_choices,
    deterministic_branch,
    enumerate_reachable_choices,
    goal_policy_from_branches,
    step_matrix,
)
from .values import (
    ET,
    OW,
    Pe,
    cross_values,
    enumerated_values,
    solve_arrival,
    solve_optimal,
    solve_terminal,
    value_matrix,
)

SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class SensitivityResult:
    c_value: float
    gain: np.ndarray = field(repr=False)
    p_goal: np.ndarray = field(repr=False)


def goal_sensitivity(mdp: FiniteMdp, formulation, policy: GoalConditionedPolicy, s0, p_goal=None):
    """Weighted mean gain of pursuing the commanded goal over a random one.

    ``gain[g, g'] = J(s0, g, pi_g) - J(s0, g, pi_g')``.
    """
    s0 = mdp.state_index(s0)
    w = goal_weights(p_goal, mdp.n_states)
    X = cross_values(mdp, formulation, policy)[s0]  # X[g, g'] = J(s0, g, pi_g')
    gain = np.diag(X)[:, None] - X
    return SensitivityResult(float(w @ gain @ w), gain, w)


def goal_sensitivity_all(mdp, formulation, policy, p_goal=None) -> np.ndarray:
    """Goal-sensitivity from every start state at once."""
    w = goal_weights(p_goal, mdp.n_states)
    X = cross_values(mdp, formulation, policy)
    diag = np.einsum("sgg->sg", X)
    return diag @ w - np.einsum("g,sgc,c->s", w, X, w)


@dataclass(frozen=True)
class ConsistencyViolation:
    s: int
    g: int
    other: object  # competing branch g' or, in stochastic mode, the threshold r
    lhs: float
    rhs: float
    kind: str = "inequality"


@dataclass(frozen=True)
class ConsistencyReport:
    mode: str
    violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.passed


def check_consistency(
    mdp: FiniteMdp, formulation, policy, mode="plain", p_goal=None, starts=None, tol=SLACK
) -> ConsistencyReport:
    """Check that each goal's own branch reaches it at least as well as the others.

    plain       J(s,g,pi_g) >= J(s,g,pi_g')
    strong      J(s,g,pi_g) >= max(1, p(g')/p(g)) J(s,g,pi_g')
    stochastic  P(F_g >= r | pi_g) >= P(F_g >= r | mixture) for every support value r
    """
    starts = range(mdp.n_states) if starts is None else [mdp.state_index(s) for s in starts]
    w = goal_weights(p_goal, mdp.n_states)
    out = []
    if mode == "stochastic":
        if not isinstance(formulation, OW):
            raise ValueError("stochastic consistency is defined for OW")
        for s in starts:
            out += _stochastic_violations(mdp, formulation, policy, s, w, tol)
        return ConsistencyReport(mode, tuple(out))
    if mode not in ("plain", "strong"):
        raise ValueError(f"unknown consistency mode {mode!r}")
    X = cross_values(mdp, formulation, policy)
    N = mdp.n_states
    for s in starts:
        for g in range(N):
            lhs = X[s, g, g]
            for h in range(N):
                if h == g:
                    continue
                factor = 1.0
                if mode == "strong":
                    if w[g] == 0:
                        if w[h] > 0 and X[s, g, h] > tol:
                            out.append(ConsistencyViolation(s, g, h, lhs, np.inf, "undefined-factor"))
                        continue
                    factor = max(1.0, w[h] / w[g])
                rhs = factor * X[s, g, h]
                if lhs < rhs - tol:
                    out.append(ConsistencyViolation(s, g, h, float(lhs), float(rhs)))
    return ConsistencyReport(mode, tuple(out))


def first_visit_time_law(mdp: FiniteMdp, branch, s0: int, g: int, K: int) -> np.ndarray:
    """``q[t-1] = P(T_g = t)`` for t = 1..K from s0."""
    m = np.zeros(mdp.n_states)
    m[s0] = 1.0
    q = np.zeros(K)
    for t in range(K):
        m = m @ step_matrix(mdp, branch, t)
        q[t] = m[g]
        m[g] = 0.0
    return q


def support_values(K: int, gamma: float) -> np.ndarray:
    """Distinct values gamma^(t-1), t = 1..K, together with 0, ascending."""
    vals = {0.0} | {float(gamma**t) for t in range(K)}
    return np.array(sorted(vals))


def first_visit_marginal(mdp: FiniteMdp, branch, s0: int, g: int, K: int, gamma: float) -> dict:
    """Law of F_g = gamma^(T_g-1) 1{T_g <= K} as ``{value: prob}``."""
    q = first_visit_time_law(mdp, branch, s0, g, K)
    out = {0.0: max(0.0, 1.0 - q.sum())}
    for t in range(K):
        v = float(gamma**t)
        out[v] = out.get(v, 0.0) + q[t]
    return out


def _tail(law: dict, r: float) -> float:
    return sum(p for v, p in law.items() if v >= r)


def _stochastic_violations(mdp, formulation, policy, s, w, tol):
    K, gam = formulation.K, formulation.gamma
    N = mdp.n_states
    out = []
    for g in range(N):
        own = first_visit_marginal(mdp, policy.branch(g), s, g, K, gam)
        mix: dict = {}
        for c in range(N):
            if w[c] == 0:
                continue
            for v, p in first_visit_marginal(mdp, policy.branch(c), s, g, K, gam).items():
                mix[v] = mix.get(v, 0.0) + w[c] * p
        for r in support_values(K, gam):
            lhs, rhs = _tail(own, r), _tail(mix, r)
            if lhs < rhs - tol:
                out.append(ConsistencyViolation(s, g, float(r), lhs, rhs))
    return out


# --- controllability --------------------------------------------------------


@dataclass(frozen=True)
class Controllability:
    """Maximal goal-sensitivity; ``exact`` is False when only a lower bound was found."""

    value: float
    exact: bool
    method: str

    def __float__(self):
        return float(self.value)


def _sensitivity_rewards(w: np.ndarray) -> np.ndarray:
    # Row g: state payoff e_g - p_goal, whose value is J(g) - sum_h p(h) J(h)
    return np.eye(len(w)) - w[None, :]


def _linear_branch(mdp, formulation, reward):
    if isinstance(formulation, Pe):
        ch, V = solve_arrival(mdp, formulation.gamma, reward)
        return deterministic_branch(mdp, ch[None]), V
    ch, V = solve_terminal(mdp, formulation.K, reward)
    return deterministic_branch(mdp, ch), V


def _ow_scores(mdp, formulation, s0, w, cap):
    choices = enumerate_reachable_choices(mdp, s0, formulation.K, cap)
    vals = []
    for lo in range(0, len(choices), 4096):
        vals.append(enumerated_values(mdp, formulation, choices[lo : lo + 4096])[:, s0, :])
    V = np.concatenate(vals)  # (B, g)
    # score[b, g'] = J(s0, g', b) - sum_g p(g) J(s0, g, b)
    return choices, V[:, :] - (V @ w)[:, None]


def search_max_incontrol(mdp: FiniteMdp, formulation, s0, p_goal=None, cap=None, seed=0):
    """Policy maximizing goal-sensitivity at s0.

    Goal-sensitivity splits into one term per branch,
    p(g') [J(s0, g', pi_g') - sum_g p(g) J(s0, g, pi_g')], so each branch is
    optimized on its own. For Pe and ET that term is linear in the state law
    and dynamic programming is exact. For OW it depends on which goals the
    path visits, so deterministic time-indexed branches are enumerated over
    the decisions reachable from s0 (a multilinear objective on a product of
    simplices peaks at a vertex, so nothing is lost by ignoring stochastic
    branches). Above the cap a seeded coordinate ascent gives a lower bound.

    Returns ``(policy, c_value, exhaustive)``.
    """
    s0 = mdp.state_index(s0)
    N = mdp.n_states
    w = goal_weights(p_goal, N)
    if isinstance(formulation, (Pe, ET)):
        uniform = np.allclose(w, 1.0 / N, rtol=0, atol=1e-15)
        branches = []
        for g in range(N):
            if uniform:
                branches.append(solve_optimal(mdp, formulation, g).branch)
            else:
                branches.append(_linear_branch(mdp, formulation, _sensitivity_rewards(w)[g])[0])
        policy = goal_policy_from_branches(mdp, branches)
        return policy, goal_sensitivity(mdp, formulation, policy, s0, w).c_value, True
    if not isinstance(formulation, OW):
        raise TypeError("search_max_incontrol supports Pe, ET and OW")
    cap = enumeration_cap(cap)
    K = formulation.K
    if count_reachable_choices(mdp, s0, K) <= cap:
        choices, score = _ow_scores(mdp, formulation, s0, w, cap)
        best = score.max(axis=0)
        pick = np.argmax(score >= best[None, :] - SLACK, axis=0)
        branches = [deterministic_branch(mdp, choices[pick[g]]) for g in range(N)]
        policy = goal_policy_from_branches(mdp, branches)
        return policy, float(w @ best), True
    branches = [
        _ascend_ow_branch(mdp, formulation, s0, w, g, np.random.default_rng([seed, g]))
        for g in range(N)
    ]
    policy = goal_policy_from_branches(mdp, branches)
    return policy, goal_sensitivity(mdp, formulation, policy, s0, w).c_value, False


def _ow_branch_score(mdp, formulation, s0, w, g, choices):
    V = value_matrix(mdp, formulation, deterministic_branch(mdp, choices))[s0]
    return V[g] - V @ w


def _ascend_ow_branch(mdp, formulation, s0, w, g, rng, sweeps=50):
    K = formulation.K
    start = solve_optimal(mdp, formulation, g).branch
    ch = np.argmax(start[:K], axis=2)
    best = _ow_branch_score(mdp, formulation, s0, w, g, ch)
    for _ in range(sweeps):
        improved = False
        cells = [(t, s) for t in range(K) for s in range(mdp.n_states)]
        rng.shuffle(cells)
        for t, s in cells:
            for a in range(mdp.n_actions[s]):
                if a == ch[t, s]:
                    continue
                trial = ch.copy()
                trial[t, s] = a
                val = _ow_branch_score(mdp, formulation, s0, w, g, trial)
                if val > best + SLACK:
                    ch, best, improved = trial, val, True
        if not improved:
            break
    return deterministic_branch(mdp, ch)


def objective_controllability(mdp: FiniteMdp, formulation, s0, p_goal=None, cap=None):
    """Maximal goal-sensitivity attainable from s0."""
    s0i = mdp.state_index(s0)
    N = mdp.n_states
    w = goal_weights(p_goal, N)
    if isinstance(formulation, (Pe, ET)):
        if np.allclose(w, 1.0 / N, rtol=0, atol=1e-15):
            jstar = np.mean([solve_optimal(mdp, formulation, g).values[s0i] for g in range(N)])
            return Controllability(float(jstar - 1.0 / N), True, "optimal-value-shift")
        R = _sensitivity_rewards(w)
        val = sum(w[g] * _linear_branch(mdp, formulation, R[g])[1][s0i] for g in range(N))
        return Controllability(float(val), True, "per-branch-dynamic-programming")
    if not isinstance(formulation, OW):
        raise TypeError("objective_controllability supports Pe, ET and OW")
    _, c, exhaustive = search_max_incontrol(mdp, formulation, s0i, w, cap)
    return Controllability(c, exhaustive, "enumeration" if exhaustive else "coordinate-ascent")


def one_step_controllability(mdp: FiniteMdp, s) -> float:
    """(1/N_s) sum_a Delta(a; s), Delta built from per-successor winning actions."""
    s = mdp.state_index(s)
    n_a = int(mdp.n_actions[s])
    rows = mdp.P[s, :n_a]  # (A, N)
    winner = np.argmax(rows >= rows.max(axis=0, keepdims=True), axis=0)  # lowest index
    total = 0.0
    for a in range(n_a):
        succ = winner == a
        diff = np.abs(rows[a, succ][None, :] - rows[:, succ])
        total += diff.sum() / n_a
    return total / mdp.n_states


# --- empowerment ------------------------------------------------------------


@dataclass(frozen=True)
class CapacityResult:
    """Channel capacity in nats; ``upper`` is a certified upper bound."""

    value: float
    upper: float
    converged: bool
    iterations: int
    method: str

    def __float__(self):
        return float(self.value)


def blahut_arimoto(W: np.ndarray, tol: float = 1e-10, max_iter: int = 10**4) -> CapacityResult:
    """Capacity of the channel with rows ``W[x] = p(y | x)``.

    Stops once the gap between the mutual information of the current input
    law and max_x KL(W[x] || output law) (an upper bound on capacity) falls
    below tol.
    """
    W = np.asarray(W, float)
    W = np.unique(W, axis=0)
    nx = W.shape[0]
    r = np.full(nx, 1.0 / nx)
    logW = np.log(np.where(W > 0, W, 1.0))
    lower = upper = 0.0
    for it in range(1, max_iter + 1):
        q = r @ W
        logq = np.log(np.where(q > 0, q, 1.0))
        D = np.sum(W * (logW - logq[None, :]), axis=1)
        lower = float(r @ D)
        upper = float(D.max())
        if upper - lower <= tol:
            return CapacityResult(lower, upper, True, it, "blahut-arimoto")
        r = r * np.exp(D - D.max())
        r /= r.sum()
    return CapacityResult(lower, upper, False, max_iter, "blahut-arimoto")


def sequence_channel(mdp: FiniteMdp, s0: int, K: int, cap=None) -> np.ndarray:
    """Rows: law of S_K for every open-loop sequence of action indices.

    An index beyond a state's action set plays that state's last action, so
    every row is realizable and sequences work with uneven action sets.
    """
    cap = enumeration_cap(cap)
    A = mdp.max_actions
    if A**K > cap:
        raise CapExceeded(A**K, cap, "action-sequence enumeration")
    clamp = np.minimum(np.arange(A)[None, :], mdp.n_actions[:, None] - 1)  # (N, A)
    Pc = mdp.P[np.arange(mdp.n_states)[:, None], clamp]  # (N, A, N)
    D = np.zeros((1, mdp.n_states))
    D[0, s0] = 1.0
    for _ in range(K):
        D = np.einsum("bs,sat->bat", D, Pc).reshape(-1, mdp.n_states)
    return D


def klyubin_empowerment(mdp: FiniteMdp, s0, K: int, cap=None, method="auto") -> CapacityResult:
    """Capacity from open-loop K-step action sequences to S_K, in nats.

    ``method="auto"`` uses log |states reachable in exactly K steps| for
    deterministic MDPs; ``"blahut-arimoto"`` always solves the channel.
    """
    from .mdp import env_predicates

    s0 = mdp.state_index(s0)
    if method == "auto" and env_predicates(mdp)["deterministic"]:
        W = sequence_channel(mdp, s0, K, cap)
        n = int(np.count_nonzero(W.sum(axis=0) > 0))
        v = float(np.log(n))
        return CapacityResult(v, v, True, 0, "reachable-count")
    return blahut_arimoto(sequence_channel(mdp, s0, K, cap))
