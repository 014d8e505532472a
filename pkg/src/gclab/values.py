"""Exact values of the three goal-reaching formulations and optimal solvers.

Pe(gamma)   J = P(S_{gamma,+} = g), the discounted occupancy of g from t = 1.
ET(K)       J = P(S_K = g).
OW(K,gamma) J = E[gamma^(T_g - 1) 1{T_g <= K}], T_g the first visit at t >= 1.
General     J = E[sum_{t>=1} R_t(S_t; g) prod_{k<t} gamma_k(S_k; g)], gamma_0 = 1.

Most routines return a full ``(N_s, N_s)`` matrix ``V[s0, g]`` for one branch,
which is how every goal is handled at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .mdp import FiniteMdp, goal_weights
from .policy import (
    GoalConditionedPolicy,
    components,
    deterministic_branch,
    slot,
    step_matrix,
)

TIE_TOL = 1e-13
DIRECT_SOLVE_MAX = 200


@dataclass(frozen=True)
class Pe:
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("Pe needs gamma in [0, 1)")


@dataclass(frozen=True)
class ET:
    K: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("ET needs an integer K >= 1")


@dataclass(frozen=True)
class OW:
    K: int
    gamma: float

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("OW needs an integer K >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("OW needs gamma in [0, 1]")


@dataclass(frozen=True, eq=False)
class General:
    """Reward and discount tables of shape ``(H + 1, N_s, N_g)``.

    Row ``t`` is used at time ``t`` for ``t < H`` and the last row for all
    later times. The discount at ``t = 0`` is ignored (taken as 1); the tail
    discount must stay below 1 so that the series converges.
    """

    reward: np.ndarray
    discount: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.reward, float)
        D = np.asarray(self.discount, float)
        if R.shape != D.shape or R.ndim != 3:
            raise ValueError("reward and discount tables must share shape (H+1, N_s, N_g)")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(D))):
            raise ValueError("tables must be finite")
        if np.any(D < 0):
            raise ValueError("discounts must be non-negative")
        if R.shape[0] > 1 and np.max(D[-1]) >= 1:
            raise ValueError("tail discount must be below 1")
        if R.shape[0] == 1 and np.max(D[-1]) >= 1:
            raise ValueError("tail discount must be below 1")
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "discount", D)

    @property
    def horizon(self) -> int:
        return self.reward.shape[0] - 1

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.reward >= 0))


@dataclass(frozen=True)
class SGammaPlus:
    gamma: float


@dataclass(frozen=True)
class SK:
    K: int


@dataclass(frozen=True)
class ValueResult:
    value: float
    method: str
    tail_bound: float = 0.0

    def __float__(self):
        return float(self.value)


def formulation_name(f) -> str:
    if isinstance(f, Pe):
        return f"Pe(gamma={f.gamma:g})"
    if isinstance(f, ET):
        return f"ET(K={f.K})"
    if isinstance(f, OW):
        return f"OW(K={f.K},gamma={f.gamma:g})"
    return "General"


# --- per-branch value matrices ---------------------------------------------


def occupancy_matrix(mdp: FiniteMdp, branch: np.ndarray, gamma: float) -> np.ndarray:
    """Rows: law of S_{gamma,+} from each start, i.e. (1-g) sum_{t>=1} g^(t-1) P_t."""
    N = mdp.n_states
    H = branch.shape[0] - 1
    phi = np.eye(N)
    acc = np.zeros((N, N))
    for t in range(H):
        phi = phi @ step_matrix(mdp, branch, t)
        acc += gamma**t * phi
    M = step_matrix(mdp, branch, H)
    rhs = phi @ M
    if N <= DIRECT_SOLVE_MAX:
        # X (I - gamma M) = phi M
        X = np.linalg.solve((np.eye(N) - gamma * M).T, rhs.T).T
    else:
        X = _iterate_occupancy(rhs, M, gamma)
    acc += gamma**H * X
    return (1.0 - gamma) * acc


def _iterate_occupancy(rhs, M, gamma, tol=1e-12, max_iter=10**6):
    X = rhs.copy()
    for _ in range(max_iter):
        nxt = rhs + gamma * X @ M
        if np.max(np.abs(nxt - X)) <= tol * (1 - gamma):
            return nxt
        X = nxt
    raise RuntimeError("occupancy iteration did not converge")


def terminal_matrix(mdp: FiniteMdp, branch: np.ndarray, K: int) -> np.ndarray:
    """Rows: law of S_K from each start."""
    out = np.eye(mdp.n_states)
    for t in range(K):
        out = out @ step_matrix(mdp, branch, t)
    return out


def first_visit_matrix(mdp: FiniteMdp, branch: np.ndarray, K: int, gamma: float) -> np.ndarray:
    """``W[s0, g] = E[gamma^(T_g-1) 1{T_g <= K}]`` by backward induction."""
    W = np.zeros((mdp.n_states, mdp.n_states))
    for t in reversed(range(K)):
        M = step_matrix(mdp, branch, t)
        # arrival now pays 1; otherwise carry gamma times the value one step later
        W = M + gamma * (M @ W - M * np.diag(W)[None, :])
    return W


def general_matrix(mdp: FiniteMdp, branch: np.ndarray, spec: General) -> np.ndarray:
    N = mdp.n_states
    R, D = spec.reward, spec.discount
    G = R.shape[2]
    if R.shape[1] != N:
        raise ValueError("General tables must have one row per state")
    T = max(spec.horizon, branch.shape[0] - 1, 1)
    W = np.repeat(np.eye(N)[None], G, axis=0)  # (G, s0, s)
    J = np.zeros((N, G))
    for t in range(T):
        if t > 0:
            W = W * D[min(t, spec.horizon)].T[:, None, :]
        W = W @ step_matrix(mdp, branch, t)
        J += np.einsum("gis,sg->ig", W, R[min(t + 1, spec.horizon)])
    M = step_matrix(mdp, branch, T)
    Dt, Rt = D[spec.horizon], R[spec.horizon]
    for g in range(G):
        DM = Dt[:, g][:, None] * M
        Y = np.linalg.solve(np.eye(N) - DM, DM @ Rt[:, g])
        J[:, g] += W[g] @ Y
    return J


def value_matrix(mdp: FiniteMdp, formulation, branch: np.ndarray) -> np.ndarray:
    """``V[s0, g] = J(s0, g, branch)`` for every start and goal."""
    branch = np.asarray(branch, float)
    if isinstance(formulation, Pe):
        return occupancy_matrix(mdp, branch, formulation.gamma)
    if isinstance(formulation, ET):
        return terminal_matrix(mdp, branch, formulation.K)
    if isinstance(formulation, OW):
        return first_visit_matrix(mdp, branch, formulation.K, formulation.gamma)
    if isinstance(formulation, General):
        return general_matrix(mdp, branch, formulation)
    raise TypeError(f"unknown formulation {formulation!r}")


def _method(formulation) -> str:
    if isinstance(formulation, Pe):
        return "linear-solve"
    if isinstance(formulation, (ET, OW)):
        return "backward-induction"
    return "forward-accumulation+linear-solve"


def cross_values(mdp: FiniteMdp, formulation, policy: GoalConditionedPolicy) -> np.ndarray:
    """``X[s0, g, c] = J(s0, g, pi_c)`` for every branch c of the policy."""
    return np.stack([value_matrix(mdp, formulation, b) for b in policy.table], axis=2)


def _policy_value_matrix(mdp, formulation, policy_like, g=None):
    out = 0.0
    for w, b in components(policy_like, g):
        out = out + w * value_matrix(mdp, formulation, b)
    return out


def behavior_distribution(mdp: FiniteMdp, branch, s0, spec) -> np.ndarray:
    """Law of S_{gamma,+} or S_K from s0 under a branch (or mixture)."""
    s0 = mdp.state_index(s0)
    if isinstance(spec, SGammaPlus):
        f = Pe(spec.gamma)
    elif isinstance(spec, SK):
        f = ET(spec.K)
    else:
        raise TypeError("behavior_distribution takes SGammaPlus or SK")
    return _policy_value_matrix(mdp, f, branch)[s0]


def first_visit_value(mdp: FiniteMdp, branch, s0, g, K: int, gamma: float) -> ValueResult:
    s0, g = mdp.state_index(s0), mdp.state_index(g)
    v = _policy_value_matrix(mdp, OW(K, gamma), branch)[s0, g]
    return ValueResult(float(v), "backward-induction")


def eval_J(mdp: FiniteMdp, formulation, policy, s0, g) -> ValueResult:
    """J(s0, g, pi_g). ``policy`` may also be a bare branch or a mixture."""
    s0, g = mdp.state_index(s0), mdp.state_index(g)
    cond = g if isinstance(policy, GoalConditionedPolicy) and policy.kind == "goal" else 0
    V = _policy_value_matrix(mdp, formulation, policy, cond)
    return ValueResult(float(V[s0, g]), _method(formulation))


def goal_values(mdp: FiniteMdp, formulation, policy: GoalConditionedPolicy) -> np.ndarray:
    """``J[s0, g] = J(s0, g, pi_g)``, the diagonal of :func:`cross_values`."""
    X = cross_values(mdp, formulation, policy)
    return np.einsum("sgg->sg", X)


def test_time_performance(mdp: FiniteMdp, formulation, policy, s0, p_goal=None) -> float:
    s0 = mdp.state_index(s0)
    w = goal_weights(p_goal, mdp.n_states)
    return float(goal_values(mdp, formulation, policy)[s0] @ w)


test_time_performance.__test__ = False


# --- solvers ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    """Deterministic optimal branch for one goal and its value from every start."""

    branch: np.ndarray
    values: np.ndarray
    method: str

    def value(self, s0) -> float:
        return float(self.values[s0])

    def first_action(self, s0) -> int:
        return int(np.argmax(self.branch[0, s0]))

    def action(self, t, s) -> int:
        return int(np.argmax(slot(self.branch, t)[s]))


def _q_mask(mdp, Q):
    return np.where(mdp.action_mask, Q, -np.inf)


def greedy(mdp: FiniteMdp, Q: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Lowest-index action within tol of the best, per state."""
    Q = _q_mask(mdp, Q)
    best = Q.max(axis=1, keepdims=True)
    return np.argmax(Q >= best - tol, axis=1)


def solve_terminal(mdp: FiniteMdp, K: int, reward: np.ndarray):
    """max E[reward(S_K)]: returns (choices (K, N), values (N,))."""
    V = np.asarray(reward, float)
    choices = np.zeros((K, mdp.n_states), int)
    for t in reversed(range(K)):
        Q = mdp.P @ V
        choices[t] = greedy(mdp, Q)
        V = _q_mask(mdp, Q).max(axis=1)
    return choices, V


def solve_first_visit(mdp: FiniteMdp, K: int, gamma: float, g: int):
    """OW backward induction over the remaining budget."""
    N = mdp.n_states
    V = np.zeros(N)
    hit = mdp.P[:, :, g]
    choices = np.zeros((K, N), int)
    for t in reversed(range(K)):
        Vg = V.copy()
        Vg[g] = 0.0
        Q = hit + gamma * (mdp.P @ Vg)
        choices[t] = greedy(mdp, Q)
        V = _q_mask(mdp, Q).max(axis=1)
    return choices, V


def _arrival_eval(mdp, choices, gamma, reward):
    N = mdp.n_states
    M = mdp.P[np.arange(N), choices]
    return np.linalg.solve(np.eye(N) - gamma * M, (1 - gamma) * M @ reward)


def solve_arrival(mdp: FiniteMdp, gamma: float, reward: np.ndarray, tol=1e-12, max_iter=10**6):
    """max E[sum_{t>=1} (1-gamma) gamma^(t-1) reward(S_t)] over stationary policies.

    Value iteration to a 1e-12 sup-norm error, then the greedy policy is
    evaluated exactly and improved until stable, so the returned values are
    those of the returned policy.
    """
    reward = np.asarray(reward, float)
    V = np.zeros(mdp.n_states)
    arrive = (1 - gamma) * (mdp.P @ reward)
    stop = tol * (1 - gamma) / max(gamma, 1e-300)
    for it in range(max_iter):
        nxt = _q_mask(mdp, arrive + gamma * (mdp.P @ V)).max(axis=1)
        diff = np.max(np.abs(nxt - V))
        V = nxt
        if diff <= stop:
            break
    else:
        raise RuntimeError("value iteration hit its iteration cap")
    choices = greedy(mdp, arrive + gamma * (mdp.P @ V), tol=1e-11)
    for _ in range(100 * mdp.n_states * mdp.max_actions + 10):
        V = _arrival_eval(mdp, choices, gamma, reward)
        Q = _q_mask(mdp, arrive + gamma * (mdp.P @ V))
        cur = Q[np.arange(mdp.n_states), choices]
        better = Q.max(axis=1) > cur + 1e-12
        if not better.any():
            break
        choices = np.where(better, greedy(mdp, Q), choices)
    return choices, V


def solve_optimal(mdp: FiniteMdp, formulation, g) -> OptimalSolution:
    """Optimal deterministic branch for goal g with lowest-index tie-breaking."""
    g = mdp.state_index(g)
    e = np.zeros(mdp.n_states)
    e[g] = 1.0
    if isinstance(formulation, Pe):
        ch, V = solve_arrival(mdp, formulation.gamma, e)
        return OptimalSolution(deterministic_branch(mdp, ch[None]), V, "value-iteration")
    if isinstance(formulation, ET):
        ch, V = solve_terminal(mdp, formulation.K, e)
        return OptimalSolution(deterministic_branch(mdp, ch), V, "backward-induction")
    if isinstance(formulation, OW):
        ch, V = solve_first_visit(mdp, formulation.K, formulation.gamma, g)
        return OptimalSolution(deterministic_branch(mdp, ch), V, "backward-induction")
    raise TypeError("solve_optimal supports Pe, ET and OW")


def first_step_q(mdp: FiniteMdp, formulation, g) -> np.ndarray:
    """Optimal action values at t = 0 for goal g, ``-inf`` off the action sets."""
    g = mdp.state_index(g)
    e = np.zeros(mdp.n_states)
    e[g] = 1.0
    if isinstance(formulation, Pe):
        _, V = solve_arrival(mdp, formulation.gamma, e)
        Q = (1 - formulation.gamma) * (mdp.P @ e) + formulation.gamma * (mdp.P @ V)
    elif isinstance(formulation, ET):
        _, V = solve_terminal(mdp, formulation.K - 1, e)
        Q = mdp.P @ V
    elif isinstance(formulation, OW):
        _, V = solve_first_visit(mdp, formulation.K - 1, formulation.gamma, g)
        V = V.copy()
        V[g] = 0.0
        Q = mdp.P[:, :, g] + formulation.gamma * (mdp.P @ V)
    else:
        raise TypeError("first_step_q supports Pe, ET and OW")
    return _q_mask(mdp, Q)


def optimal_policy(mdp: FiniteMdp, formulation) -> GoalConditionedPolicy:
    from .policy import goal_policy_from_branches

    return goal_policy_from_branches(
        mdp, [solve_optimal(mdp, formulation, g).branch for g in range(mdp.n_states)]
    )


def optimal_values(mdp: FiniteMdp, formulation) -> np.ndarray:
    """``J*[s0, g]``."""
    return np.stack(
        [solve_optimal(mdp, formulation, g).values for g in range(mdp.n_states)], axis=1
    )


# --- enumeration oracle -----------------------------------------------------


def enumerated_values(mdp: FiniteMdp, formulation, choices: np.ndarray) -> np.ndarray:
    """Values ``(B, N_s0, N_g)`` of deterministic branches given as ``(B, T, N)`` ints.

    Branch b plays ``choices[b, t]`` at time t < T; when T > 1 the tail plays
    the lowest-index action, matching :func:`deterministic_branch`.
    """
    choices = np.asarray(choices, int)
    B, T, N = choices.shape
    Mt = mdp.P[np.arange(N)[None, None, :], choices]  # (B, T, N, N)
    tail = Mt[:, 0] if T == 1 else np.broadcast_to(mdp.P[:, 0][None], (B, N, N))

    def M(t):
        return Mt[:, t] if t < T else tail

    eye = np.broadcast_to(np.eye(N), (B, N, N))
    if isinstance(formulation, ET):
        out = eye.copy()
        for t in range(formulation.K):
            out = out @ M(t)
        return out
    if isinstance(formulation, OW):
        W = np.zeros((B, N, N))
        for t in reversed(range(formulation.K)):
            m = M(t)
            diag = np.einsum("bgg->bg", W)
            W = m + formulation.gamma * (m @ W - m * diag[:, None, :])
        return W
    if isinstance(formulation, Pe):
        gam = formulation.gamma
        H = 0 if T == 1 else T
        phi = eye.copy()
        acc = np.zeros((B, N, N))
        for t in range(H):
            phi = phi @ M(t)
            acc += gam**t * phi
        m = M(H)
        X = np.linalg.solve(np.swapaxes(eye - gam * m, 1, 2), np.swapaxes(phi @ m, 1, 2))
        acc += gam**H * np.swapaxes(X, 1, 2)
        return (1 - gam) * acc
    raise TypeError("enumerated_values supports Pe, ET and OW")


# --- long-run and series identities ------------------------------------------


def cesaro_limit(M: np.ndarray) -> np.ndarray:
    """Cesaro limit lim (1/T) sum_{t<T} M^t of a stochastic matrix.

    Closed communicating classes get their stationary laws; transient states
    spread over them by absorption probabilities.
    """
    N = M.shape[0]
    n_comp, label = connected_components(M > 0, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(label == c)
        outside = np.ones(N, bool)
        outside[members] = False
        if not np.any(M[np.ix_(members, np.flatnonzero(outside))] > 0):
            closed.append(members)
    L = np.zeros((N, N))
    recurrent = np.zeros(N, bool)
    stat = []
    for members in closed:
        sub = M[np.ix_(members, members)]
        k = len(members)
        A = np.vstack([(sub.T - np.eye(k)), np.ones((1, k))])
        b = np.zeros(k + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        pi = np.clip(pi, 0, None)
        pi /= pi.sum()
        row = np.zeros(N)
        row[members] = pi
        stat.append(row)
        L[members] = row
        recurrent[members] = True
    tr = np.flatnonzero(~recurrent)
    if tr.size:
        Q = M[np.ix_(tr, tr)]
        R = np.stack([M[np.ix_(tr, m)].sum(axis=1) for m in closed], axis=1)
        absorb = np.linalg.solve(np.eye(tr.size) - Q, R)
        L[tr] = absorb @ np.stack(stat)
    return L


def stationary_occupancy(mdp: FiniteMdp, branch, g, s0) -> ValueResult:
    """Long-run fraction of time spent in g from s0 (Cesaro average)."""
    g, s0 = mdp.state_index(g), mdp.state_index(s0)
    total = 0.0
    for w, b in components(branch, g):
        H = b.shape[0] - 1
        phi = np.eye(mdp.n_states)
        for t in range(H):
            phi = phi @ step_matrix(mdp, b, t)
        total += w * (phi @ cesaro_limit(step_matrix(mdp, b, H)))[s0, g]
    return ValueResult(float(total), "class-decomposition")


def geometric_et_value(mdp: FiniteMdp, policy, s0, g, gamma: float, tol: float = 1e-12) -> ValueResult:
    """sum_{t>=1} (1-gamma) gamma^(t-1) J_ET(t), truncated once the tail is below tol."""
    if not 0.0 <= gamma < 1.0 or tol <= 0:
        raise ValueError("need gamma in [0, 1) and tol > 0")
    s0, g = mdp.state_index(s0), mdp.state_index(g)
    cond = g if isinstance(policy, GoalConditionedPolicy) and policy.kind == "goal" else 0
    T = 1 if gamma == 0 else max(1, math.ceil(math.log(tol) / math.log(gamma)))
    total = 0.0
    for w, b in components(policy, cond):
        d = np.zeros(mdp.n_states)
        d[s0] = 1.0
        acc = 0.0
        for t in range(1, T + 1):
            d = d @ step_matrix(mdp, b, t - 1)
            acc += (1 - gamma) * gamma ** (t - 1) * d[g]
        total += w * acc
    return ValueResult(float(total), "truncated-series", tail_bound=gamma**T)


def as_general(mdp: FiniteMdp, formulation) -> General:
    """The (R_t, gamma_t) tables that reproduce Pe, ET or OW."""
    N = mdp.n_states
    eye = np.eye(N)
    if isinstance(formulation, Pe):
        R = np.stack([np.zeros((N, N)), (1 - formulation.gamma) * eye])
        D = np.stack([np.ones((N, N)), np.full((N, N), formulation.gamma)])
        return General(R, D)
    if isinstance(formulation, ET):
        K = formulation.K
        R = np.zeros((K + 2, N, N))
        R[K] = eye
        D = np.ones((K + 2, N, N))
        D[K:] = 0.0
        return General(R, D)
    if isinstance(formulation, OW):
        K, gam = formulation.K, formulation.gamma
        R = np.zeros((K + 2, N, N))
        R[1 : K + 1] = eye
        D = np.zeros((K + 2, N, N))
        D[:K] = gam * (1 - eye)
        D[0] = 1.0
        return General(R, D)
    raise TypeError("as_general supports Pe, ET and OW")
