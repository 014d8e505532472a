"""Goal- and skill-conditioned policies, goal-to-skill maps, mixtures, enumeration.

A *branch* is the table of one conditioning value: an array of shape
``(H + 1, N_s, A_max)`` whose slot ``t < H`` is used at time ``t`` and whose
last slot is the stationary tail used at every ``t >= H``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._config import CapExceeded, enumeration_cap
from .mdp import FiniteMdp, goal_weights

PROB_TOL = 1e-12


def slot(branch: np.ndarray, t: int) -> np.ndarray:
    return branch[min(t, branch.shape[0] - 1)]


def step_matrix(mdp: FiniteMdp, branch: np.ndarray, t: int) -> np.ndarray:
    """State transition matrix at time t under a branch."""
    return np.einsum("sa,sat->st", slot(branch, t), mdp.P)


class GoalConditionedPolicy:
    """Table ``(n_cond, H + 1, N_s, A_max)`` of action distributions.

    ``conds`` are the conditioning labels: the MDP's states for a
    goal-conditioned policy, skill identifiers for a skill-conditioned one.
    """

    def __init__(self, table, conds, kind: str = "goal"):
        table = np.array(table, dtype=float)
        if table.ndim != 4:
            raise ValueError("policy table must have shape (n_cond, H+1, N_s, A_max)")
        if len(conds) != table.shape[0]:
            raise ValueError("one conditioning label per branch required")
        if kind not in ("goal", "skill"):
            raise ValueError("kind must be 'goal' or 'skill'")
        table.setflags(write=False)
        self.table = table
        self.conds = tuple(str(c) for c in conds)
        self.kind = kind
        self._cidx = {c: i for i, c in enumerate(self.conds)}

    @property
    def horizon(self) -> int:
        return self.table.shape[1] - 1

    @property
    def n_conds(self) -> int:
        return self.table.shape[0]

    def cond_index(self, c) -> int:
        if isinstance(c, (int, np.integer)):
            if not 0 <= c < self.n_conds:
                raise KeyError(f"branch index {c} out of range")
            return int(c)
        try:
            return self._cidx[c]
        except KeyError:
            raise KeyError(f"no branch for {c!r}") from None

    def branch(self, c) -> np.ndarray:
        return self.table[self.cond_index(c)]

    def check(self, mdp: FiniteMdp) -> None:
        """Raise ValueError unless every action vector is a distribution on A(s)."""
        if self.table.shape[2] != mdp.n_states:
            raise ValueError("policy and MDP disagree on the number of states")
        A = self.table.shape[3]
        if A < mdp.max_actions:
            raise ValueError("policy table narrower than the action sets")
        mask = np.zeros((mdp.n_states, A), bool)
        mask[:, : mdp.max_actions] = mdp.action_mask
        if np.any(self.table < 0):
            raise ValueError("negative action probability")
        if np.any(self.table[..., ~mask] != 0):
            raise ValueError("probability on an action outside A(s)")
        if np.any(np.abs(self.table.sum(axis=3) - 1) > PROB_TOL):
            raise ValueError("action probabilities do not sum to 1")

    def __eq__(self, other):
        return (
            isinstance(other, GoalConditionedPolicy)
            and self.conds == other.conds
            and self.kind == other.kind
            and np.array_equal(self.table, other.table)
        )

    def __repr__(self):
        return f"GoalConditionedPolicy(kind={self.kind}, n_conds={self.n_conds}, horizon={self.horizon})"


def goal_policy_from_branches(mdp: FiniteMdp, branches) -> GoalConditionedPolicy:
    """Stack one branch per goal; branches may have different horizons."""
    branches = [np.asarray(b, float) for b in branches]
    if len(branches) != mdp.n_states:
        raise ValueError("need one branch per goal state")
    return GoalConditionedPolicy(_stack(branches), mdp.states, "goal")


def _stack(branches):
    H = max(b.shape[0] for b in branches)
    out = []
    for b in branches:
        if b.shape[0] < H:
            pad = np.repeat(b[-1:], H - b.shape[0], axis=0)
            b = np.concatenate([b[:-1], pad, b[-1:]], axis=0)
        out.append(b)
    return np.stack(out)


def single_branch_policy(branch, label="*") -> GoalConditionedPolicy:
    return GoalConditionedPolicy(np.asarray(branch)[None], [label], "skill")


def deterministic_branch(mdp: FiniteMdp, choices) -> np.ndarray:
    """Branch from integer action choices of shape ``(T, N_s)``.

    ``T == 1`` gives a stationary branch. Otherwise slots ``0..T-1`` are the
    time-indexed choices and the tail takes the lowest-index action.
    """
    choices = np.asarray(choices, dtype=int)
    if choices.ndim == 1:
        choices = choices[None]
    T, N = choices.shape
    if T == 1:
        rows = choices
    else:
        rows = np.concatenate([choices, np.zeros((1, N), int)], axis=0)
    out = np.zeros((rows.shape[0], N, mdp.max_actions))
    out[np.arange(rows.shape[0])[:, None], np.arange(N)[None, :], rows] = 1.0
    return out


@dataclass(frozen=True)
class GoalToSkillMap:
    """Deterministic goal-to-skill assignment.

    ``table`` holds skill indices: shape ``(N_g,)`` in plain mode and
    ``(N_s, N_g)`` (start state, goal) in state-dependent mode.
    """

    table: np.ndarray
    goals: tuple
    skills: tuple

    def __post_init__(self):
        t = np.asarray(self.table, dtype=int)
        if t.ndim not in (1, 2) or t.shape[-1] != len(self.goals):
            raise ValueError("map table must end with one entry per goal")
        if t.size and (t.min() < 0 or t.max() >= len(self.skills)):
            raise ValueError("map sends a goal to a missing skill")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "goals", tuple(self.goals))
        object.__setattr__(self, "skills", tuple(self.skills))

    @property
    def mode(self) -> str:
        return "plain" if self.table.ndim == 1 else "state-dependent"

    @property
    def n_skills(self) -> int:
        return len(self.skills)

    def at(self, s0: int | None = None) -> np.ndarray:
        """Goal-indexed skill indices, evaluated at start s0 when state-dependent."""
        if self.mode == "plain":
            return self.table
        if s0 is None:
            raise ValueError("state-dependent map needs a start state")
        return self.table[int(s0)]

    @classmethod
    def plain(cls, assignment, goals, skills) -> "GoalToSkillMap":
        skills = tuple(skills)
        sidx = {z: i for i, z in enumerate(skills)}
        idx = [a if isinstance(a, (int, np.integer)) else sidx[a] for a in assignment]
        return cls(np.array(idx, int), tuple(goals), skills)


def compose_downstream(skill_policy: GoalConditionedPolicy, f: GoalToSkillMap, s0=None):
    """Goal-conditioned policy whose branch g is the skill branch f(g) (or f(s0, g))."""
    missing = [z for z in f.skills if z not in skill_policy.conds]
    if missing:
        raise KeyError(f"skill policy lacks branches {missing}")
    zmap = np.array([skill_policy.cond_index(z) for z in f.skills], int)
    if f.mode == "state-dependent" and s0 is None:
        raise ValueError("state-dependent map needs a start state")
    idx = zmap[f.at(s0)]
    return GoalConditionedPolicy(skill_policy.table[idx], f.goals, "goal")


class MixturePolicy:
    """Goal-independent policy that draws a latent goal once at t=0.

    Laws of anything observable along a trajectory are the weighted mixture
    of the branch laws; this is not the policy that averages action
    probabilities step by step.
    """

    def __init__(self, policy: GoalConditionedPolicy, weights):
        self.policy = policy
        w = np.asarray(weights, float)
        if w.shape != (policy.n_conds,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("mixture weights must be a distribution over branches")
        self.weights = w

    def components(self):
        return [(w, self.policy.table[i]) for i, w in enumerate(self.weights) if w > 0]


def mixture_policy(gc_policy: GoalConditionedPolicy, p_goal=None) -> MixturePolicy:
    return MixturePolicy(gc_policy, goal_weights(p_goal, gc_policy.n_conds))


def components(policy_like, cond=None):
    """(weight, branch) pairs for a branch array, a policy branch or a mixture."""
    if isinstance(policy_like, MixturePolicy):
        return policy_like.components()
    if isinstance(policy_like, GoalConditionedPolicy):
        return [(1.0, policy_like.branch(cond))]
    return [(1.0, np.asarray(policy_like, float))]


def count_deterministic(mdp: FiniteMdp, horizon: int, stationary_only: bool) -> int:
    per = 1
    for n in mdp.n_actions:
        per *= int(n)
    return per if stationary_only or horizon <= 1 else per ** int(horizon)


def enumerate_choices(mdp: FiniteMdp, horizon: int, stationary_only: bool, cap=None) -> np.ndarray:
    """All deterministic choices as an int array ``(B, T, N_s)``."""
    cap = enumeration_cap(cap)
    count = count_deterministic(mdp, horizon, stationary_only)
    if count > cap:
        raise CapExceeded(count, cap, "policy enumeration")
    T = 1 if stationary_only else max(int(horizon), 1)
    per_state = [range(int(n)) for n in mdp.n_actions]
    one = np.array(list(itertools.product(*per_state)), dtype=int).reshape(-1, mdp.n_states)
    if T == 1:
        return one[:, None, :]
    idx = np.array(list(itertools.product(range(len(one)), repeat=T)), dtype=int)
    return one[idx]


def enumerate_deterministic_policies(mdp: FiniteMdp, horizon: int, stationary_only: bool, cap=None):
    """Every deterministic single-branch policy, lowest indices first."""
    return [
        single_branch_policy(deterministic_branch(mdp, c))
        for c in enumerate_choices(mdp, horizon, stationary_only, cap)
    ]


def uniform_random_policy(mdp: FiniteMdp, seed, domain="goals", horizon: int = 0):
    """Random policy with strictly positive probability on every available action.

    ``domain`` is ``"goals"`` (one branch per state), an int number of skills,
    or a sequence of skill labels.
    """
    if isinstance(domain, str) and domain == "goals":
        conds, kind = mdp.states, "goal"
    elif isinstance(domain, (int, np.integer)):
        conds, kind = [f"z{i}" for i in range(int(domain))], "skill"
    else:
        conds, kind = list(domain), "skill"
    rng = np.random.default_rng(seed)
    shape = (len(conds), horizon + 1, mdp.n_states, mdp.max_actions)
    w = rng.uniform(0.05, 1.0, size=shape) * mdp.action_mask
    w /= w.sum(axis=3, keepdims=True)
    return GoalConditionedPolicy(w, conds, kind)


def random_deterministic_policy(mdp: FiniteMdp, seed, domain="goals", horizon: int = 0):
    rng = np.random.default_rng(seed)
    if isinstance(domain, str) and domain == "goals":
        conds, kind = mdp.states, "goal"
    elif isinstance(domain, (int, np.integer)):
        conds, kind = [f"z{i}" for i in range(int(domain))], "skill"
    else:
        conds, kind = list(domain), "skill"
    T = max(horizon, 1)
    branches = []
    for _ in conds:
        ch = np.floor(rng.uniform(size=(T, mdp.n_states)) * mdp.n_actions[None, :]).astype(int)
        branches.append(deterministic_branch(mdp, ch))
    return GoalConditionedPolicy(np.stack(branches), conds, kind)


def goal_independent_policy(mdp: FiniteMdp, branch) -> GoalConditionedPolicy:
    branch = np.asarray(branch, float)
    return GoalConditionedPolicy(np.repeat(branch[None], mdp.n_states, axis=0), mdp.states, "goal")


# --- trajectory laws --------------------------------------------------------


def state_path_law(mdp: FiniteMdp, policy_like, s0: int, K: int, cond=None, cap=None) -> dict:
    """Exact law of (S_1, ..., S_K) from s0 as ``{path tuple: prob}``.

    Mixtures are handled by carrying the latent branch index along the path
    and summing it out at the end.
    """
    cap = enumeration_cap(cap)
    if isinstance(policy_like, MixturePolicy):
        tables = policy_like.policy.table
        frontier = {(i, ()): w for i, w in enumerate(policy_like.weights) if w > 0}
    else:
        tables = [components(policy_like, cond)[0][1]]
        frontier = {(0, ()): 1.0}
    for t in range(K):
        mats = [step_matrix(mdp, b, t) for b in tables]
        nxt = {}
        for (i, path), p in frontier.items():
            s = path[-1] if path else s0
            row = mats[i][s]
            for s2 in np.flatnonzero(row):
                key = (i, path + (int(s2),))
                nxt[key] = nxt.get(key, 0.0) + p * row[s2]
        if len(nxt) > cap:
            raise CapExceeded(len(nxt), cap, "path enumeration")
        frontier = nxt
    out: dict = {}
    for (_, path), p in frontier.items():
        out[path] = out.get(path, 0.0) + p
    return out


def trajectory_law(mdp: FiniteMdp, branch: np.ndarray, s0: int, K: int, cap=None) -> dict:
    """Exact law of ((A_0, S_1), ..., (A_{K-1}, S_K)) from s0 under one branch."""
    cap = enumeration_cap(cap)
    frontier = {(): 1.0}
    for t in range(K):
        pi = slot(branch, t)
        nxt = {}
        for path, p in frontier.items():
            s = path[-1][1] if path else s0
            for a in np.flatnonzero(pi[s]):
                row = mdp.P[s, a]
                for s2 in np.flatnonzero(row):
                    nxt[path + ((int(a), int(s2)),)] = p * pi[s, a] * row[s2]
        if len(nxt) > cap:
            raise CapExceeded(len(nxt), cap, "trajectory enumeration")
        frontier = nxt
    return frontier


# --- text format ------------------------------------------------------------


def dumps_policy(mdp: FiniteMdp, policy: GoalConditionedPolicy) -> str:
    lines = ["policy v1"]
    H = policy.horizon
    for c, label in enumerate(policy.conds):
        for k in range(H + 1):
            tt = "*" if k == H else str(k)
            for i, s in enumerate(mdp.states):
                for j, a in enumerate(mdp.actions[i]):
                    p = policy.table[c, k, i, j]
                    if p != 0.0:
                        lines.append(f"p {label} {tt} {s} {a} {float(p)!r}")
    return "\n".join(lines) + "\n"


def loads_policy(text: str, mdp: FiniteMdp, kind: str | None = None) -> GoalConditionedPolicy:
    """Parse ``policy v1``; branches keep first-appearance order.

    If every label is a state the result is goal-conditioned with branches in
    state order (every state must then have a branch).
    """
    from .mdp import MdpParseError

    lines = text.splitlines()
    if not lines or lines[0].split("#")[0].strip() != "policy v1":
        raise MdpParseError(1, 1, lines[0].strip() if lines else "", "expected header 'policy v1'")
    entries = []
    conds: list = []
    max_t = -1
    for ln, raw in enumerate(lines[1:], start=2):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        toks = body.split()
        if toks[0] != "p" or len(toks) != 6:
            raise MdpParseError(ln, 1, raw.strip(), "expected 'p <cond> <time|*> <state> <action> <prob>'")
        _, c, tt, s, a, ps = toks
        if tt != "*":
            try:
                ti = int(tt)
            except ValueError:
                raise MdpParseError(ln, body.find(" " + tt) + 2, tt, "bad time slot") from None
            if ti < 0:
                raise MdpParseError(ln, body.find(" " + tt) + 2, tt, "bad time slot")
            max_t = max(max_t, ti)
        else:
            ti = None
        try:
            si = mdp.state_index(s)
            ai = mdp.action_index(si, a)
        except KeyError as e:
            raise MdpParseError(ln, 1, f"{s} {a}", str(e)) from None
        try:
            p = float(ps)
        except ValueError:
            raise MdpParseError(ln, body.rfind(ps) + 1, ps, "bad probability") from None
        if c not in conds:
            conds.append(c)
        entries.append((c, ti, si, ai, p, ln))
    if kind is None:
        kind = "goal" if conds and set(conds) <= set(mdp.states) else "skill"
    if kind == "goal":
        missing = [s for s in mdp.states if s not in conds]
        if missing:
            raise ValueError(f"goal-conditioned policy lacks branches for {missing}")
        conds = list(mdp.states)
    H = max_t + 1
    table = np.zeros((len(conds), H + 1, mdp.n_states, mdp.max_actions))
    cidx = {c: i for i, c in enumerate(conds)}
    for c, ti, si, ai, p, ln in entries:
        k = H if ti is None else ti
        table[cidx[c], k, si, ai] = p
    pol = GoalConditionedPolicy(table, conds, kind)
    pol.check(mdp)
    return pol


def reachable_sets(mdp: FiniteMdp, s0: int, K: int) -> list:
    """States reachable from s0 at each time 0..K-1 under some action sequence."""
    support = mdp.P.sum(axis=1) > 0
    cur = np.zeros(mdp.n_states, bool)
    cur[s0] = True
    out = []
    for _ in range(K):
        out.append(np.flatnonzero(cur))
        cur = support[cur].any(axis=0)
    return out


def count_reachable_choices(mdp: FiniteMdp, s0: int, K: int) -> int:
    count = 1
    for states in reachable_sets(mdp, s0, K):
        for s in states:
            count *= int(mdp.n_actions[s])
    return count


def enumerate_reachable_choices(mdp: FiniteMdp, s0: int, K: int, cap=None) -> np.ndarray:
    """Deterministic time-indexed choices ``(B, K, N)`` that differ only where it matters.

    Only decisions at (t, s) with s reachable from s0 at time t vary; all
    others are pinned to action 0. Any K-step quantity from s0 is therefore
    covered exactly by this smaller set.
    """
    cap = enumeration_cap(cap)
    count = count_reachable_choices(mdp, s0, K)
    if count > cap:
        raise CapExceeded(count, cap, "policy enumeration")
    slots = [(t, s) for t, states in enumerate(reachable_sets(mdp, s0, K)) for s in states]
    grids = [range(int(mdp.n_actions[s])) for _, s in slots]
    combos = np.array(list(itertools.product(*grids)), dtype=int).reshape(-1, len(slots))
    out = np.zeros((combos.shape[0], K, mdp.n_states), int)
    for j, (t, s) in enumerate(slots):
        out[:, t, s] = combos[:, j]
    return out
