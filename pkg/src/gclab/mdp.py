"""Finite MDPs: representation, validation, builders and the ``mdp v1`` text format."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-9


class MdpParseError(ValueError):
    """Raised for malformed ``mdp v1`` text; carries line, column and token."""

    def __init__(self, line: int, column: int, token: str, message: str):
        self.line = line
        self.column = column
        self.token = token
        super().__init__(f"line {line}, column {column}: {message} (token {token!r})")


class MdpValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


@dataclass(frozen=True)
class Violation:
    kind: str
    state: str
    action: str | None
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


class FiniteMdp:
    """Finite MDP with state-dependent action sets.

    The kernel is stored densely as ``P[s, a, s']`` with ``a`` padded up to
    the largest action set; padded rows are all zero and ``n_actions[s]``
    tells how many leading rows of ``P[s]`` are real actions.

    Parameters
    ----------
    states : sequence of str
        State identifiers, in order.
    actions : sequence of sequence of str
        ``actions[i]`` lists the action identifiers available in state ``i``.
    kernel : array_like or sequence
        Either a padded array of shape ``(N_s, A_max, N_s)`` or a list whose
        ``i``-th entry has shape ``(len(actions[i]), N_s)``.

    No checks are made here; use :func:`validate` or :meth:`checked`.
    """

    def __init__(self, states, actions, kernel):
        self.states = tuple(str(s) for s in states)
        self.actions = tuple(tuple(str(a) for a in acts) for acts in actions)
        n = len(self.states)
        self.n_actions = np.array([len(a) for a in self.actions], dtype=int)
        a_max = int(self.n_actions.max()) if n and self.n_actions.size else 0
        a_max = max(a_max, 1)
        if isinstance(kernel, np.ndarray) and kernel.ndim == 3:
            P = np.array(kernel, dtype=float)
            if P.shape[1] < a_max:
                P = np.concatenate([P, np.zeros((n, a_max - P.shape[1], n))], axis=1)
        else:
            P = np.zeros((n, a_max, n))
            for i, rows in enumerate(kernel):
                rows = np.asarray(rows, dtype=float).reshape(-1, n)
                P[i, : rows.shape[0]] = rows
        self.P = P
        self.P.setflags(write=False)
        self._index = {s: i for i, s in enumerate(self.states)}
        self._action_index = [{a: j for j, a in enumerate(acts)} for acts in self.actions]

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def max_actions(self) -> int:
        return self.P.shape[1]

    @property
    def action_mask(self) -> np.ndarray:
        return np.arange(self.max_actions)[None, :] < self.n_actions[:, None]

    def state_index(self, s) -> int:
        if isinstance(s, (int, np.integer)):
            if not 0 <= s < self.n_states:
                raise KeyError(f"state index {s} out of range")
            return int(s)
        try:
            return self._index[s]
        except KeyError:
            raise KeyError(f"unknown state {s!r}") from None

    def action_index(self, s, a) -> int:
        i = self.state_index(s)
        if isinstance(a, (int, np.integer)):
            if not 0 <= a < self.n_actions[i]:
                raise KeyError(f"action index {a} out of range at {self.states[i]}")
            return int(a)
        try:
            return self._action_index[i][a]
        except KeyError:
            raise KeyError(f"unknown action {a!r} at state {self.states[i]!r}") from None

    def row(self, s, a) -> np.ndarray:
        i = self.state_index(s)
        return self.P[i, self.action_index(i, a)]

    def checked(self) -> "FiniteMdp":
        """Return a copy with rows renormalized, or raise MdpValidationError.

        Rows already within rounding of 1 are kept bit-for-bit so that text
        round trips are stable.
        """
        res = validate(self)
        if not res.ok:
            raise MdpValidationError(res.violations)
        P = np.array(self.P)
        sums = P.sum(axis=2)
        off = self.action_mask & (np.abs(sums - 1.0) > 1e-14)
        P[off] /= sums[off][:, None]
        return FiniteMdp(self.states, self.actions, P)

    def __eq__(self, other):
        return (
            isinstance(other, FiniteMdp)
            and self.states == other.states
            and self.actions == other.actions
            and np.array_equal(self.P, other.P)
        )

    def __hash__(self):
        return hash((self.states, self.actions, self.P.tobytes()))

    def __repr__(self):
        return f"FiniteMdp(n_states={self.n_states}, max_actions={self.max_actions})"


@dataclass(frozen=True)
class GoalDistribution:
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("goal weights must be a probability vector")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "GoalDistribution":
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return len(self.weights)


def goal_weights(p_goal, n: int) -> np.ndarray:
    """Coerce ``None`` / GoalDistribution / array to a weight vector of length n."""
    if p_goal is None:
        return np.full(n, 1.0 / n)
    w = p_goal.weights if isinstance(p_goal, GoalDistribution) else np.asarray(p_goal, float)
    if w.shape != (n,):
        raise ValueError(f"goal distribution has length {w.shape}, expected {n}")
    return w


def validate(mdp: FiniteMdp) -> ValidationResult:
    """List kernel violations; an empty list means the MDP is usable."""
    out = []
    n = mdp.n_states
    for i, s in enumerate(mdp.states):
        if mdp.n_actions[i] == 0:
            out.append(Violation("empty-actions", s, None, f"empty action set at {s}"))
            continue
        if len(set(mdp.actions[i])) != len(mdp.actions[i]):
            out.append(Violation("duplicate-action", s, None, f"duplicate action id at {s}"))
        for j, a in enumerate(mdp.actions[i]):
            row = mdp.P[i, j]
            if not np.all(np.isfinite(row)):
                out.append(Violation("non-finite", s, a, f"non-finite probability at ({s},{a})"))
                continue
            neg = row[row < 0]
            if neg.size:
                out.append(
                    Violation("negative", s, a, f"negative probability {neg.min():g} at ({s},{a})")
                )
            if np.any(row > 1 + ROW_TOL):
                out.append(Violation("above-one", s, a, f"probability above 1 at ({s},{a})"))
            total = row.sum()
            if abs(total - 1.0) > ROW_TOL:
                out.append(Violation("row-sum", s, a, f"row-sum {total:.12g} at ({s},{a})"))
    if len(set(mdp.states)) != n:
        out.append(Violation("duplicate-state", "", None, "duplicate state id"))
    return ValidationResult(tuple(out))


def env_predicates(mdp: FiniteMdp) -> dict:
    mask = mdp.action_mask
    rows = mdp.P[mask]
    deterministic = bool(np.all(np.isclose(rows.max(axis=1), 1.0, atol=1e-12, rtol=0)))
    diag = mdp.P[np.arange(mdp.n_states), :, np.arange(mdp.n_states)]  # (N, A)
    waiting = np.any((np.abs(diag - 1.0) <= 1e-12) & mask, axis=1)
    return {"deterministic": deterministic, "has_waiting_actions": bool(np.all(waiting))}


def build_river_env(eps1: float, eps2: float) -> FiniteMdp:
    """Bridge-or-jump chain with an absorbing goal ``g`` and trap ``T``.

    Walking forward from ``s1`` reaches ``g`` surely at the third step; the
    jump from ``s1`` (``s2``) lands on ``g`` with probability eps1 (eps2)
    and in the trap otherwise.
    """
    for e in (eps1, eps2):
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"jump success probability {e} outside [0, 1]")
    states = ["s1", "s2", "s3", "g", "T"]
    idx = {s: i for i, s in enumerate(states)}

    def pt(**mass):
        v = np.zeros(5)
        for k, p in mass.items():
            v[idx[k]] += p
        return v

    actions = [["a_f", "a_j"], ["a_f", "a_j"], ["a_f"], ["stay"], ["stay"]]
    kernel = [
        [pt(s2=1.0), pt(g=eps1, T=1.0 - eps1)],
        [pt(s3=1.0), pt(g=eps2, T=1.0 - eps2)],
        [pt(g=1.0)],
        [pt(g=1.0)],
        [pt(T=1.0)],
    ]
    return FiniteMdp(states, actions, kernel)


GRID_ACTIONS = ("up", "down", "left", "right", "stay")


def deterministic_grid(n: int) -> FiniteMdp:
    """n-by-n grid, row-major states ``r{i}c{j}``; moves into walls stay put."""
    if n < 1:
        raise ValueError("grid side must be positive")
    N = n * n
    P = np.zeros((N, 5, N))
    moves = [(-1, 0), (1, 0), (0, -1), (0, 1), (0, 0)]
    for r in range(n):
        for c in range(n):
            for a, (dr, dc) in enumerate(moves):
                rr = min(max(r + dr, 0), n - 1)
                cc = min(max(c + dc, 0), n - 1)
                P[r * n + c, a, rr * n + cc] = 1.0
    states = [f"r{r}c{c}" for r in range(n) for c in range(n)]
    return FiniteMdp(states, [GRID_ACTIONS] * N, P)


def build_star_env(n_leaves: int) -> FiniteMdp:
    """Hub ``h`` with a stay action and one move per absorbing leaf.

    Each goal has a branch that visits no other state, so every cross value
    J(s, g, pi_g') with g' != g can be zero.
    """
    if n_leaves < 1:
        raise ValueError("need at least one leaf")
    N = n_leaves + 1
    P = np.zeros((N, N, N))
    P[0, 0, 0] = 1.0
    for k in range(1, N):
        P[0, k, k] = 1.0
        P[k, 0, k] = 1.0
    states = ["h"] + [f"l{k}" for k in range(1, N)]
    actions = [["stay"] + [f"to_l{k}" for k in range(1, N)]] + [["stay"]] * n_leaves
    return FiniteMdp(states, actions, P)


def build_fork_env() -> FiniteMdp:
    """Start ``s`` with two actions leading to two absorbing states."""
    P = np.zeros((3, 2, 3))
    P[0, 0, 1] = P[0, 1, 2] = 1.0
    P[1, 0, 1] = P[2, 0, 2] = 1.0
    return FiniteMdp(["s", "g1", "g2"], [["a1", "a2"], ["stay"], ["stay"]], P)


def random_mdp(n_states: int, n_actions: int, branching: int, seed) -> FiniteMdp:
    """Random kernel: each row puts seeded uniform weights on ``branching`` successors."""
    if n_states < 1 or n_actions < 1 or not 1 <= branching <= n_states:
        raise ValueError("random_mdp parameters out of range")
    rng = np.random.default_rng(seed)
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            succ = rng.choice(n_states, size=branching, replace=False)
            w = rng.uniform(size=branching) + 1e-3
            P[s, a, succ] = w / w.sum()
    states = [f"s{i}" for i in range(n_states)]
    actions = [[f"a{j}" for j in range(n_actions)]] * n_states
    return FiniteMdp(states, actions, P)


def with_waiting_actions(mdp: FiniteMdp) -> FiniteMdp:
    """Append a self-loop action ``wait`` to every state lacking one."""
    preds = env_predicates(mdp)
    if preds["has_waiting_actions"]:
        return mdp
    N = mdp.n_states
    actions = []
    rows = []
    for i in range(N):
        acts = list(mdp.actions[i])
        r = [mdp.P[i, j] for j in range(mdp.n_actions[i])]
        if not any(abs(x[i] - 1.0) <= 1e-12 for x in r):
            name = "wait"
            while name in acts:
                name += "_"
            acts.append(name)
            e = np.zeros(N)
            e[i] = 1.0
            r.append(e)
        actions.append(acts)
        rows.append(np.array(r))
    return FiniteMdp(mdp.states, actions, rows)


def action_independent_mdp(n_states: int, seed) -> FiniteMdp:
    """Two actions per state with identical rows; no policy can steer it."""
    base = random_mdp(n_states, 1, n_states, seed)
    P = np.repeat(base.P, 2, axis=1)
    return FiniteMdp(base.states, [["a0", "a1"]] * n_states, P)


# --- text format ------------------------------------------------------------


def _fmt_prob(p: float) -> str:
    return repr(float(p))


def dumps_mdp(mdp: FiniteMdp, header_comments=()) -> str:
    lines = ["mdp v1"]
    lines += [f"# {c}" for c in header_comments]
    lines.append("states: " + " ".join(mdp.states))
    for i, s in enumerate(mdp.states):
        lines.append(f"actions {s}: " + " ".join(mdp.actions[i]))
    for i, s in enumerate(mdp.states):
        for j, a in enumerate(mdp.actions[i]):
            for k, s2 in enumerate(mdp.states):
                p = mdp.P[i, j, k]
                if p != 0.0:
                    lines.append(f"t {s} {a} {s2} {_fmt_prob(p)}")
    return "\n".join(lines) + "\n"


def loads_mdp(text: str, check: bool = True) -> FiniteMdp:
    """Parse ``mdp v1`` text. Raises MdpParseError or MdpValidationError."""
    lines = text.splitlines()
    if not lines or lines[0].split("#")[0].strip() != "mdp v1":
        tok = lines[0].strip() if lines else ""
        raise MdpParseError(1, 1, tok, "expected header 'mdp v1'")
    states = None
    actions: dict = {}
    trans = []
    for ln, raw in enumerate(lines[1:], start=2):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        col = len(body) - len(body.lstrip()) + 1
        toks = body.split()
        head = toks[0]
        if head == "states:":
            if states is not None:
                raise MdpParseError(ln, col, head, "duplicate states line")
            states = toks[1:]
            if not states:
                raise MdpParseError(ln, col, head, "empty state list")
        elif head == "actions":
            if states is None:
                raise MdpParseError(ln, col, head, "actions before states line")
            if len(toks) < 3 or not toks[1].endswith(":"):
                raise MdpParseError(ln, col, raw.strip(), "expected 'actions <state>: a1 a2 ...'")
            s = toks[1][:-1]
            if s not in states:
                raise MdpParseError(ln, body.find(toks[1]) + 1, s, "unknown state")
            if s in actions:
                raise MdpParseError(ln, body.find(toks[1]) + 1, s, "duplicate actions line")
            actions[s] = toks[2:]
        elif head == "t":
            if len(toks) != 5:
                raise MdpParseError(ln, col, raw.strip(), "expected 't <s> <a> <s2> <prob>'")
            s, a, s2, ps = toks[1:]
            for name in (s, s2):
                if states is None or name not in states:
                    raise MdpParseError(ln, body.find(name) + 1, name, "unknown state")
            if a not in actions.get(s, ()):
                raise MdpParseError(ln, body.find(" " + a + " ") + 2, a, "unknown action")
            try:
                p = float(ps)
            except ValueError:
                raise MdpParseError(ln, body.rfind(ps) + 1, ps, "bad probability") from None
            trans.append((s, a, s2, p, ln))
        else:
            raise MdpParseError(ln, col, head, "unknown directive")
    if states is None:
        raise MdpParseError(len(lines), 1, "", "missing states line")
    for s in states:
        if s not in actions:
            raise MdpValidationError([Violation("empty-actions", s, None, f"empty action set at {s}")])
    sidx = {s: i for i, s in enumerate(states)}
    acts = [actions[s] for s in states]
    aidx = [{a: j for j, a in enumerate(x)} for x in acts]
    n = len(states)
    P = np.zeros((n, max(len(a) for a in acts), n))
    seen = set()
    for s, a, s2, p, ln in trans:
        key = (s, a, s2)
        if key in seen:
            raise MdpParseError(ln, 1, f"{s} {a} {s2}", "duplicate transition")
        seen.add(key)
        P[sidx[s], aidx[sidx[s]][a], sidx[s2]] = p
    mdp = FiniteMdp(states, acts, P)
    return mdp.checked() if check else mdp


def header_comments(text: str) -> list[str]:
    """Comment lines (without '#') that follow the header."""
    out = []
    for raw in text.splitlines()[1:]:
        s = raw.strip()
        if s.startswith("#"):
            out.append(s[1:].strip())
        elif s:
            break
    return out
