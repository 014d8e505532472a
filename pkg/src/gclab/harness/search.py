"""Counterexample search over small MDPs, with replayable witnesses."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..control import goal_sensitivity
from ..mdp import build_river_env, dumps_mdp, header_comments, loads_mdp, random_mdp
from ..policy import deterministic_branch, enumerate_reachable_choices, goal_policy_from_branches
from ..values import ET, OW, Pe, enumerated_values, optimal_policy, optimal_values, solve_optimal, value_matrix

TARGETS = ("formulation-disagreement", "ow-control-vs-optimal")
MARGIN = 1e-6


@dataclass
class SearchConfig:
    time_budget: float = 60.0
    max_trials: int = 100_000
    sizes: tuple = (2, 3, 4, 5)
    n_actions: int = 2
    horizons: tuple = (2, 3)
    gammas: tuple = (1.0, 0.9, 0.8, 0.5)
    include_river: bool = True
    margin: float = MARGIN
    per_cell: int = 50


@dataclass
class Witness:
    target: str
    mdp: object
    K: int
    gamma: float
    start: int
    goal: int | None
    certificate: dict = field(default_factory=dict)
    trials: int = 0

    def to_text(self) -> str:
        head = f"witness target={self.target} K={self.K} gamma={self.gamma!r} start={self.mdp.states[self.start]}"
        if self.goal is not None:
            head += f" goal={self.mdp.states[self.goal]}"
        lines = [head] + [f"cert {k}={_fmt(v)}" for k, v in sorted(self.certificate.items())]
        return dumps_mdp(self.mdp, lines)

    def replay(self) -> dict:
        return certify(self.target, self.mdp, self.K, self.gamma, self.start, self.goal)

    @property
    def verified(self) -> bool:
        cert = self.replay()
        return cert is not None and cert["holds"]


@dataclass
class Exhaustion:
    target: str
    trials: int
    elapsed: float
    reason: str


def _fmt(v):
    return format(v, ".12g") if isinstance(v, float) else str(v)


def certify(target, mdp, K, gamma, start, goal=None, margin=MARGIN):
    """Certificate tables for one candidate, with ``holds`` telling whether it is a witness."""
    if target == "formulation-disagreement":
        return _disagreement(mdp, K, gamma, start, goal, margin)
    if target == "ow-control-vs-optimal":
        return _control_vs_optimal(mdp, K, gamma, start, margin)
    raise ValueError(f"unknown target {target!r}")


def _disagreement(mdp, K, gamma, s0, g, margin):
    if not 0 < gamma < 1:
        return None
    forms = {"Pe": Pe(gamma), "ET": ET(K), "OW": OW(K, gamma)}
    sols = {k: solve_optimal(mdp, f, g) for k, f in forms.items()}
    cert = {f"j_star_{k}": sols[k].value(s0) for k in forms}
    holds = True
    for a, b in itertools.permutations(forms, 2):
        v = float(value_matrix(mdp, forms[b], sols[a].branch)[s0, g])
        cert[f"j_{b}_of_{a}_optimal"] = v
        holds &= v < sols[b].value(s0) - margin
    for k in forms:
        cert[f"first_action_{k}"] = mdp.actions[s0][sols[k].first_action(s0)]
    cert["holds"] = bool(holds)
    return cert


def _control_vs_optimal(mdp, K, gamma, s0, margin):
    f = OW(K, gamma)
    N = mdp.n_states
    w = np.full(N, 1.0 / N)
    choices = enumerate_reachable_choices(mdp, s0, K)
    V = enumerated_values(mdp, f, choices)[:, s0, :]  # (B, g)
    score = V - (V @ w)[:, None]  # per-branch contribution to C, times N
    jstar = optimal_values(mdp, f)[s0]
    best = score.max(axis=0)
    pick = np.argmax(score >= best[None, :] - 1e-12, axis=0)
    cstar = float(w @ best)
    j_c = float(w @ V[pick, np.arange(N)])
    # best sensitivity reachable while staying optimal for every goal
    opt_ok = V >= jstar[None, :] - 1e-12
    c_opt = float(w @ np.where(opt_ok, score, -np.inf).max(axis=0))
    cert = {
        "c_star": cstar,
        "j_of_control_maximizer": j_c,
        "j_star": float(jstar.mean()),
        "c_best_optimal": c_opt,
        "c_solver_optimal": goal_sensitivity(mdp, f, optimal_policy(mdp, f), s0).c_value,
    }
    cert["holds"] = bool(cert["j_star"] - j_c > margin and cstar - c_opt > margin)
    return cert


def control_maximizer(mdp, K, gamma, s0):
    """Deterministic OW policy attaining the largest goal-sensitivity from s0."""
    f = OW(K, gamma)
    N = mdp.n_states
    choices = enumerate_reachable_choices(mdp, s0, K)
    V = enumerated_values(mdp, f, choices)[:, s0, :]
    score = V - V.mean(axis=1, keepdims=True)
    pick = np.argmax(score >= score.max(axis=0, keepdims=True) - 1e-12, axis=0)
    return goal_policy_from_branches(mdp, [deterministic_branch(mdp, choices[pick[g]]) for g in range(N)])


def _candidates(target, config, rng):
    if target == "formulation-disagreement" and config.include_river:
        for e1, e2 in ((0.08, 0.2), (0.05, 0.15), (0.1, 0.3)):
            lo, hi = max(math.sqrt(e1), e2), e1 / e2
            if lo < hi:
                yield build_river_env(e1, e2), 2, (lo + hi) / 2, 0, 3, f"river({e1},{e2})"
    gammas = [g for g in config.gammas if target == "ow-control-vs-optimal" or 0 < g < 1]
    # scan (K, gamma) cells in the configured order, a batch of instances each
    cells = [(K, g) for K in config.horizons for g in gammas]
    while True:
        for K, gam in cells:
            for _ in range(config.per_cell):
                n = int(rng.choice(config.sizes))
                b = int(rng.integers(1, min(n, 3) + 1))
                seed = int(rng.integers(2**31 - 1))
                mdp = random_mdp(n, config.n_actions, b, seed)
                for s0 in range(n):
                    g = int(rng.integers(n))
                    yield mdp, K, float(gam), s0, g, f"random_mdp({n},{config.n_actions},{b},seed={seed})"


def counterexample_search(target: str, config: SearchConfig | None = None, seed: int = 0):
    """Seeded search; returns a :class:`Witness` or an :class:`Exhaustion` report."""
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; choose from {TARGETS}")
    config = config or SearchConfig()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    if max(config.sizes) < 2:
        return Exhaustion(target, 0, 0.0, "single-state MDPs admit one behavior; no disagreement possible")
    trials = 0
    for mdp, K, gam, s0, g, _ in _candidates(target, config, rng):
        if trials >= config.max_trials or time.perf_counter() - t0 > config.time_budget:
            break
        trials += 1
        cert = certify(target, mdp, K, gam, s0, g, config.margin)
        if cert is not None and cert["holds"]:
            goal = g if target == "formulation-disagreement" else None
            return Witness(target, mdp, K, gam, s0, goal, cert, trials)
    return Exhaustion(target, trials, time.perf_counter() - t0, "budget exhausted without a witness")


def load_witness(text: str) -> Witness:
    """Parse a serialized witness and replay its certificate."""
    mdp = loads_mdp(text)
    heads = [h for h in header_comments(text) if h.startswith("witness ")]
    if not heads:
        raise ValueError("no witness header")
    fields = dict(kv.split("=", 1) for kv in heads[0].split()[1:])
    K, gam = int(fields["K"]), float(fields["gamma"])
    start = mdp.state_index(fields["start"])
    goal = mdp.state_index(fields["goal"]) if "goal" in fields else None
    cert = certify(fields["target"], mdp, K, gam, start, goal)
    return Witness(fields["target"], mdp, K, gam, start, goal, cert)
