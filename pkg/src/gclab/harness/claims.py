"""Executable checks, one function per registered claim.

Each check builds a seeded instance, evaluates both sides of the claim with
the library and records every comparison in a :class:`Tally`. The returned
record carries the comparison with the least slack.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from ..control import (
    check_consistency,
    goal_sensitivity,
    goal_sensitivity_all,
    klyubin_empowerment,
    objective_controllability,
    one_step_controllability,
    search_max_incontrol,
    sequence_channel,
)
from ..info import (
    FirstVisitVector,
    StatePathK,
    TrajectoryK,
    behavior_joint,
    binary_entropy,
    decoder_errors,
    entropy,
    first_visit_outcome,
    goal_behavior_mi,
    mutual_information,
    ow_delta_closed_form,
    ow_upper_bound,
    phi_down,
    phi_up,
    support_gap,
)
from ..mdp import (
    build_fork_env,
    build_river_env,
    build_star_env,
    deterministic_grid,
    env_predicates,
    random_mdp,
    with_waiting_actions,
)
from ..misl import consistent_mapping, misl_gap
from ..policy import (
    GoalConditionedPolicy,
    GoalToSkillMap,
    compose_downstream,
    deterministic_branch,
    goal_independent_policy,
    goal_policy_from_branches,
    random_deterministic_policy,
    step_matrix,
    uniform_random_policy,
)
from ..values import (
    ET,
    OW,
    General,
    Pe,
    SGammaPlus,
    SK,
    cesaro_limit,
    cross_values,
    first_step_q,
    first_visit_matrix,
    geometric_et_value,
    goal_values,
    occupancy_matrix,
    optimal_policy,
    optimal_values,
    solve_optimal,
    test_time_performance,
    value_matrix,
)
from ._common import Skip, Tally, cell_rng, random_instance, seeded_goal_weights, sub_seed

EXACT = 1e-12
LOOSE = 1e-10


def _state_spec(f):
    return SGammaPlus(f.gamma) if isinstance(f, Pe) else SK(f.K)


def _horizon(f):
    return f.K if isinstance(f, (ET, OW)) else 0


def _consistent_by_mapping(mdp, f, skills, s0):
    """Goal policy at s0 built by sending each goal to its best skill."""
    return compose_downstream(skills, consistent_mapping(mdp, f, skills), s0)


def _random_skills(mdp, rng, horizon, n_z=None):
    n_z = int(rng.integers(1, mdp.n_states + 1)) if n_z is None else n_z
    return uniform_random_policy(mdp, sub_seed(rng), n_z, horizon=horizon)


def _deterministic_family(rng, n_states):
    kind = int(rng.integers(3))
    if kind < 2:
        n = 2 + kind
        return deterministic_grid(n), f"grid({n})"
    seed = sub_seed(rng)
    return random_mdp(n_states, 2, 1, seed), f"random_mdp({n_states},2,1,seed={seed})"


# --- formulations -----------------------------------------------------------


def check_p1(config, seed):
    rng = cell_rng("P1", seed)
    if {"eps1", "eps2", "gamma"} <= set(config):
        e1, e2, gam = float(config["eps1"]), float(config["eps2"]), float(config["gamma"])
    elif seed == 0:
        e1, e2, gam = 0.08, 0.2, 0.35
    else:
        # eps1 < eps2 < sqrt(eps1) keeps the window (max(sqrt eps1, eps2), eps1/eps2) open
        e1 = rng.uniform(0.02, 0.3)
        e2 = e1 + (math.sqrt(e1) - e1) * rng.uniform(0.1, 0.9)
        lo, hi = max(math.sqrt(e1), e2), e1 / e2
        gam = lo + (hi - lo) * rng.uniform(0.1, 0.9)
    K = int(config.get("K", 2))
    iid = f"river({e1:.6g},{e2:.6g}) gamma={gam:.6g} K={K}"
    t = Tally("P1", iid, seed)
    mdp = build_river_env(e1, e2)
    forms = {"Pe": Pe(gam), "ET": ET(K), "OW": OW(K, gam)}
    sols = {k: solve_optimal(mdp, f, "g") for k, f in forms.items()}
    s1, s2 = mdp.state_index("s1"), mdp.state_index("s2")
    a_f, a_j = 0, 1
    t.eq(sols["Pe"].first_action(s1), a_f, 0, "Pe first action at s1")
    t.eq(sols["ET"].first_action(s1), a_f, 0, "ET first action at s1")
    t.eq(sols["ET"].action(1, s2), a_j, 0, "ET action at (t=1, s2)")
    t.eq(sols["OW"].first_action(s1), a_j, 0, "OW first action at s1")
    t.eq(sols["Pe"].value(s1), gam**2, EXACT, "Pe value gamma^2")
    t.eq(sols["ET"].value(s1), e2, EXACT, "ET value eps2")
    t.eq(sols["OW"].value(s1), e1, EXACT, "OW value eps1")
    g = mdp.state_index("g")
    for a, b in itertools.permutations(forms, 2):
        v = value_matrix(mdp, forms[b], sols[a].branch)[s1, g]
        t.le(v, sols[b].value(s1) - 1e-9, 0, f"{a}-optimal branch under {b}")
    names = {k: mdp.actions[s1][sols[k].first_action(s1)] for k in forms}
    t.note("first actions " + " ".join(f"{k}={v}" for k, v in names.items()))
    return t.result()


def check_a1(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("A1", seed)
    t = Tally("A1", iid, seed)
    pol = uniform_random_policy(mdp, sub_seed(rng))
    N = mdp.n_states
    for g in range(N):
        b = pol.branch(g)
        M = step_matrix(mdp, b, 0)
        L = cesaro_limit(M)
        t.le(np.abs(L @ M - L).max(), 0, LOOSE, "limit is invariant")
        t.le(np.abs(M @ L - L).max(), 0, LOOSE, "limit is harmonic")
        t.le(np.abs(L @ L - L).max(), 0, LOOSE, "limit is idempotent")
        D = np.linalg.inv(np.eye(N) - M + L) - L
        scale = 1.0 + np.abs(D).sum(axis=1).max()
        for gam in (0.999, 1 - 1e-6):
            J = occupancy_matrix(mdp, b, gam)[:, g]
            tol = 10 * (1 - gam) * scale
            t.le(np.abs(J - L[:, g]).max(), tol, 0, f"Pe({gam}) vs long-run occupancy")
    return t.result()


def check_a2(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("A2", seed)
    t = Tally("A2", iid, seed)
    pol = uniform_random_policy(mdp, sub_seed(rng), horizon=2)
    for gam in (0.3, 0.9):
        J = goal_values(mdp, Pe(gam), pol)
        for s in range(mdp.n_states):
            for g in range(mdp.n_states):
                v = geometric_et_value(mdp, pol, s, g, gam, tol=1e-13).value
                t.eq(J[s, g], v, 1e-9, f"gamma={gam} s={s} g={g}")
    return t.result()


def _hitting_moments(M, g):
    """(W-ready data) hit-surely set A, E[T] and E[T^2] on A for first visits to g."""
    N = M.shape[0]
    can = np.zeros(N, bool)
    can[M[:, g] > 0] = True
    while True:
        nxt = can | (M[:, can] > 0).any(axis=1)
        if np.array_equal(nxt, can):
            break
        can = nxt
    R = np.flatnonzero(can)
    Q = M[np.ix_(R, R)].copy()
    if g in R:
        Q[:, np.flatnonzero(R == g)[0]] = 0.0
    h = np.linalg.solve(np.eye(len(R)) - Q, M[R, g])
    A = R[h >= 1 - 1e-12]
    Q = M[np.ix_(A, A)].copy()
    if g in A:
        Q[:, np.flatnonzero(A == g)[0]] = 0.0
    one = np.ones(len(A))
    m1 = np.linalg.solve(np.eye(len(A)) - Q, one)
    m2 = np.linalg.solve(np.eye(len(A)) - Q, one + 2 * Q @ m1)
    return A, m1, m2


def check_a3(config, seed):
    rng = cell_rng("A3", seed)
    if seed % 2 == 0:
        n = 2 + int(rng.integers(2))
        mdp, iid = deterministic_grid(n), f"grid({n})"
    else:
        mdp, iid = random_instance(config, seed)
    eps = float(config.get("eps", 1e-3))
    gam = 1 - eps
    t = Tally("A3", iid + f" eps={eps:g}", seed)
    pol = uniform_random_policy(mdp, sub_seed(rng))
    N = mdp.n_states
    for g in range(N):
        M = step_matrix(mdp, pol.branch(g), 0)
        Mk = M.copy()
        Mk[:, g] = 0.0
        W = np.linalg.solve(np.eye(N) - gam * Mk, M[:, g])
        A, m1, m2 = _hitting_moments(M, g)
        for i, s in enumerate(A):
            gap = W[s] - (1 - eps * (m1[i] - 1))
            t.ge(gap, 0, EXACT, f"first-order lower bound s={s} g={g}")
            t.le(gap, eps**2 * (m2[i] - 3 * m1[i] + 2) / 2, EXACT, f"second-order remainder s={s} g={g}")
    return t.result()


def check_a4(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("A4", seed)
    gam = float(rng.uniform(0.1, 1.0))
    K = int(rng.integers(2, 4))
    t = Tally("A4", iid + f" gamma={gam:.4g} K={K}", seed)
    forms = [Pe(0.0), ET(1), OW(1, gam), OW(K, 0.0)]
    for g in range(mdp.n_states):
        Qs = [first_step_q(mdp, f, g) for f in forms]
        fin = np.isfinite(Qs[0])
        sets = [Q >= Q.max(axis=1, keepdims=True) - EXACT for Q in Qs]
        for f, Q, S in zip(forms[1:], Qs[1:], sets[1:]):
            t.le(np.abs(Q[fin] - Qs[0][fin]).max(), 0, EXACT, f"one-step action values {f} g={g}")
            t.eq(int(np.sum(S != sets[0])), 0, 0, f"argmax sets {f} g={g}")
    pol = uniform_random_policy(mdp, sub_seed(rng), horizon=2)
    base = goal_values(mdp, forms[0], pol)
    for f in forms[1:]:
        t.le(np.abs(goal_values(mdp, f, pol) - base).max(), 0, EXACT, f"policy values {f}")
    return t.result()


def check_a5(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("A5", seed)
    t = Tally("A5", iid, seed)
    pol = uniform_random_policy(mdp, sub_seed(rng))
    for gam in (0.3, 0.9):
        K = math.ceil(math.log(1e-13 * (1 - gam)) / math.log(gam))
        trunc = gam**K
        for g in range(mdp.n_states):
            b = pol.branch(g)
            W = first_visit_matrix(mdp, b, K, gam)
            Pv = occupancy_matrix(mdp, b, gam)
            renewal = (1 - gam) * W[:, g] / (1 - gam * W[g, g])
            t.le(np.abs(Pv[:, g] - renewal).max(), trunc / (1 - gam), EXACT,
                 f"renewal form gamma={gam} g={g}")
        pe_opt = optimal_policy(mdp, Pe(gam))
        ow_star = optimal_values(mdp, OW(K, gam))
        regret = ow_star - goal_values(mdp, OW(K, gam), pe_opt)
        t.ge(regret.min(), 0, EXACT, f"Pe-optimal never beats OW optimum gamma={gam}")
        t.le(regret.max(), trunc, EXACT, f"Pe-optimal is OW-optimal up to truncation gamma={gam}")
    t.note("OW(infinity) truncated at gamma^K <= 1e-13 (1 - gamma)")
    return t.result()


def _shortest_path_choices(mdp, g):
    """Lowest-index action minimizing the number of steps to stand on g (t >= 1)."""
    N = mdp.n_states
    succ = np.argmax(mdp.P, axis=2)
    big = 10 * N
    dist = np.full(N, big)
    for _ in range(N + 1):
        after = np.where(np.arange(N) == g, 0, dist)
        cand = np.where(mdp.action_mask, 1 + after[succ], big + 1)
        dist = np.minimum(cand.min(axis=1), big)
    after = np.where(np.arange(N) == g, 0, dist)
    cand = np.where(mdp.action_mask, after[succ], big + 1)
    return np.argmin(cand, axis=1)


def check_a6(config, seed):
    n = int(config.get("grid", 1 + seed % 4))
    mdp = deterministic_grid(n)
    t = Tally("A6", f"grid({n})", seed)
    branches = [deterministic_branch(mdp, _shortest_path_choices(mdp, g)[None]) for g in range(mdp.n_states)]
    sp = goal_policy_from_branches(mdp, branches)
    for gam in (0.5, 0.9):
        f = Pe(gam)
        t.le(np.abs(goal_values(mdp, f, sp) - optimal_values(mdp, f)).max(), 0, EXACT, f"Pe({gam})")
        for K in (3, 6):
            f = OW(K, gam)
            t.le(np.abs(goal_values(mdp, f, sp) - optimal_values(mdp, f)).max(), 0, EXACT, f"OW({K},{gam})")
    return t.result()


def check_a7(config, seed):
    rng = cell_rng("A7", seed)
    if seed % 2 == 0:
        n = 2 + int(rng.integers(2))
        mdp, iid = deterministic_grid(n), f"grid({n})"
    else:
        base, iid = random_instance(config, seed)
        mdp, iid = with_waiting_actions(base), iid + "+wait"
    t = Tally("A7", iid, seed)
    if not env_predicates(mdp)["has_waiting_actions"]:
        raise Skip("no-waiting-action", iid)
    for K in (1, 2, 3):
        ow = optimal_values(mdp, OW(K, 1.0))
        et = optimal_values(mdp, ET(K))
        t.le(np.abs(ow - et).max(), 0, EXACT, f"optimal values K={K}")
        shared = optimal_policy(mdp, ET(K))
        gap = (goal_values(mdp, OW(K, 1.0), shared) - ow).min()
        t.ge(gap, 0, EXACT, f"ET-optimal is OW-optimal K={K}")
    return t.result()


# --- goal-sensitivity and performance ------------------------------------------


def _t1_instance(config, seed, claim):
    rng = cell_rng(claim, seed)
    cfg = dict(config)
    cfg.setdefault("n_states", 3 + seed % 3)
    mdp, iid = random_instance(cfg, seed)
    return mdp, iid, rng


def check_t11(config, seed):
    mdp, iid, rng = _t1_instance(config, seed, "T1.1")
    t = Tally("T1.1", iid, seed)
    N = mdp.n_states
    pol = uniform_random_policy(mdp, sub_seed(rng), horizon=int(rng.integers(0, 3)))
    for f in (Pe(0.3), Pe(0.9), ET(1), ET(2), ET(3)):
        J = goal_values(mdp, f, pol).mean(axis=1)
        C = goal_sensitivity_all(mdp, f, pol)
        for s in range(N):
            t.eq(J[s] - C[s], 1.0 / N, LOOSE, f"{f} s={s}")
    return t.result()


def check_t12(config, seed):
    mdp, iid, rng = _t1_instance(config, seed, "T1.2")
    t = Tally("T1.2", iid, seed)
    N = mdp.n_states
    pol = uniform_random_policy(mdp, sub_seed(rng), horizon=int(rng.integers(0, 3)))
    forms = [OW(K, g) for K in (1, 2, 3) for g in (0.5, 0.9, 1.0)]
    H = 2
    R = rng.uniform(0, 1, size=(H + 1, N, N))
    D = rng.uniform(0, 0.9, size=(H + 1, N, N))
    forms.append(General(R, D))
    for f in forms:
        J = goal_values(mdp, f, pol).mean(axis=1)
        C = goal_sensitivity_all(mdp, f, pol)
        name = "General" if isinstance(f, General) else str(f)
        for s in range(N):
            t.ge(J[s], N / (N - 1) * C[s], EXACT, f"{name} s={s}")
    # disjoint reaching: every branch avoids every other goal from the hub
    star = build_star_env(N - 1)
    f = OW(2, 0.8)
    opt = optimal_policy(star, f)
    J = test_time_performance(star, f, opt, 0)
    C = goal_sensitivity(star, f, opt, 0).c_value
    t.eq(J, N / (N - 1) * C, EXACT, f"equality on star({N - 1}) from hub")
    return t.result()


def check_t13(config, seed):
    cfg = dict(config)
    cfg.setdefault("n_states", 4)
    mdp, iid = random_instance(cfg, seed)
    rng = cell_rng("T1.3", seed)
    K = int(rng.integers(2, 4))
    gam = float(rng.choice([0.9, 1.0]))
    s0 = int(rng.integers(mdp.n_states))
    f = OW(K, gam)
    N = mdp.n_states
    t = Tally("T1.3", iid + f" {f} start={s0}", seed)
    pol, cstar, exhaustive = search_max_incontrol(mdp, f, s0, cap=config.get("cap"))
    t.partial = not exhaustive
    jstar = optimal_values(mdp, f)[s0].mean()
    jc = test_time_performance(mdp, f, pol, s0)
    t.ge(jstar - jc, 0, EXACT, "regret is non-negative")
    t.le(jstar - jc, 1 - N / (N - 1) * cstar, EXACT, "regret bound")
    c_opt = goal_sensitivity(mdp, f, optimal_policy(mdp, f), s0).c_value
    t.ge(cstar, c_opt, EXACT, "controllability dominates the optimal policy's sensitivity")
    if not exhaustive:
        t.note("controllability from coordinate ascent (lower bound)")
    return t.result()


# --- goal-behavior information --------------------------------------------------


def _t2_policies(mdp, f, rng, s0):
    yield "random", uniform_random_policy(mdp, sub_seed(rng), horizon=_horizon(f))
    skills = _random_skills(mdp, rng, _horizon(f))
    yield f"mapped({skills.n_conds} skills)", _consistent_by_mapping(mdp, f, skills, s0)


def check_t21(config, seed):
    mdp, iid, rng = _t1_instance(config, seed, "T2.1")
    t = Tally("T2.1", iid, seed)
    N = mdp.n_states
    for f in (Pe(0.3), Pe(0.9), ET(1), ET(2)):
        for s0 in range(N):
            for name, pol in _t2_policies(mdp, f, rng, s0):
                mi = goal_behavior_mi(mdp, pol, s0, None, _state_spec(f))
                c = goal_sensitivity(mdp, f, pol, s0).c_value
                t.ge(mi, phi_down(N, 1.0 / N + c), LOOSE, f"{f} {name} s={s0}")
    return t.result()


def check_t22(config, seed):
    mdp, iid, rng = _t1_instance(config, seed, "T2.2")
    t = Tally("T2.2", iid, seed)
    N = mdp.n_states
    for f in (Pe(0.3), Pe(0.9), ET(1), ET(2)):
        for s0 in range(N):
            skills = _random_skills(mdp, rng, _horizon(f))
            pol = _consistent_by_mapping(mdp, f, skills, s0)
            if not check_consistency(mdp, f, pol, "plain", starts=[s0]).passed:
                t.note(f"{f} s={s0} not consistent")
                continue
            mi = goal_behavior_mi(mdp, pol, s0, None, _state_spec(f))
            x = 1.0 / N + goal_sensitivity(mdp, f, pol, s0).c_value
            t.le(mi, phi_up(N, x), LOOSE, f"{f} mapped({skills.n_conds}) s={s0}")
    return t.result()


def check_t23(config, seed):
    mdp, iid, rng = _t1_instance(config, seed, "T2.3")
    t = Tally("T2.3", iid, seed)
    for K in (1, 2, 3):
        gam = float(rng.choice([0.5, 0.8, 1.0]))
        f = OW(K, gam)
        s0 = int(rng.integers(mdp.n_states))
        for name, pol in _t2_policies(mdp, f, rng, s0):
            mi = goal_behavior_mi(mdp, pol, s0, None, FirstVisitVector(K, gam))
            c = goal_sensitivity(mdp, f, pol, s0).c_value
            t.ge(mi, 2 * c * c, LOOSE, f"{f} {name} s={s0}")
    return t.result()


def _divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def _misl_gap_checks(t, mdp, rng, p_goal=None, equal_preimages=True):
    N = mdp.n_states
    if rng.uniform() < 0.5:
        spec, H = SGammaPlus(float(rng.choice([0.3, 0.7]))), 0
    else:
        K = int(rng.integers(1, 3))
        spec, H = SK(K), K
    s0 = int(rng.integers(N))
    skills = _random_skills(mdp, rng, H)
    assign = rng.integers(skills.n_conds, size=N)
    fmap = GoalToSkillMap.plain(assign, mdp.states, skills.conds)
    gap, bound = misl_gap(mdp, skills, fmap, s0, p_goal, spec)
    t.le(gap, bound.bound, LOOSE, f"{spec} {skills.n_conds} skills s={s0} delta={bound.delta:.3g}")
    if equal_preimages:
        d = int(rng.choice(_divisors(N)))
        skills = _random_skills(mdp, rng, H, n_z=d)
        assign = rng.permutation(np.repeat(np.arange(d), N // d))
        fmap = GoalToSkillMap.plain(assign, mdp.states, skills.conds)
        gap, bound = misl_gap(mdp, skills, fmap, s0, None, spec)
        t.eq(bound.delta, 0.0, 0, f"uniform skill law with {d} skills")
        t.eq(gap, 0.0, EXACT, f"equal preimages {spec} {d} skills s={s0}")


def check_p3(config, seed):
    mdp, iid, rng = _t1_instance(config, seed, "P3")
    t = Tally("P3", iid, seed)
    _misl_gap_checks(t, mdp, rng)
    return t.result()


# --- controllability and empowerment ------------------------------------------


def check_b1(config, seed):
    mdp, iid = random_instance(config, seed)
    t = Tally("B1", iid, seed)
    for s in range(mdp.n_states):
        a = one_step_controllability(mdp, s)
        b = objective_controllability(mdp, ET(1), s).value
        t.eq(a, b, EXACT, f"s={s}")
    return t.result()


def check_b2(config, seed):
    rng = cell_rng("B2", seed)
    mdp, iid = _deterministic_family(rng, int(config.get("n_states", 4)))
    t = Tally("B2", iid, seed)
    N = mdp.n_states
    for K in (1, 2):
        for s in range(N):
            emp = klyubin_empowerment(mdp, s, K, method="blahut-arimoto")
            c = objective_controllability(mdp, ET(K), s).value
            t.eq(emp.value, math.log(1 + N * c), LOOSE, f"K={K} s={s}")
    return t.result()


def check_c1(config, seed):
    rng = cell_rng("C1", seed)
    family = int(config.get("family", seed % 3))
    if family == 2:
        return _fork_strictness(seed)
    if family == 0:
        mdp, iid = random_instance(config, seed)
        K = int(config.get("K", 1))
    else:
        mdp, iid = _deterministic_family(rng, int(config.get("n_states", 4)))
        K = int(config.get("K", 2))
    iid += f" K={K}"
    if K >= 2 and not env_predicates(mdp)["deterministic"]:
        # goal-conditioned feedback can beat any open-loop sequence here
        raise Skip("closed-loop-stochastic", iid)
    t = Tally("C1", iid, seed)
    f = ET(K)
    for s0 in range(mdp.n_states):
        emp = klyubin_empowerment(mdp, s0, K, method="blahut-arimoto")
        pols = [
            ("random", uniform_random_policy(mdp, sub_seed(rng), horizon=K)),
            ("deterministic", random_deterministic_policy(mdp, sub_seed(rng), horizon=K)),
            ("optimal", optimal_policy(mdp, f)),
            ("mapped", _consistent_by_mapping(mdp, f, _random_skills(mdp, rng, K), s0)),
        ]
        for name, pol in pols:
            mi = goal_behavior_mi(mdp, pol, s0, None, SK(K))
            t.le(mi, emp.upper, LOOSE, f"{name} s={s0}")
    return t.result()


def _fork_strictness(seed):
    mdp = build_fork_env()
    t = Tally("C1", "fork K=1", seed)
    emp = klyubin_empowerment(mdp, 0, 1, method="blahut-arimoto").value
    t.eq(emp, math.log(2), LOOSE, "capacity log 2")
    best = 0.0
    for acts in itertools.product(range(2), repeat=mdp.n_states):
        ch = np.zeros((mdp.n_states, 1, mdp.n_states), int)
        ch[:, 0, 0] = acts
        pol = goal_policy_from_branches(mdp, [deterministic_branch(mdp, c) for c in ch])
        best = max(best, goal_behavior_mi(mdp, pol, 0, None, SK(1)))
    t.eq(best, binary_entropy(1 / 3), LOOSE, "max goal MI h(1/3)")
    t.ge(emp - best, 0.05, 0, "strict gap")
    return t.result()


def check_c2(config, seed):
    rng = cell_rng("C2", seed)
    mdp, iid = _deterministic_family(rng, int(config.get("n_states", 4)))
    N = mdp.n_states
    s0 = int(rng.integers(N))
    t = Tally("C2", iid + f" start={s0}", seed)
    for K in (1, 2):
        c = objective_controllability(mdp, ET(K), s0).value
        ends = np.flatnonzero(sequence_channel(mdp, s0, K).sum(axis=0) > 0)
        r = len(ends)
        branches = [solve_optimal(mdp, ET(K), int(ends[i % r])).branch for i in range(N)]
        mi = goal_behavior_mi(mdp, goal_policy_from_branches(mdp, branches), s0, None, SK(K))
        sizes = np.bincount(np.arange(N) % r) / N
        t.eq(mi, entropy(sizes), LOOSE, f"balanced assignment K={K}")
        if r**N <= 20000:
            best = max(entropy(np.array(list(Counter(m).values())) / N)
                       for m in itertools.product(range(r), repeat=N))
            t.eq(mi, best, LOOSE, f"balanced assignment is the best K={K}")
        t.le(phi_down(N, 1.0 / N + c), mi, LOOSE, f"lower bracket K={K}")
        t.le(mi, math.log(1 + N * c), LOOSE, f"upper bracket K={K}")
    return t.result()


def check_c3(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("C3", seed)
    t = Tally("C3", iid, seed)
    N = mdp.n_states
    for K in (1, 2):
        gam = float(rng.choice([0.5, 0.9, 1.0]))
        s0 = int(rng.integers(N))
        pol = uniform_random_policy(mdp, sub_seed(rng), horizon=K)
        joint = behavior_joint(mdp, pol, s0, None, TrajectoryK(K))
        i_traj = mutual_information(joint)
        path = joint.project(lambda o: tuple(s for _, s in o))
        i_path = mutual_information(path)
        i_last = mutual_information(path.project(lambda p: p[-1]))
        i_f = mutual_information(path.project(lambda p: first_visit_outcome(p, s0, K, gam, N)))
        t.eq(i_last, goal_behavior_mi(mdp, pol, s0, None, SK(K)), LOOSE, f"S_K route agreement K={K}")
        t.eq(i_path, goal_behavior_mi(mdp, pol, s0, None, StatePathK(K)), LOOSE, f"path route agreement K={K}")
        t.le(i_last, i_path, LOOSE, f"S_K <= S_1:K K={K}")
        t.le(i_f, i_path, LOOSE, f"F <= S_1:K K={K} gamma={gam}")
        t.le(i_path, i_traj, LOOSE, f"S_1:K <= trajectory K={K}")
    return t.result()


# --- first-visit upper bound --------------------------------------------------


def check_d1(config, seed):
    rng = cell_rng("D1", seed)
    family = int(config.get("family", seed % 4))
    K = int(config.get("K", rng.integers(2, 4)))
    gam = float(config.get("gamma", rng.choice([0.5, 0.8])))
    f = OW(K, gam)
    if family == 0:
        mdp, iid = build_river_env(0.08, 0.2), "river(0.08,0.2)"
        pol, s0 = optimal_policy(mdp, f), 0
    elif family in (1, 2):
        n = 1 + family
        mdp, iid = deterministic_grid(n), f"grid({n})"
        pol, s0 = optimal_policy(mdp, f), int(rng.integers(mdp.n_states))
    else:
        mdp, iid = random_instance(config, seed)
        s0 = int(rng.integers(mdp.n_states))
        pol = _consistent_by_mapping(mdp, f, _random_skills(mdp, rng, K), s0)
    iid += f" {f} start={s0}"
    diag = ow_upper_bound(mdp, pol, s0, K, gam)
    if not diag.applicable:
        raise Skip(diag.reason, iid)
    t = Tally("D1", iid, seed)
    t.le(diag.mi, diag.bound, LOOSE, "information bound")
    t.ge(diag.epsilon_interference, 0, LOOSE, "interference is non-negative")
    t.eq(support_gap(K, gam), ow_delta_closed_form(K, gam), EXACT, "support gap closed form")
    t.note(f"eta={diag.eta:.6g} delta={diag.delta_min:.6g} eps={diag.epsilon_interference:.6g}")
    return t.result()


# --- consistency by mapping and decoders ---------------------------------------


def check_e1(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("E1", seed)
    t = Tally("E1", iid, seed)
    for f in (Pe(0.6), ET(2), OW(2, 0.8)):
        skills = _random_skills(mdp, rng, _horizon(f))
        for s0 in range(mdp.n_states):
            pol = _consistent_by_mapping(mdp, f, skills, s0)
            X = cross_values(mdp, f, pol)[s0]
            margin = (np.diag(X) - X.max(axis=1)).min()
            t.ge(margin, 0, EXACT, f"{f} {skills.n_conds} skills s={s0}")
    return t.result()


def check_f1(config, seed):
    mdp, iid = random_instance(config, seed)
    rng = cell_rng("F1", seed)
    t = Tally("F1", iid, seed)
    N = mdp.n_states
    for f in (Pe(0.5), ET(1), ET(2)):
        spec = _state_spec(f)
        s0 = int(rng.integers(N))
        branch = uniform_random_policy(mdp, sub_seed(rng), 1, horizon=_horizon(f)).table[0]
        pe, pb = decoder_errors(behavior_joint(mdp, goal_independent_policy(mdp, branch), s0, None, spec))
        t.eq(pe, 1 - 1 / N, EXACT, f"{f} goal-independent naive error")
        t.eq(pb, 1 - 1 / N, EXACT, f"{f} goal-independent Bayes error")
        pol = _consistent_by_mapping(mdp, f, _random_skills(mdp, rng, _horizon(f)), s0)
        pe, pb = decoder_errors(behavior_joint(mdp, pol, s0, None, spec))
        t.eq(pe, pb, EXACT, f"{f} consistent policy s={s0}")
        pol = uniform_random_policy(mdp, sub_seed(rng), horizon=_horizon(f))
        pe, pb = decoder_errors(behavior_joint(mdp, pol, s0, None, spec))
        t.le(pb, pe, EXACT, f"{f} Bayes never worse s={s0}")
    return t.result()


# --- non-uniform goal distributions ------------------------------------------


def _weighted_instance(config, seed, claim):
    mdp, iid, rng = _t1_instance(config, seed, claim)
    w = seeded_goal_weights(rng, mdp.n_states)
    return mdp, iid + f" pmin={w.min():.4g} pmax={w.max():.4g}", rng, w


def check_gt1(config, seed):
    mdp, iid, rng, w = _weighted_instance(config, seed, "G.T1")
    t = Tally("G.T1", iid, seed)
    N = mdp.n_states
    pmin, pmax = w.min(), w.max()
    pol = uniform_random_policy(mdp, sub_seed(rng), horizon=2)
    s0 = int(rng.integers(N))
    for f in (Pe(0.3), Pe(0.9), ET(1), ET(2)):
        J = test_time_performance(mdp, f, pol, s0, w)
        C = goal_sensitivity(mdp, f, pol, s0, w).c_value
        t.ge(J, pmin + C, LOOSE, f"{f} lower")
        t.le(J, pmax + C, LOOSE, f"{f} upper")
        pc, _, _ = search_max_incontrol(mdp, f, s0, w)
        regret = optimal_values(mdp, f)[s0] @ w - test_time_performance(mdp, f, pc, s0, w)
        t.ge(regret, 0, LOOSE, f"{f} regret non-negative")
        t.le(regret, pmax - pmin, LOOSE, f"{f} regret bound")
    R = rng.uniform(0, 1, size=(3, N, N))
    D = rng.uniform(0, 0.9, size=(3, N, N))
    for f in (OW(1, 0.7), OW(2, 1.0), OW(3, 0.8), General(R, D)):
        J = test_time_performance(mdp, f, pol, s0, w)
        C = goal_sensitivity(mdp, f, pol, s0, w).c_value
        name = "General" if isinstance(f, General) else str(f)
        t.ge(J, C / (1 - pmin), EXACT, f"{name} sensitivity bound")
    for f in (OW(2, 1.0), OW(3, 0.8)):
        pc, cstar, exhaustive = search_max_incontrol(mdp, f, s0, w)
        t.partial = t.partial or not exhaustive
        regret = optimal_values(mdp, f)[s0] @ w - test_time_performance(mdp, f, pc, s0, w)
        t.ge(regret, 0, EXACT, f"{f} regret non-negative")
        t.le(regret, 1 - cstar / (1 - pmin), EXACT, f"{f} regret bound")
    return t.result()


def _leaky_star(n_leaves, leak):
    """Star env and a stationary goal policy that heads for its goal with prob 1 - leak."""
    mdp = build_star_env(n_leaves)
    N = mdp.n_states
    table = np.zeros((N, 1, N, mdp.max_actions))
    table[:, 0, 1:, 0] = 1.0
    for g in range(N):
        table[g, 0, 0, :] = leak / (N - 1)
        table[g, 0, 0, g] = 1.0 - leak
    return mdp, GoalConditionedPolicy(table, mdp.states, "goal")


def _strong_instance(rng, n_states):
    w = seeded_goal_weights(rng, n_states)
    leak = float(rng.uniform(0.05, 0.5)) * w.min() / w.max()
    mdp, pol = _leaky_star(n_states - 1, leak)
    return mdp, pol, w, f"star({n_states - 1}) leak={leak:.4g} pmin={w.min():.4g} pmax={w.max():.4g}"


def check_gt2(config, seed):
    mdp, iid, rng, w = _weighted_instance(config, seed, "G.T2")
    N = mdp.n_states
    H = entropy(w)
    t = Tally("G.T2", iid, seed)
    s0 = int(rng.integers(N))
    below = 0
    for f in (Pe(0.3), ET(1), ET(2)):
        for name, pol in _t2_policies(mdp, f, rng, s0):
            mi = goal_behavior_mi(mdp, pol, s0, w, _state_spec(f))
            J = test_time_performance(mdp, f, pol, s0, w)
            t.ge(mi, phi_down(N, J, H), LOOSE, f"{f} {name} Fano lower bound")
            x = w.min() + goal_sensitivity(mdp, f, pol, s0, w).c_value
            # phi_down only increases on [1/N, 1], so the sensitivity form needs x there
            if x >= 1.0 / N:
                t.ge(mi, phi_down(N, min(x, 1.0), H), LOOSE, f"{f} {name} sensitivity form")
            else:
                below += 1
    for K in (1, 2):
        gam = float(rng.choice([0.5, 1.0]))
        f = OW(K, gam)
        for name, pol in _t2_policies(mdp, f, rng, s0):
            mi = goal_behavior_mi(mdp, pol, s0, w, FirstVisitVector(K, gam))
            c = goal_sensitivity(mdp, f, pol, s0, w).c_value
            t.ge(mi, 2 * c * c, LOOSE, f"{f} {name} first-visit bound")
    if below:
        t.note(f"{below} sensitivity-form cases below 1/N not checked")
    star, pol, ws, sid = _strong_instance(rng, N)
    t.note(sid)
    Hs = entropy(ws)
    for f in (Pe(0.3), ET(1), ET(2)):
        if not check_consistency(star, f, pol, "strong", ws, starts=[0]).passed:
            t.note(f"{f} star policy not strongly consistent")
            continue
        mi = goal_behavior_mi(star, pol, 0, ws, _state_spec(f))
        J = test_time_performance(star, f, pol, 0, ws)
        c = goal_sensitivity(star, f, pol, 0, ws).c_value
        t.ge(mi, phi_down(N, J, Hs), LOOSE, f"{f} star Fano lower bound")
        t.le(mi, phi_up(N, J, Hs), LOOSE, f"{f} star reverse-Fano upper bound")
        t.le(phi_up(N, J, Hs), phi_up(N, min(ws.max() + c, 1.0), Hs), LOOSE, f"{f} star sensitivity form")
    return t.result()


def check_gl1(config, seed):
    rng = cell_rng("G.L1", seed)
    N = int(config.get("n_states", 3 + seed % 3))
    star, pol, w, sid = _strong_instance(rng, N)
    t = Tally("G.L1", sid, seed)
    for f in (Pe(0.3), Pe(0.8), ET(1), ET(2)):
        if not check_consistency(star, f, pol, "strong", w, starts=[0]).passed:
            t.note(f"{f} not strongly consistent")
            continue
        pe, pb = decoder_errors(behavior_joint(star, pol, 0, w, _state_spec(f)))
        t.eq(pe, pb, EXACT, f"{f} strongly consistent")
    mdp, _ = random_instance({"n_states": N}, seed)
    wr = seeded_goal_weights(rng, N)
    for f in (Pe(0.5), ET(2)):
        pol = uniform_random_policy(mdp, sub_seed(rng), horizon=_horizon(f))
        s0 = int(rng.integers(N))
        pe, pb = decoder_errors(behavior_joint(mdp, pol, s0, wr, _state_spec(f)))
        t.le(pb, pe, EXACT, f"{f} random policy Bayes never worse")
    return t.result()


def check_gp3(config, seed):
    mdp, iid, rng, w = _weighted_instance(config, seed, "G.P3")
    t = Tally("G.P3", iid, seed)
    for _ in range(2):
        _misl_gap_checks(t, mdp, rng, p_goal=w, equal_preimages=False)
    return t.result()
