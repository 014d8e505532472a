"""Command-line entry point: ``gclab <command> [--flags]``.

Exit status: 0 success, 1 a checked claim failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import harness
from ._config import CapExceeded
from .control import (
    check_consistency,
    goal_sensitivity,
    klyubin_empowerment,
    objective_controllability,
)
from .info import (
    FirstVisitVector,
    behavior_joint,
    decoder_errors,
    entropy,
    goal_behavior_mi,
    mutual_information,
    ow_mi_lower_bound,
    phi_down,
    phi_up,
)
from .mdp import (
    MdpParseError,
    MdpValidationError,
    build_fork_env,
    build_river_env,
    build_star_env,
    deterministic_grid,
    dumps_mdp,
    loads_mdp,
    random_mdp,
    validate,
)
from .misl import MislConfig, consistent_mapping, optimize_misl_tabular
from .policy import (
    compose_downstream,
    dumps_policy,
    goal_independent_policy,
    loads_policy,
    uniform_random_policy,
)
from .values import ET, OW, Pe, SGammaPlus, SK, optimal_policy, solve_optimal, test_time_performance

fmt = harness.fmt


class InputError(Exception):
    pass


# --- io helpers ---------------------------------------------------------------


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_mdp(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    try:
        return loads_mdp(text)
    except MdpParseError as e:
        raise InputError(f"{path}:{e.line}:{e.column}: {e}") from None
    except MdpValidationError as e:
        raise InputError(f"{path}: {e}") from None


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive), ``"3"``, or ``"1,4,7"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out += range(int(lo), int(hi) + 1)
        elif part:
            out.append(int(part))
    return out


def _formulation(args):
    name = args.formulation.lower()
    if name == "pe":
        if args.gamma is None:
            raise InputError("Pe needs --gamma")
        return Pe(args.gamma)
    if name == "et":
        if args.K is None:
            raise InputError("ET needs --K")
        return ET(args.K)
    if name == "ow":
        if args.K is None or args.gamma is None:
            raise InputError("OW needs --K and --gamma")
        return OW(args.K, args.gamma)
    raise InputError(f"unknown formulation {args.formulation!r}")


def _horizon(f):
    return 0 if isinstance(f, Pe) else f.K


def _policy(args, mdp, f):
    if args.policy:
        try:
            return loads_policy(Path(args.policy).read_text(encoding="utf-8"), mdp, "goal")
        except OSError as e:
            raise InputError(f"cannot read {args.policy}: {e.strerror}") from None
    kind = args.policy_kind
    if kind == "optimal":
        return optimal_policy(mdp, f)
    if args.seed is None:
        raise InputError(f"--policy-kind {kind} is randomized and needs --seed")
    if kind == "random":
        return uniform_random_policy(mdp, args.seed, horizon=_horizon(f))
    if kind == "goal-independent":
        branch = uniform_random_policy(mdp, args.seed, 1, horizon=_horizon(f)).table[0]
        return goal_independent_policy(mdp, branch)
    raise InputError(f"unknown policy kind {kind!r}")


def _state_spec(f):
    return SGammaPlus(f.gamma) if isinstance(f, Pe) else SK(f.K)


def _emit(args, text: str):
    if getattr(args, "out", None):
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _csv(rows) -> str:
    return "".join(",".join(fmt(x) if isinstance(x, float) else str(x) for x in r) + "\n" for r in rows)


# --- commands -------------------------------------------------------------------


def cmd_validate(args):
    text = Path(args.mdp).read_text(encoding="utf-8") if os.path.exists(args.mdp) else None
    if text is None:
        raise InputError(f"cannot read {args.mdp}")
    try:
        mdp = loads_mdp(text, check=False)
    except MdpParseError as e:
        raise InputError(f"{args.mdp}:{e.line}:{e.column}: {e}") from None
    except MdpValidationError as e:
        raise InputError(f"{args.mdp}: {e}") from None
    res = validate(mdp)
    if not res.ok:
        raise InputError("; ".join(v.message for v in res.violations))
    print(f"ok: {mdp.n_states} states, {int(mdp.n_actions.sum())} state-action pairs")
    return 0


def cmd_env(args):
    kind = args.kind
    if kind == "river":
        mdp = build_river_env(args.eps1, args.eps2)
    elif kind == "grid":
        mdp = deterministic_grid(args.n)
    elif kind == "star":
        mdp = build_star_env(args.n)
    elif kind == "fork":
        mdp = build_fork_env()
    else:
        if args.seed is None:
            raise InputError("random environments need --seed")
        mdp = random_mdp(args.n, args.actions, args.branching, args.seed)
    _emit(args, dumps_mdp(mdp))
    return 0


def cmd_solve(args):
    mdp = load_mdp(args.mdp)
    f = _formulation(args)
    goals = [args.goal] if args.goal else list(mdp.states)
    starts = [args.start] if args.start else list(mdp.states)
    if args.goal and args.start:
        sol = solve_optimal(mdp, f, args.goal)
        s = mdp.state_index(args.start)
        print(f"first_action {mdp.actions[s][sol.first_action(s)]}")
        print(f"value {fmt(sol.value(s))}")
        return 0
    rows = [("goal", "start", "first_action", "value")]
    for g in goals:
        sol = solve_optimal(mdp, f, g)
        for s in starts:
            si = mdp.state_index(s)
            rows.append((g, s, mdp.actions[si][sol.first_action(si)], float(sol.value(si))))
    _emit(args, _csv(rows))
    return 0


def cmd_sensitivity(args):
    mdp = load_mdp(args.mdp)
    f = _formulation(args)
    pol = _policy(args, mdp, f)
    starts = [args.start] if args.start else list(mdp.states)
    rows = [("start", "J", "C", "C_star", "C_star_exact")]
    for s in starts:
        J = test_time_performance(mdp, f, pol, s)
        C = goal_sensitivity(mdp, f, pol, s).c_value
        cs = objective_controllability(mdp, f, s)
        rows.append((s, float(J), float(C), float(cs.value), str(cs.exact).lower()))
    text = _csv(rows)
    rep = check_consistency(mdp, f, pol, args.consistency, starts=starts)
    text += f"# consistency mode={rep.mode} passed={str(rep.passed).lower()} violations={len(rep.violations)}\n"
    for v in rep.violations[:20]:
        text += f"# violation s={mdp.states[v.s]} g={mdp.states[v.g]} other={v.other} lhs={fmt(v.lhs)} rhs={fmt(v.rhs)}\n"
    _emit(args, text)
    return 0


def _state_bounds(N, C, consistent):
    # the brackets only hold for consistent policies
    if not consistent:
        return math.nan, math.nan
    x = min(1.0 / N + C, 1.0)
    return max(phi_down(N, x), 0.0), max(phi_up(N, x), 0.0)


def cmd_mi(args):
    mdp = load_mdp(args.mdp)
    f = _formulation(args)
    pol = _policy(args, mdp, f)
    N = mdp.n_states
    starts = [args.start] if args.start else list(mdp.states)
    rows = [("start", "outcome", "MI", "C", "bound_low", "bound_high", "p_e", "p_e_bayes")]
    for s in starts:
        C = goal_sensitivity(mdp, f, pol, s).c_value
        ok = check_consistency(mdp, f, pol, starts=[s]).passed
        if isinstance(f, OW):
            mi = goal_behavior_mi(mdp, pol, s, None, FirstVisitVector(f.K, f.gamma))
            rows.append((s, "F", mi, C, ow_mi_lower_bound(C) if ok else math.nan, "", "", ""))
            continue
        joint = behavior_joint(mdp, pol, s, None, _state_spec(f))
        mi = mutual_information(joint)
        lo, hi = _state_bounds(N, C, ok)
        pe, pb = decoder_errors(joint)
        rows.append((s, "S'", mi, C, lo, hi, pe, pb))
    _emit(args, _csv(rows))
    return 0


def cmd_bounds(args):
    """Per formulation: C, the matching MI and its bounds, for one policy source."""
    mdp = load_mdp(args.mdp)
    N = mdp.n_states
    s = args.start or mdp.states[0]
    forms = [Pe(args.gamma), ET(args.K), OW(args.K, args.gamma)]
    rows = [("formulation", "C", "MI", "phi_down", "phi_up_or_pinsker")]
    for f in forms:
        pol = _policy(args, mdp, f)
        C = goal_sensitivity(mdp, f, pol, s).c_value
        ok = check_consistency(mdp, f, pol, starts=[s]).passed
        if isinstance(f, OW):
            mi = goal_behavior_mi(mdp, pol, s, None, FirstVisitVector(f.K, f.gamma))
            rows.append((str(f), C, mi, "", 2 * C * C if ok else math.nan))
        else:
            mi = goal_behavior_mi(mdp, pol, s, None, _state_spec(f))
            rows.append((str(f), C, mi, *_state_bounds(N, C, ok)))
    _emit(args, _csv(rows))
    return 0


def cmd_verify(args):
    seeds = parse_seeds(args.seeds)
    sizes = [{"n_states": int(n)} for n in args.sizes.split(",")] if args.sizes else None
    try:
        claims = harness.resolve_claims(args.claims)
    except KeyError as e:
        raise InputError(str(e.args[0])) from None
    report = harness.random_suite(seeds, sizes, claims)
    if args.out:
        write_atomic(args.out, report.to_csv())
    else:
        sys.stdout.write(report.to_csv())
    print(report.summary(), file=sys.stderr)
    return 0 if report.ok else 1


def cmd_search(args):
    cfg = harness.SearchConfig(time_budget=args.budget)
    if args.sizes:
        cfg.sizes = tuple(int(n) for n in args.sizes.split(","))
    res = harness.counterexample_search(args.target, cfg, args.seed)
    if isinstance(res, harness.Exhaustion):
        print(f"exhausted after {res.trials} trials ({res.elapsed:.1f} s): {res.reason}")
        return 0
    text = res.to_text()
    if args.out:
        write_atomic(args.out, text)
    print(f"witness after {res.trials} trials: K={res.K} gamma={fmt(res.gamma)} start={res.mdp.states[res.start]}")
    for k, v in sorted(res.certificate.items()):
        print(f"  {k} = {fmt(v) if isinstance(v, float) else v}")
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_misl(args):
    mdp = load_mdp(args.mdp)
    if args.spec == "sk":
        if args.K is None:
            raise InputError("--spec sk needs --K")
        spec, f = SK(args.K), ET(args.K)
    else:
        if args.gamma is None:
            raise InputError("--spec sgamma needs --gamma")
        spec, f = SGammaPlus(args.gamma), Pe(args.gamma)
    if args.mode == "ascent" and args.seed is None:
        raise InputError("ascent mode is randomized and needs --seed")
    s0 = mdp.state_index(args.start or mdp.states[0])
    cfg = MislConfig(args.mode, args.seed or 0, args.iterations)
    skills, value = optimize_misl_tabular(mdp, spec, args.skills, s0, cfg)
    fmap = consistent_mapping(mdp, f, skills)
    down = compose_downstream(skills, fmap, s0)
    lines = [
        f"misl_objective {fmt(value)}",
        f"downstream_goal_mi {fmt(goal_behavior_mi(mdp, down, s0, None, spec))}",
        f"downstream_J {fmt(test_time_performance(mdp, f, down, s0))}",
        f"downstream_C {fmt(goal_sensitivity(mdp, f, down, s0).c_value)}",
        f"goal_entropy {fmt(entropy(np.full(mdp.n_states, 1.0 / mdp.n_states)))}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, dumps_policy(mdp, skills))
    sys.stdout.write(text)
    return 0


def cmd_empowerment(args):
    mdp = load_mdp(args.mdp)
    starts = [args.start] if args.start else list(mdp.states)
    rows = [("start", "empowerment", "upper", "C_star_ET")]
    for s in starts:
        r = klyubin_empowerment(mdp, s, args.K, method=args.method)
        rows.append((s, float(r.value), float(r.upper), float(objective_controllability(mdp, ET(args.K), s).value)))
    _emit(args, _csv(rows))
    return 0


# --- parser ---------------------------------------------------------------------


def _add_formulation(p, required=True):
    p.add_argument("--formulation", required=required, choices=["pe", "et", "ow", "Pe", "ET", "OW"])
    p.add_argument("--K", type=int)
    p.add_argument("--gamma", type=float)


def _add_policy(p):
    p.add_argument("--policy", help="policy v1 file (goal-conditioned)")
    p.add_argument("--policy-kind", default="optimal", choices=["optimal", "random", "goal-independent"])
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gclab", description="Exact goal-conditioned RL and MI toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate an MDP file")
    p.add_argument("--mdp", required=True)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("env", help="write a built-in environment as mdp v1 text")
    p.add_argument("--kind", required=True, choices=["river", "grid", "star", "fork", "random"])
    p.add_argument("--eps1", type=float, default=0.08)
    p.add_argument("--eps2", type=float, default=0.2)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--actions", type=int, default=2)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_env)

    p = sub.add_parser("solve", help="optimal first actions and values")
    p.add_argument("--mdp", required=True)
    _add_formulation(p)
    p.add_argument("--goal")
    p.add_argument("--start")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sensitivity", help="J, C, C* and a consistency report")
    p.add_argument("--mdp", required=True)
    _add_formulation(p)
    _add_policy(p)
    p.add_argument("--start")
    p.add_argument("--consistency", default="plain", choices=["plain", "strong", "stochastic"])
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sensitivity)

    p = sub.add_parser("mi", help="goal-behavior MI with its bounds")
    p.add_argument("--mdp", required=True)
    _add_formulation(p)
    _add_policy(p)
    p.add_argument("--start")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_mi)

    p = sub.add_parser("bounds", help="C, matching MI and bounds for Pe, ET and OW")
    p.add_argument("--mdp", required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    _add_policy(p)
    p.add_argument("--start")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("empowerment", help="Klyubin empowerment and ET controllability")
    p.add_argument("--mdp", required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--method", default="auto", choices=["auto", "blahut-arimoto"])
    p.add_argument("--start")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_empowerment)

    p = sub.add_parser("verify", help="run the claim registry and write the report CSV")
    p.add_argument("--claims", default="all")
    p.add_argument("--seeds", required=True, help="e.g. 0..9 or 1,5,7")
    p.add_argument("--sizes", help="comma list of state counts, e.g. 3,4,5")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("search", help="counterexample search")
    p.add_argument("--target", required=True, choices=list(harness.TARGETS))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--budget", type=float, default=60.0, help="seconds")
    p.add_argument("--sizes", help="comma list of state counts")
    p.add_argument("--out", help="witness file (mdp v1 with certificate comments)")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("misl", help="tabular skill pretraining and downstream evaluation")
    p.add_argument("--mdp", required=True)
    p.add_argument("--spec", required=True, choices=["sk", "sgamma"])
    p.add_argument("--K", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--skills", type=int, required=True)
    p.add_argument("--start")
    p.add_argument("--mode", default="exhaustive", choices=["exhaustive", "ascent"])
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the skill policy (policy v1)")
    p.set_defaults(fn=cmd_misl)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, KeyError, ValueError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"gclab: error: {msg}", file=sys.stderr)
        return 2
    except CapExceeded as e:
        print(f"gclab: error: {e} (raise GCLAB_CAP to allow more)", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
