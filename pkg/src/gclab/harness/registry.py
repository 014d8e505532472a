"""Claim registry: id, what is asserted, and the check that tests it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .._config import CapExceeded
from . import claims as c
from ._common import ClaimCheck, Skip


@dataclass(frozen=True)
class Claim:
    claim_id: str
    source: str
    statement: str
    check: Callable[[dict, int], ClaimCheck]


_TABLE = [
    ("P1", "formulation inequivalence",
     "On the bridge-or-jump chain the Pe, ET and OW optimal first moves differ pairwise.", c.check_p1),
    ("A1", "long-run occupancy",
     "Pe(gamma) tends to the Cesaro occupancy of the goal as gamma -> 1.", c.check_a1),
    ("A2", "geometric exact timing",
     "Pe(gamma) equals ET(K) averaged over K ~ Geom(1 - gamma).", c.check_a2),
    ("A3", "shortest path limit",
     "OW(inf, 1 - eps) = 1 - eps (E[T_g] - 1) + O(eps^2) when the goal is hit surely.", c.check_a3),
    ("A4", "one-step case",
     "Pe(0), ET(1), OW(1, gamma) and OW(K, 0) coincide.", c.check_a4),
    ("A5", "OW-Pe stationary equivalence",
     "Stationary policies optimal for Pe(gamma) are optimal for OW(inf, gamma).", c.check_a5),
    ("A6", "deterministic shortest paths",
     "In deterministic MDPs the shortest-path policy is optimal for Pe(gamma) and OW(K, gamma).", c.check_a6),
    ("A7", "waiting actions",
     "With a waiting action at every state, optimal OW(K, 1) and ET(K) values are equal.", c.check_a7),
    ("T1.1", "performance decomposition",
     "For Pe and ET, J = C + 1/N_s.", c.check_t11),
    ("T1.2", "sensitivity lower bound",
     "For OW and any non-negative reward, J >= N_s/(N_s - 1) C.", c.check_t12),
    ("T1.3", "controllability regret",
     "For OW, 0 <= J* - J(argmax C) <= 1 - N_s/(N_s - 1) C*.", c.check_t13),
    ("T2.1", "Fano lower bound",
     "I(G; S') >= phi_down(N_s, 1/N_s + C) for Pe and ET, any policy.", c.check_t21),
    ("T2.2", "reverse-Fano upper bound",
     "I(G; S') <= phi_up(N_s, 1/N_s + C) for consistent policies under Pe and ET.", c.check_t22),
    ("T2.3", "first-visit Pinsker bound",
     "I(G; F^{K,gamma}) >= 2 C_OW^2.", c.check_t23),
    ("P3", "skill prior gap",
     "|J_MISL - I(G; S')| <= h(delta) + delta log(N'^2 (N' - 1)), zero for uniform p_f.", c.check_p3),
    ("B1", "one-step controllability",
     "The effective-action count formula equals C*_ET(s, 1).", c.check_b1),
    ("B2", "deterministic empowerment",
     "In deterministic MDPs Klyubin empowerment equals log(1 + N_s C*_ET(s, K)).", c.check_b2),
    ("C1", "empowerment upper bound",
     "max_pi I(G; S_K) <= Klyubin empowerment, strictly on the fork.", c.check_c1),
    ("C2", "deterministic MI bracket",
     "phi_down(N_s, 1/N_s + C*_ET) <= max_pi I(G; S_K) <= log(1 + N_s C*_ET).", c.check_c2),
    ("C3", "data processing",
     "I(G; S_K), I(G; F) <= I(G; S_1:K) <= I(G; trajectory).", c.check_c3),
    ("D1", "first-visit upper bound",
     "Under its three assumptions, I(G; F) <= 4 C_OW / (eta delta^2) + eps.", c.check_d1),
    ("E1", "consistency by mapping",
     "Sending each goal to its best skill from s0 yields a consistent policy at s0.", c.check_e1),
    ("F1", "decoder optimality",
     "For consistent policies the identity decoder is Bayes-optimal.", c.check_f1),
    ("G.T1", "non-uniform decomposition",
     "pmin + C <= J <= pmax + C (Pe, ET); J >= C/(1 - pmin) (OW); matching regret bounds.", c.check_gt1),
    ("G.T2", "non-uniform information bounds",
     "Fano bounds with H[p_goal]; reverse Fano under strong consistency; Pinsker for OW.", c.check_gt2),
    ("G.L1", "non-uniform decoder optimality",
     "Under strong consistency the identity decoder is Bayes-optimal.", c.check_gl1),
    ("G.P3", "non-uniform skill prior gap",
     "The skill prior gap bound holds with p_f pushed from a non-uniform p_goal.", c.check_gp3),
]

REGISTRY: dict[str, Claim] = {cid: Claim(cid, src, stmt, fn) for cid, src, stmt, fn in _TABLE}
CLAIM_IDS = tuple(REGISTRY)


def run_claim(claim_id: str, config: dict | None = None, seed: int = 0) -> ClaimCheck:
    """Run one registered claim on the instance given by (config, seed).

    Hypothesis failures, enumeration caps and numerical breakdowns come back
    as ``skipped(<reason>)``; only a violated conclusion is ``fail``.
    """
    if claim_id not in REGISTRY:
        raise KeyError(f"unknown claim {claim_id!r}")
    config = dict(config or {})
    nan = math.nan
    try:
        return REGISTRY[claim_id].check(config, int(seed))
    except Skip as e:
        return ClaimCheck(claim_id, e.instance_id, int(seed), f"skipped({e.reason})", nan, nan, nan, "")
    except CapExceeded as e:
        return ClaimCheck(claim_id, "", int(seed), "skipped(cap)", nan, nan, nan, str(e))
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        return ClaimCheck(claim_id, "", int(seed), f"skipped(numerical:{type(e).__name__})", nan, nan, nan, str(e))


def resolve_claims(spec) -> list[str]:
    """``"all"``, a comma list, or an iterable of ids; a trailing ``*`` matches a prefix."""
    if spec is None or spec == "all":
        return list(CLAIM_IDS)
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for item in items:
        item = item.strip()
        if item.endswith("*"):
            hits = [k for k in CLAIM_IDS if k.startswith(item[:-1])]
        else:
            hits = [item] if item in REGISTRY else []
        if not hits:
            raise KeyError(f"unknown claim {item!r}")
        out += [h for h in hits if h not in out]
    return out
