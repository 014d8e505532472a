"""Check records, a slack tally and seeded instance helpers shared by the claims."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from ..mdp import random_mdp


@dataclass(frozen=True)
class ClaimCheck:
    """One claim evaluated on one instance.

    ``lhs``/``rhs``/``tolerance`` are those of the tightest comparison made;
    ``status`` is ``pass``, ``fail``, ``bound-checked`` or ``skipped(reason)``.
    """

    claim_id: str
    instance_id: str
    seed: int
    status: str
    lhs: float
    rhs: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "bound-checked")

    @property
    def failed(self) -> bool:
        return self.status == "fail"

    @property
    def skipped(self) -> bool:
        return self.status.startswith("skipped")


class Skip(Exception):
    """Raised inside a check when a hypothesis of the claim does not hold."""

    def __init__(self, reason: str, instance_id: str = ""):
        super().__init__(reason)
        self.reason = reason
        self.instance_id = instance_id


class Tally:
    """Collects comparisons and keeps the one with the least slack."""

    def __init__(self, claim_id: str, instance_id: str, seed: int):
        self.claim_id = claim_id
        self.instance_id = instance_id
        self.seed = seed
        self.count = 0
        self.worst = None  # (slack, lhs, rhs, tol, label)
        self.notes: list[str] = []
        self.partial = False

    def _record(self, slack, lhs, rhs, tol, label):
        self.count += 1
        slack = float(slack)
        if math.isnan(slack):
            slack = -math.inf
        if self.worst is None or slack < self.worst[0]:
            self.worst = (slack, float(lhs), float(rhs), float(tol), label)

    def eq(self, lhs, rhs, tol, label=""):
        self._record(tol - abs(lhs - rhs), lhs, rhs, tol, label)

    def le(self, lhs, rhs, tol, label=""):
        self._record(rhs + tol - lhs, lhs, rhs, tol, label)

    def ge(self, lhs, rhs, tol, label=""):
        self._record(lhs + tol - rhs, lhs, rhs, tol, label)

    def note(self, text: str):
        self.notes.append(text)

    def result(self) -> ClaimCheck:
        if self.worst is None:
            return ClaimCheck(self.claim_id, self.instance_id, self.seed, "skipped(no-applicable-case)",
                              math.nan, math.nan, math.nan, "; ".join(self.notes))
        slack, lhs, rhs, tol, label = self.worst
        ok = slack >= 0
        status = "fail" if not ok else ("bound-checked" if self.partial else "pass")
        detail = "; ".join([f"tightest: {label}"] + self.notes) if label else "; ".join(self.notes)
        return ClaimCheck(self.claim_id, self.instance_id, self.seed, status, lhs, rhs, tol, detail)


def cell_rng(claim_id: str, seed: int, *extra) -> np.random.Generator:
    """Generator keyed on (seed, claim, extra); independent of run order."""
    return np.random.default_rng([int(seed), zlib.crc32(claim_id.encode()), *map(int, extra)])


def sub_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**31 - 1))


def random_instance(config: dict, seed: int, default_states=4):
    n = int(config.get("n_states", default_states))
    a = int(config.get("n_actions", 2))
    b = min(int(config.get("branching", 2)), n)
    return random_mdp(n, a, b, seed), f"random_mdp({n},{a},{b},seed={seed})"


def seeded_goal_weights(rng: np.random.Generator, n: int, floor: float = 1e-3) -> np.ndarray:
    """Positive seeded draws, normalized, with every mass at least ``floor``."""
    w = rng.uniform(0.05, 1.0, size=n)
    w /= w.sum()
    w = np.maximum(w, floor)
    return w / w.sum()
