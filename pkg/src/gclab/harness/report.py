"""Cross-product runs and the CSV verification report."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field

from ._common import ClaimCheck
from .registry import resolve_claims, run_claim

CSV_COLUMNS = ("claim_id", "instance_id", "seed", "status", "lhs", "rhs", "tolerance", "detail")


def fmt(x) -> str:
    """12 significant digits, dot decimal, independent of locale."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if x != x:
        return "nan"
    return format(x + 0.0, ".12g")  # no "-0"


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    def counts(self) -> dict:
        out = Counter()
        for c in self.checks:
            out["skipped" if c.skipped else c.status] += 1
        return dict(out)

    @property
    def n_failed(self) -> int:
        return sum(c.failed for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.n_failed == 0

    def failures(self) -> list:
        return [c for c in self.checks if c.failed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.checks:
            w.writerow([c.claim_id, c.instance_id, c.seed, c.status, fmt(c.lhs), fmt(c.rhs),
                        fmt(c.tolerance), c.detail])
        return buf.getvalue()

    def summary(self) -> str:
        per: dict = {}
        for c in self.checks:
            per.setdefault(c.claim_id, Counter())["skipped" if c.skipped else c.status] += 1
        lines = []
        for cid, cnt in per.items():
            parts = ", ".join(f"{k}={v}" for k, v in sorted(cnt.items()))
            lines.append(f"{cid:6s} {parts}")
        tot = ", ".join(f"{k}={v}" for k, v in sorted(self.counts().items()))
        lines.append(f"total  {tot}")
        return "\n".join(lines)


def random_suite(seeds, sizes=None, claims="all") -> VerificationReport:
    """Every selected claim on every (size, seed) cell, claim-major order.

    ``sizes`` is a list of instance configs (e.g. ``[{"n_states": 4}]``);
    the default ``[{}]`` lets each claim pick its own sizes from the seed.
    """
    ids = resolve_claims(claims)
    sizes = list(sizes) if sizes is not None else [{}]
    report = VerificationReport()
    for cid in ids:
        for cfg in sizes:
            for seed in seeds:
                report.checks.append(run_claim(cid, cfg, seed))
    return report


def read_report_csv(text: str) -> list[ClaimCheck]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        ClaimCheck(r["claim_id"], r["instance_id"], int(r["seed"]), r["status"], float(r["lhs"]),
                   float(r["rhs"]), float(r["tolerance"]), r["detail"])
        for r in rows
    ]
