"""Claim registry, counterexample search and verification reports."""

from ._common import ClaimCheck, Skip
from .registry import CLAIM_IDS, REGISTRY, Claim, resolve_claims, run_claim
from .report import CSV_COLUMNS, VerificationReport, fmt, random_suite, read_report_csv
from .search import (
    TARGETS,
    Exhaustion,
    SearchConfig,
    Witness,
    certify,
    control_maximizer,
    counterexample_search,
    load_witness,
)

__all__ = [
    "ClaimCheck",
    "Skip",
    "Claim",
    "CLAIM_IDS",
    "REGISTRY",
    "resolve_claims",
    "run_claim",
    "CSV_COLUMNS",
    "VerificationReport",
    "fmt",
    "random_suite",
    "read_report_csv",
    "TARGETS",
    "Exhaustion",
    "SearchConfig",
    "Witness",
    "certify",
    "control_maximizer",
    "counterexample_search",
    "load_witness",
]
