"""Exact tabular toolkit for goal-conditioned MDPs."""

__version__ = "0.1.0"
