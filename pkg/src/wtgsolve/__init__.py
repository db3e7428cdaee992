"""Exact value solver for two-clock, almost non-Zeno weighted timed games."""

__version__ = "0.1.0"
