"""SPLC Fisher markets, ternary/arithmetic circuit reductions, and the
exact-clearing repair pipeline."""

__version__ = "0.1.0"
