"""Exact rational helpers shared by every module.

All quantities in this package (prices, budgets, slopes, lengths, money,
tolerances) are `fractions.Fraction`.  Floats are allowed only inside search
heuristics, and any candidate found that way must be re-checked exactly.

Serialized form is always the string "num/den" (or just "num" when the
denominator is 1); infinite segment lengths serialize as "inf" and are
represented in memory by `None`.
"""

from __future__ import annotations

from fractions import Fraction

INF = "inf"


def rat(value) -> Fraction:
    """Coerce ints, 'num/den' strings, and Fractions to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not an exact rational: {value!r}")


def fmt(value: Fraction | None) -> str:
    """Serialize a Fraction (None = infinite) as 'num/den' / 'num' / 'inf'."""
    if value is None:
        return INF
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def parse_length(text: str) -> Fraction | None:
    return None if text == INF else rat(text)


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def frac_ceil(x: Fraction) -> int:
    return ceil_div(x.numerator, x.denominator)


def frac_floor(x: Fraction) -> int:
    return x.numerator // x.denominator
