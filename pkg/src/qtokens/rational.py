"""Exact rational handling for acceptance thresholds.

Tolerated-fidelity values gate integer counts, so they are carried as
``fractions.Fraction`` everywhere a threshold is computed.  Floats are
snapped to the nearest small-denominator rational (denominator <= 10**6)
because grid values like 61/75 do not round-trip through binary floats.
"""
from __future__ import annotations

import math
from fractions import Fraction

_MAX_DENOMINATOR = 10**6


def as_fraction(value: Fraction | int | str | float) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(_MAX_DENOMINATOR)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def threshold_count(f_tol: Fraction | int | str | float, n: int) -> int:
    """Smallest integer count >= f_tol * n, computed exactly."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return math.ceil(as_fraction(f_tol) * n)
