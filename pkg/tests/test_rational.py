"""Exact rational threshold arithmetic."""
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qtokens.rational import as_fraction, threshold_count


def test_as_fraction_passthrough_and_parsing():
    assert as_fraction(Fraction(5, 6)) == Fraction(5, 6)
    assert as_fraction(1) == Fraction(1)
    assert as_fraction("5/6") == Fraction(5, 6)
    assert as_fraction("0.75") == Fraction(3, 4)


def test_as_fraction_snaps_floats():
    assert as_fraction(0.75) == Fraction(3, 4)
    assert as_fraction(5 / 6) == Fraction(5, 6)
    assert as_fraction(0.92) == Fraction(23, 25)


def test_threshold_count_examples():
    assert threshold_count(Fraction(5, 6), 6) == 5
    assert threshold_count(Fraction(3, 4), 8) == 6
    assert threshold_count(Fraction(3, 4), 100) == 75
    assert threshold_count(Fraction(9, 10), 1000) == 900
    # integral product accepted at equality
    assert threshold_count(Fraction(1, 2), 4) == 2
    # non-integral product rounds up
    assert threshold_count(Fraction(1, 2), 5) == 3
    assert threshold_count(0, 10) == 0
    assert threshold_count(1, 10) == 10


@given(st.fractions(min_value=0, max_value=1, max_denominator=1000),
       st.integers(1, 2000))
def test_threshold_count_is_exact_ceiling(f, n):
    k = threshold_count(f, n)
    assert k >= f * n
    assert k - 1 < f * n
    assert 0 <= k <= n


@given(st.integers(1, 500), st.integers(1, 500))
def test_string_fraction_round_trip(num, den):
    f = Fraction(num, den)
    assert as_fraction(f"{num}/{den}") == f
