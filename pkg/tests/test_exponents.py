import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iifs.exponents import (DigitFormatError, WeightVector, is_monotone, parse_digits_json,
                            ratio_diagnostics, read_digits_csv, tau2_from_digits,
                            tau_by_partial_sums, tau_direct_limsup, tau_from_rearrangement,
                            write_digits_csv)


def powers(c, N=10_000):
    return np.rint(np.arange(1, N + 1, dtype=float) ** c).astype(np.int64)


@pytest.mark.parametrize("c", [1 / 3, 1 / 2, 1, 2, 3])
def test_tau_of_power_sequence(c):
    est = tau_from_rearrangement(powers(c))
    assert abs(est.value - 1 / c) < 0.05


@pytest.mark.parametrize("c", [1 / 2, 1, 2])
def test_partial_sums_agree_with_rearrangement(c):
    a = powers(c)
    ps = tau_by_partial_sums(a, 0, 5)
    assert ps.boundary is None
    assert abs(ps.value - tau_from_rearrangement(a).value) < 0.1


def test_geometric_sequence_has_small_exponent():
    a = [2 ** k for k in range(1, 200)]
    assert tau_from_rearrangement(a).value < 0.1


def test_bounded_sequence_gives_infinity():
    assert tau_from_rearrangement([1, 2, 3] * 100).value == math.inf


def test_direct_equals_sorted_on_monotone_input():
    a = powers(0.7, 2000)
    assert tau_direct_limsup(a).value == tau_from_rearrangement(a).value


def test_order_does_not_matter_for_rearrangement():
    a = list(powers(1.5, 3000))
    rng = np.random.default_rng(0)
    b = list(rng.permutation(a))
    assert tau_from_rearrangement(a).value == tau_from_rearrangement(b).value


def test_tau2_unit_weights_on_n():
    est = tau2_from_digits(np.arange(1, 10_001), WeightVector([1, 1]))
    assert abs(est.value - 0.5) < 0.01


def test_ratio_diagnostics_on_squares():
    est = ratio_diagnostics(np.arange(1, 10_001) ** 2, WeightVector([1, 1]))
    assert abs(est.value - 4) < 0.01


def test_weighted_collapse_for_constant_multiples():
    # a_n = n: log(a_n^t0 a_{n+1}^t1)/log n -> sigma_t
    w = WeightVector(["1/2", "3/2", 1])
    est = ratio_diagnostics(np.arange(1, 20_001), w)
    assert abs(est.value - float(w.sigma_t)) < 0.01


def test_weight_vector_validation():
    with pytest.raises(ValueError):
        WeightVector([1])
    with pytest.raises(ValueError):
        WeightVector([0, 1])
    with pytest.raises(ValueError):
        WeightVector([1, 0, 0])
    with pytest.raises(ValueError):
        WeightVector([1, -1])
    assert WeightVector([1, 2]).sigma_t == 3


def test_too_short_input():
    with pytest.raises(ValueError):
        tau_from_rearrangement([1, 2, 3])


def test_big_integer_digits():
    a = [10 ** (k * 40) for k in range(1, 60)]
    assert tau_from_rearrangement(a).value < 0.01


def test_csv_roundtrip_and_comments():
    buf = io.StringIO()
    write_digits_csv([3, 1, 4, 1, 5], buf)
    text = "# seed=1\n" + buf.getvalue()
    assert read_digits_csv(io.StringIO(text)) == [3, 1, 4, 1, 5]


@pytest.mark.parametrize("text,line", [("digt\n1\n", 1), ("digit\n1\n0\n", 3),
                                       ("digit\n2\nabc\n", 3), ("digit\n1,2\n", 2)])
def test_csv_errors_carry_line_numbers(text, line):
    with pytest.raises(DigitFormatError) as info:
        read_digits_csv(io.StringIO(text))
    assert info.value.line == line


def test_json_digits():
    assert parse_digits_json('{"digits": [1, 2]}') == [1, 2]
    with pytest.raises(DigitFormatError):
        parse_digits_json("[1, 0]")


def test_is_monotone():
    assert is_monotone([1, 1, 2, 5])
    assert not is_monotone([2, 1])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=2, max_value=10 ** 6), min_size=20, max_size=200))
def test_rearrangement_is_permutation_invariant(xs):
    assert tau_from_rearrangement(xs).value == tau_from_rearrangement(xs[::-1]).value
