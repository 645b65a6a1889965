import io
import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from iifs.cantor import (ConstructionError, SpectrumRangeError, builtin_cantor_spec,
                         count_monotone_words, integer_box, lr_dimension_formula,
                         monotone_violation_rate, read_tabulated_csv, sample_point,
                         spectrum_E, spectrum_E_Lambda, spectrum_E_weighted, spectrum_F_G,
                         tabulated_spec, write_sequence_csv)
from iifs.exponents import WeightVector, is_monotone


def brute_monotone(n, ell):
    return sum(1 for w in itertools.product(range(1, ell + 1), repeat=n)
               if all(a <= b for a, b in zip(w, w[1:])))


@pytest.mark.parametrize("n,ell", [(1, 1), (2, 3), (4, 4), (7, 2), (3, 7)])
def test_count_matches_enumeration(n, ell):
    assert count_monotone_words(n, ell) == brute_monotone(n, ell)


def test_count_small_examples():
    assert count_monotone_words(2, 3) == 6
    assert count_monotone_words(5, 1) == 1


def test_pascal_identity():
    for n in range(2, 12):
        for ell in range(2, 12):
            assert count_monotone_words(n, ell) == (count_monotone_words(n - 1, ell)
                                                    + count_monotone_words(n, ell - 1))


def test_lambda_spectrum_continuous_and_increasing():
    sg, d = Fraction(2), Fraction(2)
    grid = [sg + Fraction(k, 10) for k in range(0, 400)]
    vals = [spectrum_E_Lambda(a, sg, d) for a in grid]
    assert vals[0] == 0 == spectrum_E_Lambda(sg - Fraction(1, 10 ** 9), sg, d)
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < Fraction(1, 2) == spectrum_E_Lambda("inf", sg, d)


def test_spectrum_values_exact():
    assert spectrum_E_Lambda(4, 2, 2) == Fraction(1, 4)
    assert spectrum_E_Lambda(2, 2, 2) == 0
    assert spectrum_E_Lambda("inf", 2, 3) == Fraction(1, 3)
    assert spectrum_F_G(6, [1, 2], 2) == Fraction(1, 4)
    assert spectrum_E(5, 2) == Fraction(1, 2)
    assert spectrum_E_weighted(5, [1, 3], 3) == Fraction(1, 3)


def test_spectrum_E_infinite_is_outside_closed_form():
    with pytest.raises(SpectrumRangeError):
        spectrum_E("inf", 2)


def test_weighted_spectrum_ignores_weights():
    rng = random.Random(1)
    for _ in range(10):
        w = [Fraction(rng.randint(1, 9), rng.randint(1, 5)) for _ in range(rng.randint(2, 5))]
        assert spectrum_E_weighted(3, WeightVector(w), Fraction(5, 2)) == Fraction(2, 5)


def test_spectrum_lambda_depends_on_sigma_only():
    a = spectrum_E_Lambda(7, WeightVector([1, 2]), 2)
    b = spectrum_E_Lambda(7, WeightVector([2, 1]), 2)
    assert a == b == Fraction(4, 14)


def test_boxes_are_positive_and_nested_in_growth():
    spec = builtin_cantor_spec("E0")
    for n in (1, 5, 40, 300):
        lo, hi = integer_box(spec, n)
        assert 1 <= lo <= hi


def test_jqdg_box_is_exact_and_monotone():
    spec = builtin_cantor_spec("Jqdg", Fraction(4), Fraction(2))
    for n in range(1, 200):
        lo, hi = integer_box(spec, n)
        assert (lo, hi) == (2 * n * n, 2 * n * (n + 1))
        assert hi < integer_box(spec, n + 1)[0]


def test_jqdg_requires_alpha_above_sigma():
    with pytest.raises(ValueError):
        builtin_cantor_spec("Jqdg", 2, 2)


def test_samples_lie_in_boxes_and_are_seeded():
    spec = builtin_cantor_spec("PowerAlpha", 2)
    a = sample_point(spec, 500, seed=5)
    assert a == sample_point(spec, 500, seed=5)
    for n in (1, 17, 499):
        lo, hi = integer_box(spec, n + 1)
        assert max(lo, 1) <= a[n] <= hi


def test_infinity_family_has_huge_digits():
    spec = builtin_cantor_spec("Infinity")
    w = sample_point(spec, 120, seed=2)
    assert w[119] > 10 ** 50


def test_jqdg_samples_are_monotone():
    spec = builtin_cantor_spec("Jqdg", 4, 2)
    assert is_monotone(sample_point(spec, 2000, seed=3))
    assert monotone_violation_rate(spec, 500, [1, 2, 3]) == 0


def test_lr_formula_e0():
    r = lr_dimension_formula(builtin_cantor_spec("E0"), 100_000, 2)
    assert abs(r.value - 0.5) < 1e-3


def test_lr_formula_jqdg():
    r = lr_dimension_formula(builtin_cantor_spec("Jqdg", 4, 2), 100_000, 2)
    assert abs(r.value - 0.25) < 1e-2


def test_sequence_csv_roundtrip():
    spec = builtin_cantor_spec("E0")
    buf = io.StringIO()
    write_sequence_csv(spec, 400, buf)
    table = read_tabulated_csv(io.StringIO("# comment\n" + buf.getvalue()))
    a = lr_dimension_formula(spec, 399, 2).value
    b = lr_dimension_formula(table, 399, 2).value
    assert abs(a - b) < 1e-12


def test_tabulated_warns_on_bad_hypotheses():
    with pytest.warns(UserWarning):
        tabulated_spec([1, 2, 3, 4], [2, 2, 2, 2])


def test_tabulated_rejects_nonpositive():
    with pytest.raises(ValueError):
        tabulated_spec([1, 0], [1, 1])


def test_empty_box_is_a_construction_error():
    with pytest.warns(UserWarning):
        spec = tabulated_spec(np.full(10, 1.2), np.full(10, 0.1))
    with pytest.raises(ConstructionError):
        sample_point(spec, 5, seed=0)
