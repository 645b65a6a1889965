import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from iifs.covers import (Dk, DkTilde, GoodFM, crossing_trend, dk_cardinality_bound,
                         dk_tilde_cardinality_bound, good_critical_exponent, hausdorff_sum_scan,
                         product_set_upper_bound, stirling_bounds, subdivision_dimension_bound)
from iifs.measures import BracketError
from iifs.cantor import count_monotone_words
from iifs.systems import make_system


def test_critical_exponent_solves_zeta_equation():
    s = good_critical_exponent(2, 1, 2)
    assert abs(float(mpmath.zeta(2 * s)) - 2) < 1e-9
    assert abs(s - 0.86432) < 1e-5


def test_critical_exponent_d3():
    s = good_critical_exponent(3, 1, 2)
    assert abs(float(mpmath.zeta(3 * s)) - 2) < 1e-9


def test_critical_exponent_decreases_towards_one_over_d():
    Ms = (2, 10, 100, 1000, 10_000)
    vals = [good_critical_exponent(2, 1, M) for M in Ms]
    assert all(a > b > 0.5 for a, b in zip(vals, vals[1:]))
    for M, v in zip(Ms, vals):
        ref = mpmath.findroot(lambda s: mpmath.zeta(2 * s, M) - 1, v)
        assert abs(v - float(ref)) < 1e-9


def test_critical_exponent_approach_is_slow():
    # 2s - 1 ~ W(log M)/log M, so s* is still near 0.518 at M = 10^40
    assert abs(good_critical_exponent(2, 1, 10 ** 40) - 0.518035517) < 1e-6


def test_critical_exponent_with_large_c2():
    # c2 = 2: root of 2^s zeta(2s, M) = 1 exists for M >= 2 when 2 < M^2
    s = good_critical_exponent(2, 2, 3)
    assert abs(float(2 ** s * mpmath.zeta(2 * s, 3)) - 1) < 1e-9


def test_critical_exponent_without_root():
    with pytest.raises(BracketError):
        good_critical_exponent(2, 10, 2)


def test_critical_result_json():
    r = good_critical_exponent(2, 1, 2, full=True)
    assert '"s_star"' in r.to_json() and r.M == 2


def test_product_set_bound_inequality():
    d, c2, m, t, eps = 2, 1, 1, 1.1, 0.1
    s, M = product_set_upper_bound(d, c2, m, t, eps)
    assert abs(s - 0.6) < 1e-12
    with mpmath.workdps(50):
        t, eps = mpmath.mpf(t), mpmath.mpf(eps)
        lhs = s * mpmath.log(c2) + mpmath.log(mpmath.zeta(t))
        assert lhs < eps * mpmath.log(M) / (m + 1)
        assert not lhs < eps * mpmath.log(M - 1) / (m + 1)


def test_product_set_bound_trivial_when_c2_small():
    assert product_set_upper_bound(2, 0.01, 1, 2, 0.1)[1] == 1


def test_dk_count_small_and_bound():
    b = dk_cardinality_bound(10, 0, 0.1, 1)
    assert b.ell == 1 and b.exact == 1
    for k in range(2, 60):
        b = dk_cardinality_bound(k, Fraction(4), Fraction(1, 10), Fraction(2))
        assert b.exact == count_monotone_words(k, b.ell)
        assert b.holds


def test_dk_empty_family():
    b = dk_cardinality_bound(2, 0, 0, 10)
    assert b.ell == 1
    b = dk_cardinality_bound(5, Fraction(-1, 2), 0, 1)
    assert b.ell == 0 and b.log_exact == -math.inf


def test_dk_tilde_bound_holds():
    for k in (5, 20, 60):
        b = dk_tilde_cardinality_bound(k, 4, Fraction(1, 100), 2)
        assert b.exact is not None and b.holds
        # extra lower bounds only remove words
        assert b.exact <= count_monotone_words(k, b.ell)


@pytest.mark.parametrize("n", range(1, 21))
def test_stirling_sandwich(n):
    lo, hi = stirling_bounds(n)
    assert lo <= math.lgamma(n + 1) <= hi


def test_scan_at_zero_is_cardinality():
    lin = make_system("linear", 2)
    p = hausdorff_sum_scan(lin, Dk(1, 2), 30, [0.0])
    ell = dk_cardinality_bound(30, 1, 0, 2).ell
    assert abs(p.log_sums[0] - math.log(count_monotone_words(30, ell))) < 1e-9


def test_scan_sums_are_nonincreasing():
    lin = make_system("linear", 2)
    for fam in (GoodFM(3), Dk(3, 2), DkTilde(4, 2)):
        p = hausdorff_sum_scan(lin, fam, 15, np.linspace(0.05, 1.5, 40))
        finite = p.log_sums[np.isfinite(p.log_sums)]
        assert np.all(np.diff(finite) <= 1e-9)


@pytest.mark.parametrize("M", [2, 10, 100])
def test_goodfm_crossing_matches_solver(M):
    cf = make_system("cf")
    grid = np.linspace(0.51, 1.2, 700)
    p = hausdorff_sum_scan(cf, GoodFM(M), 20, grid)
    assert abs(p.crossing - good_critical_exponent(2, 1, M)) < 1e-2


def test_dk_direction():
    lin = make_system("linear", 2)
    grows = [hausdorff_sum_scan(lin, Dk(1, 2), k, [0.0]).log_sums[0] for k in (20, 40, 80)]
    assert grows[0] < grows[1] < grows[2]
    shrink = [hausdorff_sum_scan(lin, Dk(1, 2), k, [0.2]).log_sums[0] for k in (80, 160, 320)]
    assert shrink[0] > shrink[1] > shrink[2]
    assert shrink[-1] < 0


def test_crossing_trend_reports_each_level():
    cf = make_system("cf")
    trend = crossing_trend(cf, GoodFM(2), [5, 10], np.linspace(0.6, 1.0, 81))
    assert [k for k, _ in trend] == [5, 10]
    assert abs(trend[0][1] - trend[1][1]) < 1e-6


def test_scan_rejects_bad_grid():
    with pytest.raises(ValueError):
        hausdorff_sum_scan(make_system("cf"), GoodFM(2), 5, [0.9, 0.8])


def test_subdivision_bound_example():
    r = subdivision_dimension_bound(4, 2, 2, 10)
    assert r.value == Fraction(20, 76)
    assert r.argmax == 9


def test_subdivision_bound_large_n():
    r = subdivision_dimension_bound(4, 2, 2, 10_000)
    assert abs(float(r.value) - 0.25) < 1e-3
    assert r.argmax == 10_000 - 1
    assert all(a < b for a, b in zip(r.values, r.values[1:]))


def test_subdivision_bound_needs_large_n():
    with pytest.raises(ValueError):
        subdivision_dimension_bound(10, 2, 2, 3)
    with pytest.raises(ValueError):
        subdivision_dimension_bound(2, 2, 2, 10)
