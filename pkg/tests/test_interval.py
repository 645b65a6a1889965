import math
from fractions import Fraction

import mpmath
import pytest

from iifs.interval import Interval, hurwitz_zeta, riemann_zeta


def test_point_from_decimal_string_encloses_value():
    x = Interval("0.1", prec=64)
    assert x.lo < x.hi
    assert x.lo <= Fraction(1, 10) <= x.hi


def test_fraction_string_accepted():
    x = Interval("1/3", prec=80)
    assert x.contains(Fraction(1, 3))


def test_arithmetic_encloses_exact_rational_result():
    a = Interval(Fraction(1, 3), prec=60)
    b = Interval(Fraction(2, 7), prec=60)
    for res, exact in [(a + b, Fraction(13, 21)), (a - b, Fraction(1, 21)),
                       (a * b, Fraction(2, 21)), (a / b, Fraction(7, 6))]:
        assert res.contains(exact)
        assert float(res.width()) < 1e-15


def test_recip_and_sqrt():
    x = Interval(2, prec=100)
    r = x.sqrt()
    assert (r * r).contains(2)
    assert x.recip().contains(Fraction(1, 2))


def test_log_exp_roundtrip_encloses():
    x = Interval(Fraction(3, 2), prec=80)
    assert x.log().exp().contains(Fraction(3, 2))


def test_integer_and_real_powers():
    x = Interval(Fraction(3, 2), prec=80)
    assert (x ** 3).contains(Fraction(27, 8))
    assert (x ** -2).contains(Fraction(4, 9))
    y = x ** Interval(Fraction(1, 2), prec=80)
    assert abs(float(y.mid()) - math.sqrt(1.5)) < 1e-20


def test_hull_intersect_clamp():
    a = Interval(0, 1, prec=53)
    b = Interval(Fraction(1, 2), 2, prec=53)
    assert float(a.hull(b).hi) == 2
    assert float(a.intersect(b).lo) == 0.5
    c = Interval(-1, Fraction(1, 2), prec=53).clamp(0, 1)
    assert float(c.lo) == 0 and float(c.hi) == 0.5


@pytest.mark.parametrize("s", [1.5, 2, 3, 7.25])
def test_riemann_zeta_matches_mpmath(s):
    z = riemann_zeta(s, 100)
    with mpmath.workdps(40):
        ref = mpmath.zeta(s)
    assert abs(float(z.mid()) - float(ref)) < 1e-15
    assert float(z.width()) < 1e-25


def test_zeta_two_is_pi_squared_over_six():
    z = riemann_zeta(2, 64)
    assert abs(float(z.mid()) - math.pi ** 2 / 6) < 1e-15


@pytest.mark.parametrize("s,a", [(1.1, 1), (2.5, 7), (4, 1000)])
def test_hurwitz_zeta_matches_mpmath(s, a):
    z = hurwitz_zeta(s, a, 80)
    with mpmath.workdps(40):
        ref = mpmath.zeta(s, a)
    assert abs(float(z.mid()) / float(ref) - 1) < 1e-14


def test_hurwitz_rejects_s_at_most_one():
    with pytest.raises(ValueError):
        hurwitz_zeta(1, 2, 53)
