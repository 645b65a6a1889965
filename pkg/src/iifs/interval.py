"""Outward-rounded interval arithmetic over MPFR.

Lower endpoints are computed with rounding toward -inf and upper endpoints
toward +inf, so the exact value of any expression assembled from these
operations lies inside the resulting interval.  Each interval carries the
binary precision its endpoints were rounded to.
"""

from __future__ import annotations

import functools
import math
from fractions import Fraction

import gmpy2
import mpmath
from gmpy2 import mpfr, mpq, mpz

__all__ = [
    "Interval",
    "rounding_contexts",
    "to_mpfr",
    "hurwitz_zeta",
    "riemann_zeta",
]

ONE = mpfr(1)


@functools.lru_cache(maxsize=256)
def rounding_contexts(prec: int):
    """Return the (round-down, round-up) MPFR contexts for ``prec`` bits."""
    if prec < 2:
        raise ValueError("precision must be at least 2 bits")
    dn = gmpy2.context(precision=prec, round=gmpy2.RoundDown)
    up = gmpy2.context(precision=prec, round=gmpy2.RoundUp)
    return dn, up


def to_mpfr(value, ctx) -> mpfr:
    """Round ``value`` into the precision and direction of ``ctx``.

    Accepts int, float, str, Fraction, and the gmpy2 numeric types.
    """
    if isinstance(value, str) and "/" in value:
        value = Fraction(value.strip())
    if isinstance(value, Fraction):
        value = mpq(value.numerator, value.denominator)
    elif isinstance(value, mpmath.mpf):
        man, exp = value.man_exp
        value = mpq(int(man)) * mpq(2) ** int(exp)
    return mpfr(value, ctx.precision, context=ctx)


class Interval:
    """Closed interval ``[lo, hi]`` with MPFR endpoints at ``prec`` bits."""

    __slots__ = ("lo", "hi", "prec")

    def __init__(self, lo, hi=None, prec: int = 53):
        dn, up = rounding_contexts(prec)
        if isinstance(lo, Interval):
            lo, hi_default = lo.lo, lo.hi
        else:
            hi_default = lo
        if hi is None:
            hi = hi_default
        elif isinstance(hi, Interval):
            hi = hi.hi
        self.lo = to_mpfr(lo, dn)
        self.hi = to_mpfr(hi, up)
        self.prec = prec
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def _raw(cls, lo, hi, prec):
        self = object.__new__(cls)
        self.lo = lo
        self.hi = hi
        self.prec = prec
        return self

    @classmethod
    def pi(cls, prec: int) -> "Interval":
        dn, up = rounding_contexts(prec)
        return cls._raw(dn.const_pi(), up.const_pi(), prec)

    # -- inspection -------------------------------------------------------

    @property
    def contexts(self):
        return rounding_contexts(self.prec)

    def width(self) -> mpfr:
        return rounding_contexts(self.prec)[1].sub(self.hi, self.lo)

    def mid(self) -> mpfr:
        ctx = gmpy2.context(precision=self.prec + 1)
        return ctx.div_2exp(ctx.add(self.lo, self.hi), 1)

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, value) -> bool:
        if isinstance(value, Interval):
            return self.lo <= value.lo and value.hi <= self.hi
        if isinstance(value, Fraction):
            value = mpq(value.numerator, value.denominator)
        return self.lo <= value <= self.hi

    __contains__ = contains

    def __float__(self) -> float:
        return float(self.mid())

    def __repr__(self) -> str:
        return f"Interval({float(self.lo)!r}, {float(self.hi)!r}, prec={self.prec})"

    # -- lattice ----------------------------------------------------------

    def hull(self, other: "Interval") -> "Interval":
        other = self._coerce(other)
        return Interval._raw(min(self.lo, other.lo), max(self.hi, other.hi), self.prec)

    def intersect(self, other: "Interval") -> "Interval":
        other = self._coerce(other)
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("intervals do not intersect")
        return Interval._raw(lo, hi, self.prec)

    def clamp(self, lo, hi) -> "Interval":
        """Intersect with ``[lo, hi]``; used when the true value is known to lie there."""
        new_lo = self.lo if self.lo > lo else mpfr(lo)
        new_hi = self.hi if self.hi < hi else mpfr(hi)
        if new_lo > new_hi:
            # enclosure lies entirely outside the a-priori range: collapse to the nearest end
            new_lo = new_hi = mpfr(lo) if self.hi < lo else mpfr(hi)
        return Interval._raw(new_lo, new_hi, self.prec)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "Interval":
        if isinstance(other, Interval):
            return other
        return Interval(other, prec=self.prec)

    def __neg__(self):
        return Interval._raw(-self.hi, -self.lo, self.prec)

    def __add__(self, other):
        other = self._coerce(other)
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.add(self.lo, other.lo), up.add(self.hi, other.hi), self.prec)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.sub(self.lo, other.hi), up.sub(self.hi, other.lo), self.prec)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        dn, up = rounding_contexts(self.prec)
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        if a >= 0 and c >= 0:
            return Interval._raw(dn.mul(a, c), up.mul(b, d), self.prec)
        lows = [dn.mul(a, c), dn.mul(a, d), dn.mul(b, c), dn.mul(b, d)]
        highs = [up.mul(a, c), up.mul(a, d), up.mul(b, c), up.mul(b, d)]
        return Interval._raw(min(lows), max(highs), self.prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.lo <= 0 <= other.hi:
            raise ZeroDivisionError("divisor interval contains zero")
        return self * other.recip()

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def recip(self) -> "Interval":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("interval contains zero")
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.div(ONE, self.hi), up.div(ONE, self.lo), self.prec)

    def __pow__(self, exponent):
        dn, up = rounding_contexts(self.prec)
        if isinstance(exponent, (int, mpz)) and not isinstance(exponent, bool):
            n = int(exponent)
            if n == 0:
                return Interval._raw(mpfr(1), mpfr(1), self.prec)
            if self.lo >= 0:
                if n > 0:
                    return Interval._raw(dn.pow(self.lo, n), up.pow(self.hi, n), self.prec)
                return Interval._raw(dn.pow(self.hi, n), up.pow(self.lo, n), self.prec)
            if self.hi <= 0:
                flipped = (-self) ** n
                return flipped if n % 2 == 0 else -flipped
            if n < 0:
                raise ZeroDivisionError("interval contains zero")
            if n % 2 == 0:
                return Interval._raw(mpfr(0), up.pow(max(-self.lo, self.hi), n), self.prec)
            return Interval._raw(dn.pow(self.lo, n), up.pow(self.hi, n), self.prec)
        # real exponent: x**y is monotone in each argument for x > 0
        if self.lo <= 0:
            raise ValueError("real powers need a positive base")
        y = exponent if isinstance(exponent, Interval) else Interval(exponent, prec=self.prec)
        exps = (y.lo,) if y.lo == y.hi else (y.lo, y.hi)
        corners_lo = [dn.pow(x, e) for x in (self.lo, self.hi) for e in exps]
        corners_hi = [up.pow(x, e) for x in (self.lo, self.hi) for e in exps]
        return Interval._raw(min(corners_lo), max(corners_hi), self.prec)

    def __rpow__(self, base):
        return self._coerce(base) ** self

    def sqrt(self) -> "Interval":
        if self.lo < 0:
            raise ValueError("sqrt of negative interval")
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.sqrt(self.lo), up.sqrt(self.hi), self.prec)

    def rsqrt(self) -> "Interval":
        if self.lo <= 0:
            raise ValueError("rsqrt needs a positive interval")
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.rec_sqrt(self.hi), up.rec_sqrt(self.lo), self.prec)

    def log(self) -> "Interval":
        if self.lo <= 0:
            raise ValueError("log needs a positive interval")
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.log(self.lo), up.log(self.hi), self.prec)

    def exp(self) -> "Interval":
        dn, up = rounding_contexts(self.prec)
        return Interval._raw(dn.exp(self.lo), up.exp(self.hi), self.prec)

    def abs_upper(self) -> mpfr:
        return max(abs(self.lo), abs(self.hi))


# -- zeta functions ---------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _bernoulli_ratio(j: int) -> mpq:
    """Exact B_{2j} / (2j)!."""
    frac = mpmath.bernfrac(2 * j)
    return mpq(int(frac[0]), int(frac[1]) * math.factorial(2 * j))


def hurwitz_zeta(s, a: int, prec: int) -> Interval:
    """Rigorous enclosure of ``sum_{k >= a} k**(-s)`` for real ``s > 1``.

    Direct summation up to a shift point ``A``, then Euler-Maclaurin with
    exact Bernoulli numbers.  For ``f(x) = x**(-s)`` the odd derivatives are
    monotone, so the remainder is bounded by the last correction term kept.
    """
    a = int(a)
    if a < 1:
        raise ValueError("Hurwitz parameter must be a positive integer")
    wp = prec + 32
    sv = s if isinstance(s, Interval) else Interval(s, prec=wp)
    sv = Interval(sv.lo, sv.hi, prec=wp)
    if sv.lo <= 1:
        raise ValueError("zeta diverges for s <= 1")
    # shift past s as well, so the asymptotic series decays from its first term
    A = max(a, wp // 2 + 16, int(math.ceil(float(sv.hi))) + 1)
    direct = Interval(0, prec=wp)
    neg_s = -sv
    for k in range(a, A):
        direct = direct + Interval(k, prec=wp) ** neg_s
    Aiv = Interval(A, prec=wp)
    A_neg_s = Aiv ** neg_s
    main = A_neg_s * Aiv / (sv - 1) + A_neg_s / 2
    inv_A2 = (Aiv * Aiv).recip()
    power = A_neg_s / Aiv            # A^(-s-2j+1) at j = 1
    rising = sv                      # (s)_(2j-1) at j = 1
    dn, up = rounding_contexts(wp)
    threshold = dn.mul(main.lo, mpfr(2) ** (-wp))
    corr = Interval(0, prec=wp)
    remainder = None
    for j in range(1, 8 * wp):
        b = Interval(_bernoulli_ratio(j), prec=wp)
        term = b * rising * power
        corr = corr + term
        mag = term.abs_upper()
        if mag < threshold:
            remainder = up.mul(mag, 2)
            break
        rising = rising * (sv + (2 * j - 1)) * (sv + 2 * j)
        power = power * inv_A2
    if remainder is None:
        raise ArithmeticError("Euler-Maclaurin tail did not converge")
    total = direct + main + corr + Interval(-remainder, remainder, prec=wp)
    dn, up = rounding_contexts(prec)
    return Interval._raw(dn.plus(total.lo), up.plus(total.hi), prec)


def riemann_zeta(s, prec: int) -> Interval:
    """Rigorous enclosure of the Riemann zeta function at real ``s > 1``."""
    return hurwitz_zeta(s, 1, prec)
