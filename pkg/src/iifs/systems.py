"""Gauss-like infinite iterated function systems on [0, 1].

A system is a countable family of contracting branches ``f_1, f_2, ...``
whose images tile the unit interval, ordered so that ``f_i`` lies to the
left of ``f_j`` whenever ``i > j``.  The image of branch ``n`` is the cell
``[q_{n+1}, q_n]`` with ``q_1 = 1`` and ``q_n -> 0``.

Digits are found by searching the partition points ``q_n`` and iterates
are pushed through the inverse branch in outward-rounded interval
arithmetic, so every reported digit is either certified or explicitly
marked untrusted.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr, mpq, mpz
from scipy import special

from .interval import Interval, hurwitz_zeta, riemann_zeta, rounding_contexts, to_mpfr

__all__ = [
    "SystemKind",
    "GaussLikeSystem",
    "ContinuedFraction",
    "Luroth",
    "QuadraticGauss",
    "LinearDecay",
    "DigitWord",
    "CylinderInterval",
    "Expansion",
    "ExpansionError",
    "AmbiguousExpansionError",
    "make_system",
    "system_from_config",
    "branch",
    "expand",
    "project",
    "cylinder_length_bounds",
    "log_cylinder_length_bounds",
    "cylinder_length_bound_intervals",
    "branch_derivative_bounds",
    "default_precision",
    "expand_dyadic_cell",
    "random_expansion",
]


class ExpansionError(ValueError):
    """The iterate left the domain where digits are defined."""


class AmbiguousExpansionError(ExpansionError):
    """The point sits on a shared endpoint of two branch images."""


class SystemKind:
    CONTINUED_FRACTION = "continued_fraction"
    LUROTH = "luroth"
    QUADRATIC_GAUSS = "quadratic_gauss"
    LINEAR_DECAY = "linear_decay"

    ALIASES = {
        "cf": CONTINUED_FRACTION,
        "continued_fraction": CONTINUED_FRACTION,
        "continuedfraction": CONTINUED_FRACTION,
        "gauss": CONTINUED_FRACTION,
        "luroth": LUROTH,
        "lueroth": LUROTH,
        "lüroth": LUROTH,
        "quadratic_gauss": QUADRATIC_GAUSS,
        "quadraticgauss": QUADRATIC_GAUSS,
        "qg": QUADRATIC_GAUSS,
        "linear_decay": LINEAR_DECAY,
        "lineardecay": LINEAR_DECAY,
        "linear": LINEAR_DECAY,
    }

    @classmethod
    def normalize(cls, kind) -> str:
        key = str(kind).strip().lower().replace("-", "_")
        try:
            return cls.ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown system kind {kind!r}") from None


# -- digit words -----------------------------------------------------------


def _digit_array(digits) -> np.ndarray:
    if isinstance(digits, DigitWord):
        return digits._digits
    if isinstance(digits, np.ndarray) and digits.dtype.kind in "iu":
        return digits.astype(np.int64, copy=True)
    items = [int(a) for a in digits]
    if all(-(2**62) < a < 2**62 for a in items):
        return np.array(items, dtype=np.int64)
    return np.array(items, dtype=object)


class DigitWord(Sequence):
    """Finite word of positive integers; the address of a cylinder.

    Stored as an int64 array, or an object array of Python ints once a
    digit no longer fits.
    """

    __slots__ = ("_digits",)

    def __init__(self, digits=()):
        arr = _digit_array(digits)
        if arr.ndim != 1:
            raise ValueError("digit word must be one-dimensional")
        if arr.size and min(arr) < 1:
            raise ValueError("digits must be positive integers")
        arr.flags.writeable = False
        self._digits = arr

    @property
    def digits(self) -> tuple:
        return tuple(int(a) for a in self._digits)

    @property
    def array(self) -> np.ndarray:
        return self._digits

    def __len__(self):
        return int(self._digits.size)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return DigitWord(self._digits[idx])
        return int(self._digits[idx])

    def __iter__(self):
        return (int(a) for a in self._digits)

    def __add__(self, other):
        other = DigitWord(other)
        if self._digits.dtype == object or other._digits.dtype == object:
            return DigitWord(list(self) + list(other))
        return DigitWord(np.concatenate([self._digits, other._digits]))

    def __eq__(self, other):
        try:
            return self.digits == tuple(int(a) for a in other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.digits)

    def __repr__(self):
        return f"DigitWord({list(self.digits)!r})"

    def tolist(self) -> list:
        return list(self.digits)

    def log_digits(self) -> np.ndarray:
        if self._digits.dtype == object:
            return np.array([math.log(a) for a in self._digits], dtype=float)
        return np.log(self._digits.astype(float))


# -- systems -----------------------------------------------------------------


def _mantissa_exp(v):
    m, e = v.as_mantissa_exp()
    return int(m), int(e)


def _reciprocal_power_le(power_of_m: int, v) -> bool:
    """Exactly decide ``1 / power_of_m <= v`` for an mpfr ``v >= 0``."""
    m, e = _mantissa_exp(v)
    if m <= 0:
        return False
    if e >= 0:
        return True
    return power_of_m * m >= 1 << (-e)


def _reciprocal_power_eq(power_of_m: int, v) -> bool:
    m, e = _mantissa_exp(v)
    if m <= 0:
        return False
    if e >= 0:
        return power_of_m * (m << e) == 1
    return power_of_m * m == 1 << (-e)


@dataclass(frozen=True, eq=False)
class GaussLikeSystem:
    """Base class.  Subclasses supply the partition points and branch maps.

    ``orientation`` is +1 for increasing branches and -1 for decreasing.
    """

    kind: str
    d: float
    c1: object
    c2: object
    kappa: object = None
    orientation: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: object = field(default_factory=threading.Lock, repr=False, compare=False)

    # ---- identity

    def __eq__(self, other):
        return isinstance(other, GaussLikeSystem) and self.to_config() == other.to_config()

    def __hash__(self):
        return hash(tuple(sorted(self.to_config().items())))

    @property
    def name(self) -> str:
        return self.kind

    def to_config(self) -> dict:
        return {"kind": self.kind}

    @property
    def is_exact(self) -> bool:
        """Partition points are rationals that can be compared exactly."""
        return False

    def exact_step(self, q: Fraction):
        """``(digit, T(q), tie)`` in rational arithmetic, or ``None`` if unsupported.

        ``T(q)`` is ``None`` when the next iterate is irrational.
        """
        return None

    # ---- constants

    def c1_float(self) -> float:
        return float(self.c1)

    def c2_float(self) -> float:
        return float(self.c2)

    def constant_intervals(self, prec: int):
        return Interval(self.c1, prec=prec), Interval(self.c2, prec=prec)

    def derivative_bounds(self, i: int):
        raise NotImplementedError

    # ---- partition points

    def partition(self, m: int, prec: int) -> Interval:
        """Enclosure of ``q_m``, the upper end of the image of branch ``m``."""
        raise NotImplementedError

    def partition_le(self, m: int, v) -> bool | None:
        """Decide ``q_m <= v``; ``None`` when the enclosure cannot tell."""
        if m == 1:
            return v >= 1
        q = self.partition(m, v.precision + 8)
        if q.hi <= v:
            return True
        if q.lo > v:
            return False
        return None

    def partition_eq(self, m: int, v) -> bool:
        return False

    def digit_guess(self, v: float) -> int | None:
        return None

    def digit(self, v) -> int | None:
        """Smallest ``n`` with ``q_{n+1} <= v``, or ``None`` if undecidable.

        ``v`` is an mpfr in ``(0, 1]``.  Taking the smallest index resolves
        points shared by two neighbouring images toward the lower branch
        index.
        """
        le = self.partition_le
        r = le(2, v)
        if r is None:
            return None
        if r:
            return 1
        fv = float(v)
        g = self.digit_guess(fv) if fv > 0 else None
        if g is not None and g >= 2:
            for n in (g, g + 1, g - 1, g + 2, g - 2):
                if n < 2:
                    continue
                a, b = le(n + 1, v), le(n, v)
                if a is None or b is None:
                    return None
                if a and not b:
                    return n
        lo, hi = 1, 2          # invariant: q_{lo+1} > v >= q_{hi+1}
        while True:
            r = le(hi + 1, v)
            if r is None:
                return None
            if r:
                break
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            r = le(mid + 1, v)
            if r is None:
                return None
            if r:
                hi = mid
            else:
                lo = mid
        return hi

    # ---- maps on intervals

    def branch_interval(self, i: int, x: Interval) -> Interval:
        raise NotImplementedError

    def inverse_interval(self, i: int, y: Interval) -> Interval:
        raise NotImplementedError

    # ---- float helpers (vectorized, non-rigorous)

    def branch_float(self, i, x):
        raise NotImplementedError

    def derivative_float(self, i, x):
        """``|f_i'(x)|`` as floats."""
        raise NotImplementedError

    def level1_lengths(self, a):
        """``|I_1(a)|`` as floats."""
        raise NotImplementedError

    def letter_envelope(self):
        """``(C_lo, shift_lo, C_hi)`` with ``C_lo (a+shift_lo)^-d <= xi_a`` and ``lambda_a <= C_hi a^-d``."""
        raise NotImplementedError

    def tail_power_sum_bounds(self, t: float, K: int):
        """Bounds ``(low, high)`` with ``low <= sum_{a>K} xi_a^t`` and ``sum_{a>K} lambda_a^t <= high``.

        Cylinder lengths ``|I_1(a)|`` lie in ``[xi_a, lambda_a]`` so the same
        bounds apply to their ``t``-th powers.
        """
        e = self.d * t
        if e <= 1:
            return math.inf, math.inf
        c_lo, shift, c_hi = self.letter_envelope()
        low = c_lo**t * (K + 1 + shift) ** (1 - e) / (e - 1)
        high = c_hi**t * (K if K >= 1 else 1) ** (1 - e) / (e - 1)
        if K < 1:
            high += c_hi**t
        return low, high

    def derivative_tail_float(self, x, t: float, K: int):
        """Approximate ``sum_{i>K} |f_i'(x)|^t``; used for operator tails."""
        raise NotImplementedError

    def derivative_moment_tail_float(self, x, t: float, K: int):
        """Approximate ``sum_{i>K} |f_i'(x)|^t f_i(x)``."""
        raise NotImplementedError

    def partition_float(self, n):
        """``q_n`` as floats."""
        raise NotImplementedError

    def length_tail_float(self, t: float, K: int) -> float:
        """Approximate ``sum_{a>K} |I_1(a)|^t``."""
        raise NotImplementedError

    def expected_bits_per_digit(self) -> float:
        return 1.5 * self.d * 1.5


def _product_tail(t, K):
    """Approximate ``sum_{a>K} (a(a+1))^-t`` by a two-term Hurwitz expansion."""
    h = K + 1.5
    return float(special.zeta(2.0 * t, h) + 0.25 * t * special.zeta(2.0 * t + 2.0, h))


def _reciprocal_digit(q: Fraction):
    """Digit of ``q`` for images ``[1/(n+1), 1/n]`` plus the shared-endpoint flag."""
    r = 1 / q
    n = max(1, -((-r.numerator) // r.denominator) - 1)      # ceil(1/q) - 1
    return n, q == Fraction(1, n + 1)


def _reciprocal_square_digit(q: Fraction):
    """Same for images ``[1/(n+1)^2, 1/n^2]``."""
    a, b = q.denominator, q.numerator                       # 1/q = a/b
    N = math.isqrt(-(-a // b))
    while N * N * b < a:
        N += 1
    n = max(1, N - 1)
    return n, q == Fraction(1, (n + 1) ** 2)


class ContinuedFraction(GaussLikeSystem):
    """Gauss map branches ``f_n(x) = 1/(x+n)``."""

    def __init__(self):
        super().__init__(kind=SystemKind.CONTINUED_FRACTION, d=2.0, c1=Fraction(1, 8),
                         c2=Fraction(1), kappa=4, orientation=-1)

    @property
    def is_exact(self):
        return True

    def derivative_bounds(self, i):
        return Fraction(1, (i + 1) ** 2), Fraction(1, i * i)

    def partition(self, m, prec):
        return Interval(mpq(1, m), prec=prec)

    def partition_le(self, m, v):
        return _reciprocal_power_le(m, v)

    def partition_eq(self, m, v):
        return _reciprocal_power_eq(m, v)

    def digit_guess(self, v):
        return int(1.0 / v) if v > 1e-300 else None

    def branch_interval(self, i, x):
        dn, up = rounding_contexts(x.prec)
        one = mpfr(1)
        return Interval._raw(dn.div(one, up.add(x.hi, i)), up.div(one, dn.add(x.lo, i)), x.prec)

    def inverse_interval(self, i, y):
        dn, up = rounding_contexts(y.prec)
        one = mpfr(1)
        return Interval._raw(dn.sub(dn.div(one, y.hi), i), up.sub(up.div(one, y.lo), i), y.prec)

    def exact_step(self, q):
        n, tie = _reciprocal_digit(q)
        return n, 1 / q - n, tie

    def branch_float(self, i, x):
        return 1.0 / (np.asarray(x, dtype=float) + i)

    def derivative_float(self, i, x):
        return 1.0 / (np.asarray(x, dtype=float) + i) ** 2

    def level1_lengths(self, a):
        a = np.asarray(a, dtype=float)
        return 1.0 / (a * (a + 1.0))

    def letter_envelope(self):
        return 1.0, 1.0, 1.0

    def derivative_tail_float(self, x, t, K):
        return special.zeta(2.0 * t, np.asarray(x, dtype=float) + K + 1)

    def derivative_moment_tail_float(self, x, t, K):
        return special.zeta(2.0 * t + 1.0, np.asarray(x, dtype=float) + K + 1)

    def partition_float(self, n):
        return 1.0 / np.asarray(n, dtype=float)

    def length_tail_float(self, t, K):
        return _product_tail(t, K)

    def expected_bits_per_digit(self):
        return 3.5


class Luroth(GaussLikeSystem):
    """Affine increasing branches onto ``[1/(n+1), 1/n]``."""

    def __init__(self):
        super().__init__(kind=SystemKind.LUROTH, d=2.0, c1=Fraction(1, 4),
                         c2=Fraction(1), kappa=1, orientation=1)

    @property
    def is_exact(self):
        return True

    def derivative_bounds(self, i):
        v = Fraction(1, i * (i + 1))
        return v, v

    def partition(self, m, prec):
        return Interval(mpq(1, m), prec=prec)

    def partition_le(self, m, v):
        return _reciprocal_power_le(m, v)

    def partition_eq(self, m, v):
        return _reciprocal_power_eq(m, v)

    def digit_guess(self, v):
        return int(1.0 / v) if v > 1e-300 else None

    def branch_interval(self, i, x):
        dn, up = rounding_contexts(x.prec)
        k = i * (i + 1)
        one = mpfr(1)
        lo = dn.add(dn.div(x.lo, k), dn.div(one, i + 1))
        hi = up.add(up.div(x.hi, k), up.div(one, i + 1))
        return Interval._raw(lo, hi, x.prec)

    def inverse_interval(self, i, y):
        dn, up = rounding_contexts(y.prec)
        k = i * (i + 1)
        return Interval._raw(dn.sub(dn.mul(y.lo, k), i), up.sub(up.mul(y.hi, k), i), y.prec)

    def exact_step(self, q):
        n, tie = _reciprocal_digit(q)
        return n, n * (n + 1) * q - n, tie

    def branch_float(self, i, x):
        i = np.asarray(i, dtype=float)
        return np.asarray(x, dtype=float) / (i * (i + 1.0)) + 1.0 / (i + 1.0)

    def derivative_float(self, i, x):
        i = np.asarray(i, dtype=float)
        return np.broadcast_to(1.0 / (i * (i + 1.0)), np.broadcast(i, np.asarray(x)).shape).copy()

    def level1_lengths(self, a):
        a = np.asarray(a, dtype=float)
        return 1.0 / (a * (a + 1.0))

    def letter_envelope(self):
        return 1.0, 1.0, 1.0

    def derivative_tail_float(self, x, t, K):
        # (i(i+1))^{-t} = (i+1/2)^{-2t} (1 - 1/(4(i+1/2)^2))^{-t}
        h = K + 1.5
        val = special.zeta(2.0 * t, h) + 0.25 * t * special.zeta(2.0 * t + 2.0, h)
        return np.full(np.shape(x), val, dtype=float)

    def derivative_moment_tail_float(self, x, t, K):
        # f_i(x) = (x+i)/(i(i+1)); expand around h = i + 1/2
        h = K + 1.5
        x = np.asarray(x, dtype=float)
        return special.zeta(2.0 * t + 1.0, h) + (x - 0.5) * special.zeta(2.0 * t + 2.0, h)

    def partition_float(self, n):
        return 1.0 / np.asarray(n, dtype=float)

    def length_tail_float(self, t, K):
        return _product_tail(t, K)

    def expected_bits_per_digit(self):
        return 4.0


class QuadraticGauss(GaussLikeSystem):
    """Branches ``f_n(x) = 1/(x+n)^2``."""

    def __init__(self):
        super().__init__(kind=SystemKind.QUADRATIC_GAUSS, d=3.0, c1=Fraction(1, 4),
                         c2=Fraction(2), kappa=None, orientation=-1)

    @property
    def is_exact(self):
        return True

    def derivative_bounds(self, i):
        return Fraction(2, (i + 1) ** 3), Fraction(2, i**3)

    def partition(self, m, prec):
        return Interval(mpq(1, m * m), prec=prec)

    def partition_le(self, m, v):
        return _reciprocal_power_le(m * m, v)

    def partition_eq(self, m, v):
        return _reciprocal_power_eq(m * m, v)

    def digit_guess(self, v):
        return int(1.0 / math.sqrt(v)) if v > 1e-300 else None

    def branch_interval(self, i, x):
        dn, up = rounding_contexts(x.prec)
        one = mpfr(1)
        lo = dn.div(one, up.square(up.add(x.hi, i)))
        hi = up.div(one, dn.square(dn.add(x.lo, i)))
        return Interval._raw(lo, hi, x.prec)

    def inverse_interval(self, i, y):
        dn, up = rounding_contexts(y.prec)
        return Interval._raw(dn.sub(dn.rec_sqrt(y.hi), i), up.sub(up.rec_sqrt(y.lo), i), y.prec)

    def exact_step(self, q):
        n, tie = _reciprocal_square_digit(q)
        ra, rb = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if ra * ra != q.numerator or rb * rb != q.denominator:
            return n, None, tie
        return n, Fraction(rb, ra) - n, tie

    def branch_float(self, i, x):
        return 1.0 / (np.asarray(x, dtype=float) + i) ** 2

    def derivative_float(self, i, x):
        return 2.0 / (np.asarray(x, dtype=float) + i) ** 3

    def level1_lengths(self, a):
        a = np.asarray(a, dtype=float)
        return (2.0 * a + 1.0) / (a * a * (a + 1.0) ** 2)

    def letter_envelope(self):
        return 2.0, 1.0, 2.0

    def derivative_tail_float(self, x, t, K):
        return 2.0**t * special.zeta(3.0 * t, np.asarray(x, dtype=float) + K + 1)

    def derivative_moment_tail_float(self, x, t, K):
        return 2.0**t * special.zeta(3.0 * t + 2.0, np.asarray(x, dtype=float) + K + 1)

    def partition_float(self, n):
        return 1.0 / np.asarray(n, dtype=float) ** 2

    def length_tail_float(self, t, K):
        # (2a+1)/(a^2 (a+1)^2) = 2 h^-3 (1 - 1/(4h^2))^-2 with h = a + 1/2
        h = K + 1.5
        return 2.0**t * (special.zeta(3.0 * t, h) + 0.5 * t * special.zeta(3.0 * t + 2.0, h))

    def expected_bits_per_digit(self):
        return 5.0


class LinearDecay(GaussLikeSystem):
    """Affine increasing branches with ``|I_1(n)| = n^-d / zeta(d)``.

    Partition points ``p_n = zeta(d, n) / zeta(d)``.  Small indices use
    cached harmonic-type partial sums, large ones a Hurwitz zeta enclosure.
    """

    HARMONIC_CACHE_LOW_PREC = 1 << 16
    HARMONIC_CACHE_HIGH_PREC = 4096

    def __init__(self, d):
        d = float(d)
        if not d > 1 or not math.isfinite(d):
            raise ValueError(f"LinearDecay needs d > 1, got {d!r}")
        z = float(special.zeta(d))
        super().__init__(kind=SystemKind.LINEAR_DECAY, d=d, c1=1.0 / z, c2=1.0 / z,
                         kappa=1, orientation=1)
        object.__setattr__(self, "_zeta_float", z)

    def to_config(self):
        return {"kind": self.kind, "d": self.d}

    def derivative_bounds(self, i):
        v = float(i) ** (-self.d) / self._zeta_float
        return v, v

    def constant_intervals(self, prec):
        c = self.zeta_d(prec).recip()
        return c, c

    # cached high-precision quantities, one table per precision
    def _table(self, prec):
        tab = self._cache.get(prec)
        if tab is None:
            with self._lock:
                tab = self._cache.get(prec)
                if tab is None:
                    wp = prec + 16
                    tab = {"zeta": riemann_zeta(self.d, wp), "H": [Interval(0, prec=wp)], "wp": wp,
                           "hurwitz": {}}
                    self._cache[prec] = tab
        return tab

    def zeta_d(self, prec):
        z = self._table(prec)["zeta"]
        return Interval(z.lo, z.hi, prec=prec)

    def _harmonic(self, tab, n):
        """``H[n] = sum_{k<=n} k^-d`` as an interval (extends the cache)."""
        H = tab["H"]
        if n < len(H):
            return H[n]
        with self._lock:
            wp = tab["wp"]
            s = Interval(self.d, prec=wp)
            while len(H) <= n:
                k = len(H)
                H.append(H[-1] + Interval(k, prec=wp) ** (-s))
        return H[n]

    def partition(self, m, prec):
        tab = self._table(prec)
        limit = self.HARMONIC_CACHE_LOW_PREC if prec <= 1024 else self.HARMONIC_CACHE_HIGH_PREC
        if m == 1:
            return Interval(1, prec=prec)
        if m <= limit:
            p = 1 - self._harmonic(tab, m - 1) / tab["zeta"]
        else:
            hz = tab["hurwitz"].get(m)
            if hz is None:
                hz = hurwitz_zeta(self.d, m, tab["wp"])
                if len(tab["hurwitz"]) < 4096:
                    tab["hurwitz"][m] = hz
            p = hz / tab["zeta"]
        p = p.clamp(0, 1)
        return Interval(p.lo, p.hi, prec=prec)

    def gap(self, m, prec):
        """``|I_1(m)| = m^-d / zeta(d)``."""
        tab = self._table(prec)
        wp = tab["wp"]
        g = Interval(m, prec=wp) ** (-Interval(self.d, prec=wp)) / tab["zeta"]
        return Interval(g.lo, g.hi, prec=prec)

    def digit_guess(self, v):
        d = self.d
        g = ((d - 1.0) * self._zeta_float * v) ** (-1.0 / (d - 1.0)) + 0.5
        if not math.isfinite(g) or g > 1e15:
            return None
        return max(1, int(g))

    def branch_interval(self, i, x):
        p = self.partition(i + 1, x.prec)
        return (p + x * self.gap(i, x.prec)).clamp(0, 1)

    def inverse_interval(self, i, y):
        p = self.partition(i + 1, y.prec)
        g = self.gap(i, y.prec)
        dn, up = rounding_contexts(y.prec)
        num_lo = dn.sub(y.lo, p.hi)
        lo = dn.div(num_lo, g.hi) if num_lo >= 0 else dn.div(num_lo, g.lo)
        hi_num = up.sub(y.hi, p.lo)
        hi = up.div(hi_num, g.lo) if hi_num >= 0 else up.div(hi_num, g.hi)
        return Interval._raw(lo, hi, y.prec)

    def _partition_float(self, n):
        n = np.asarray(n, dtype=float)
        return special.zeta(self.d, n) / self._zeta_float

    def branch_float(self, i, x):
        i = np.asarray(i, dtype=float)
        return self._partition_float(i + 1.0) + np.asarray(x, dtype=float) * i ** (-self.d) / self._zeta_float

    def derivative_float(self, i, x):
        i = np.asarray(i, dtype=float)
        v = i ** (-self.d) / self._zeta_float
        return np.broadcast_to(v, np.broadcast(i, np.asarray(x)).shape).copy()

    def level1_lengths(self, a):
        return np.asarray(a, dtype=float) ** (-self.d) / self._zeta_float

    def letter_envelope(self):
        c = 1.0 / self._zeta_float
        return c, -1.0, c

    def derivative_tail_float(self, x, t, K):
        val = self._zeta_float ** (-t) * special.zeta(self.d * t, K + 1.0)
        return np.full(np.shape(x), val, dtype=float)

    def derivative_moment_tail_float(self, x, t, K):
        # p_{i+1} ~ (i + 1/2)^(1-d) / ((d-1) zeta(d))
        d, z = self.d, self._zeta_float
        x = np.asarray(x, dtype=float)
        a = special.zeta(d * t + d - 1.0, K + 1.0) / ((d - 1.0) * z)
        b = x * special.zeta(d * t + d, K + 1.0) / z
        return z ** (-t) * (a + b)

    def partition_float(self, n):
        return self._partition_float(n)

    def length_tail_float(self, t, K):
        return float(self._zeta_float ** (-t) * special.zeta(self.d * t, K + 1.0))

    def expected_bits_per_digit(self):
        return 2.0 + 2.0 * self.d


# -- construction --------------------------------------------------------------


def make_system(kind, d=None) -> GaussLikeSystem:
    """Build a built-in system by kind name (``cf``, ``luroth``, ``qg``, ``linear_decay``)."""
    k = SystemKind.normalize(kind)
    if k == SystemKind.LINEAR_DECAY:
        if d is None:
            raise ValueError("LinearDecay needs a decay exponent d > 1")
        return LinearDecay(d)
    if d is not None:
        fixed = {SystemKind.CONTINUED_FRACTION: 2.0, SystemKind.LUROTH: 2.0,
                 SystemKind.QUADRATIC_GAUSS: 3.0}[k]
        if float(d) != fixed:
            raise ValueError(f"{k} has fixed decay exponent {fixed:g}")
    return {SystemKind.CONTINUED_FRACTION: ContinuedFraction,
            SystemKind.LUROTH: Luroth,
            SystemKind.QUADRATIC_GAUSS: QuadraticGauss}[k]()


def system_from_config(config) -> GaussLikeSystem:
    """``{"kind": "linear_decay", "d": 2.5}`` or ``{"kind": "continued_fraction"}``."""
    if isinstance(config, GaussLikeSystem):
        return config
    if isinstance(config, str):
        import json
        config = json.loads(config) if config.strip().startswith("{") else {"kind": config}
    if not isinstance(config, dict) or "kind" not in config:
        raise ValueError("system config must be an object with a 'kind' field")
    extra = set(config) - {"kind", "d"}
    if extra:
        raise ValueError(f"unknown system config fields: {sorted(extra)}")
    return make_system(config["kind"], config.get("d"))


# -- point operations ----------------------------------------------------------


def _as_interval(x, prec: int) -> Interval:
    if isinstance(x, Interval):
        return Interval(x.lo, x.hi, prec=prec)
    if isinstance(x, (tuple, list)) and len(x) == 2:
        return Interval(x[0], x[1], prec=prec)
    return Interval(x, prec=prec)


def branch(system: GaussLikeSystem, i: int, x, precision: int = 53):
    """``f_i(x)`` as an mpfr with error below ``2**-precision``."""
    if i < 1:
        raise ValueError("branch index must be >= 1")
    wp = precision + 16
    X = _as_interval(x, wp)
    if X.lo < 0 or X.hi > 1:
        raise ValueError("x must lie in [0, 1]")
    Y = system.branch_interval(int(i), X).clamp(0, 1)
    out = gmpy2.context(precision=precision + 2).plus(Y.mid())
    return out


def branch_derivative_bounds(system: GaussLikeSystem, i: int):
    """Certified ``(xi_i, lambda_i)`` with ``xi_i <= |f_i'| <= lambda_i`` on [0, 1]."""
    if i < 1:
        raise ValueError("branch index must be >= 1")
    return system.derivative_bounds(int(i))


def default_precision(system: GaussLikeSystem, word) -> int:
    """``64 + ceil(1.5 * sum d*log2(a+1))`` bits."""
    logs = sum(math.log2(a + 1) for a in word)
    return 64 + math.ceil(1.5 * system.d * logs)


class Expansion(NamedTuple):
    word: DigitWord
    trusted_count: int
    ambiguous: bool
    precision_bits: int
    final_width: float


def _expand_enclosure(system, X: Interval, n: int):
    digits = []
    trusted = 0
    ambiguous = False
    trusting = True
    v = None
    for _ in range(n):
        if trusting:
            X = X.clamp(0, 1)
            if X.hi <= 0:
                raise ExpansionError("expansion terminates: iterate reached 0")
            dl = system.digit(X.lo) if X.lo > 0 else None
            dh = system.digit(X.hi) if dl is not None else None
            if dl is not None and dl == dh:
                if system.is_exact and X.is_point() and system.partition_eq(dl + 1, X.lo):
                    ambiguous = True
                digits.append(dl)
                trusted += 1
                X = system.inverse_interval(dl, X)
                continue
            trusting = False
            v = X.mid()
        # untrusted continuation from a point estimate
        if v <= 0:
            raise ExpansionError("expansion terminates: iterate reached 0")
        dg = system.digit(v)
        if dg is None:
            # comparisons with the point are still undecidable; take the lower bracket
            dg = _digit_float_fallback(system, v)
        digits.append(dg)
        Y = system.inverse_interval(dg, Interval._raw(v, v, X.prec)).clamp(0, 1)
        v = Y.mid()
    last_width = float(X.width()) if trusting else math.inf
    return digits, trusted, ambiguous, last_width


def _digit_float_fallback(system, v):
    fv = float(v)
    g = system.digit_guess(fv) if fv > 0 else None
    return g if g is not None and g >= 1 else 1


def _exact_rational(x):
    """``x`` as a Fraction when it is an exact rational, else ``None``."""
    if isinstance(x, bool):
        return None
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x) if math.isfinite(x) else None
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            return None
    if isinstance(x, type(mpq())):
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, type(mpfr())) and gmpy2.is_finite(x):
        return Fraction(*x.as_integer_ratio())
    return None


def expand(system: GaussLikeSystem, x, n: int, precision: int | None = None,
           strict: bool = False) -> Expansion:
    """First ``n`` digits of ``x`` with the count of certified digits.

    ``x`` may be a number, a decimal or ``p/q`` string, a Fraction, or an
    Interval enclosure.  Exact rationals on systems with rational branches
    are iterated in rational arithmetic for as long as the orbit stays
    rational (``precision_bits`` is 0 when that covers all ``n`` digits).
    Otherwise the working precision grows until all ``n`` digits are
    certified (or growth stops helping); a given ``precision`` fixes a
    single pass.  Points on a shared endpoint of two images get the
    smaller digit and set ``ambiguous``; with ``strict=True`` they raise.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    q = _exact_rational(x)
    if q is not None:
        if not 0 < q < 1:
            raise ValueError("x must lie strictly inside (0, 1)")
    else:
        probe = _as_interval(x, 64 if precision is None else precision)
        if probe.hi <= 0 or probe.lo >= 1:
            raise ValueError("x must lie strictly inside (0, 1)")

    prefix, tie_seen, restart = [], False, None
    if q is not None and system.exact_step(q) is not None:
        while len(prefix) < n:
            if q == 0:
                raise ExpansionError("expansion terminates: iterate reached 0")
            dig, nxt, tie = system.exact_step(q)
            prefix.append(dig)
            tie_seen = tie_seen or tie
            if strict and tie:
                raise AmbiguousExpansionError("point lies on a shared endpoint of two branch images")
            if nxt is None:
                restart = (dig, q)           # the orbit leaves the rationals here
                break
            q = nxt
        if restart is None:
            return Expansion(DigitWord(prefix), n, tie_seen, 0, 0.0)

    def source(prec):
        if restart is not None:
            dig, qq = restart
            return system.inverse_interval(dig, Interval(qq, prec=prec)).clamp(0, 1)
        return _as_interval(x, prec)

    rest = n - len(prefix)
    prec = int(precision) if precision is not None else 64 + math.ceil(1.5 * system.d * rest)
    best = None
    for _ in range(8):
        digits, trusted, ambiguous, width = _expand_enclosure(system, source(prec), rest)
        best = Expansion(DigitWord(prefix + digits), len(prefix) + trusted,
                         ambiguous or tie_seen, prec, width)
        if precision is not None or trusted == rest:
            break
        if isinstance(x, Interval) and prec >= x.prec:
            # the input enclosure itself limits what can be certified
            break
        prec = max(default_precision(system, digits), 2 * prec)
    if strict and best.ambiguous:
        raise AmbiguousExpansionError("point lies on a shared endpoint of two branch images")
    return best


# -- cylinders ------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderInterval:
    """Rigorous enclosure of ``f_{a_1} o ... o f_{a_n}([0, 1])``.

    ``left`` and ``right`` enclose the two endpoints; ``lo``/``hi`` are the
    outer bounds.  ``degraded`` is set when the endpoint enclosures are not
    small relative to the cylinder.
    """

    word: DigitWord
    lo: object
    hi: object
    precision_bits: int
    left: Interval
    right: Interval
    degraded: bool = False

    @property
    def level(self) -> int:
        return len(self.word)

    def length_bounds(self):
        dn, up = rounding_contexts(self.precision_bits)
        low = dn.sub(self.right.lo, self.left.hi)
        return (low if low > 0 else mpfr(0)), up.sub(self.right.hi, self.left.lo)

    @property
    def length(self) -> float:
        a, b = self.length_bounds()
        return float((a + b) / 2)

    def endpoint_width(self) -> float:
        return float(max(self.left.width(), self.right.width()))

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, Fraction):
            x = mpq(x.numerator, x.denominator)
        elif isinstance(x, str):
            X = Interval(x, prec=self.precision_bits + 8)
            return self.lo <= X.lo and X.hi <= self.hi
        return self.lo <= x <= self.hi

    __contains__ = contains

    def contains_cylinder(self, other: "CylinderInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def project(system: GaussLikeSystem, word, precision: int | None = None) -> CylinderInterval:
    """Cylinder of ``word`` as a rigorous interval enclosure."""
    w = word if isinstance(word, DigitWord) else DigitWord(word)
    if len(w) == 0:
        raise ValueError("word must be non-empty")
    prec = int(precision) if precision is not None else default_precision(system, w)
    e0 = Interval(0, prec=prec)
    e1 = Interval(1, prec=prec)
    for a in reversed(w.digits):
        e0 = system.branch_interval(a, e0).clamp(0, 1)
        e1 = system.branch_interval(a, e1).clamp(0, 1)
    decreasing = system.orientation < 0 and len(w) % 2 == 1
    left, right = (e1, e0) if decreasing else (e0, e1)
    lo, hi = left.lo, right.hi
    width = max(float(left.width()), float(right.width()))
    span = float(right.lo - left.hi)
    degraded = span <= 0 or width > span * 2.0**-20
    return CylinderInterval(w, lo, hi, prec, left, right, degraded)


def log_cylinder_length_bounds(system: GaussLikeSystem, word):
    """``(n log c1 - d sum log a, n log c2 - d sum log a)``."""
    w = word if isinstance(word, DigitWord) else DigitWord(word)
    if len(w) == 0:
        raise ValueError("word must be non-empty")
    s = float(np.sum(w.log_digits()))
    n = len(w)
    return (n * math.log(system.c1_float()) - system.d * s,
            n * math.log(system.c2_float()) - system.d * s)


def cylinder_length_bounds(system: GaussLikeSystem, word):
    """``(c1^n prod a^-d, c2^n prod a^-d)`` as floats, computed from logs."""
    lo, hi = log_cylinder_length_bounds(system, word)
    return math.exp(lo), math.exp(hi)


def cylinder_length_bound_intervals(system: GaussLikeSystem, word, prec: int):
    """Rigorous enclosures of both sides of the length sandwich."""
    w = word if isinstance(word, DigitWord) else DigitWord(word)
    c1, c2 = system.constant_intervals(prec)
    dpow = Interval(system.d, prec=prec)
    prod = Interval(1, prec=prec)
    for a in w:
        prod = prod * Interval(a, prec=prec) ** (-dpow if system.d != int(system.d) else -int(system.d))
    n = len(w)
    return c1**n * prod, c2**n * prod


# -- fast Monte Carlo expansion of dyadic cells ----------------------------------


def _cf_digits_pair(pl, pr, q, depth):
    """Common digit prefix of ``pl/q`` and ``pr/q`` under the Gauss map."""
    out = []
    al, bl = mpz(pl), mpz(q)
    ar, br = mpz(pr), mpz(q)
    while len(out) < depth:
        if al == 0 or ar == 0:
            break
        nl, rl = gmpy2.f_divmod(bl, al)
        if rl == 0:
            nl = nl - 1 if nl > 1 else nl
        nr, rr = gmpy2.f_divmod(br, ar)
        if rr == 0:
            nr = nr - 1 if nr > 1 else nr
        if nl != nr:
            break
        out.append(int(nl))
        al, bl = bl - nl * al, al
        ar, br = br - nr * ar, ar
    return out


def _luroth_digits_pair(pl, pr, q, depth):
    out = []
    al, ar, q = mpz(pl), mpz(pr), mpz(q)
    while len(out) < depth:
        if al == 0 or ar == 0:
            break
        nl, rl = gmpy2.f_divmod(q, al)
        if rl == 0:
            nl = nl - 1 if nl > 1 else nl
        nr, rr = gmpy2.f_divmod(q, ar)
        if rr == 0:
            nr = nr - 1 if nr > 1 else nr
        if nl != nr:
            break
        out.append(int(nl))
        al = nl * (nl + 1) * al - nl * q
        ar = nr * (nr + 1) * ar - nr * q
    return out


def expand_dyadic_cell(system: GaussLikeSystem, U: int, bits: int, depth: int) -> list:
    """Digits shared by every point of ``[U, U+1] / 2**bits``, up to ``depth``.

    Exact integer arithmetic for the continued fraction and Luroth maps,
    outward-rounded intervals otherwise.
    """
    q = 1 << bits
    if not 0 < U < q:
        return []
    if system.kind == SystemKind.CONTINUED_FRACTION:
        return _cf_digits_pair(U, U + 1, q, depth)
    if system.kind == SystemKind.LUROTH:
        return _luroth_digits_pair(U, U + 1, q, depth)
    prec = bits + 64
    X = Interval._raw(mpfr(mpq(U, q), prec), mpfr(mpq(U + 1, q), prec), prec)
    digits = []
    for _ in range(depth):
        X = X.clamp(0, 1)
        if X.lo <= 0:
            break
        dl = system.digit(X.lo)
        if dl is None or dl != system.digit(X.hi):
            break
        digits.append(dl)
        X = system.inverse_interval(dl, X)
    return digits


@functools.lru_cache(maxsize=16)
def _affine_partition_table(d: float, size: int = 1 << 16) -> np.ndarray:
    """``q_2 .. q_{size+1}`` of LinearDecay(d), increasing order."""
    n = np.arange(2, size + 2, dtype=float)
    return (special.zeta(d, n) / special.zeta(d, 1))[::-1].copy()


def _affine_digit(d: float, v: float) -> int:
    """Smallest ``n`` with ``q_{n+1} <= v`` for LinearDecay(d)."""
    table = _affine_partition_table(d)
    size = table.size
    j = int(np.searchsorted(table, v, side="right"))      # entries <= v
    if j > 0:
        return size - j + 1
    z = special.zeta(d, 1)
    lo, hi = size, 2 * size                                # q_{lo+1} > v
    while special.zeta(d, hi + 1) / z > v:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if special.zeta(d, mid + 1) / z <= v:
            hi = mid
        else:
            lo = mid
    return hi


def _iid_affine_digits(system, depth: int, rng) -> list:
    # affine full branches map Lebesgue measure to itself, so the digits of a
    # uniform point are i.i.d. with the level-1 law; sample that law directly
    v = 1.0 - rng.random(depth)                            # uniform on (0, 1]
    return [_affine_digit(system.d, float(x)) for x in v]


def random_expansion(system: GaussLikeSystem, depth: int, rng, max_bits: int | None = None):
    """Certified first ``depth`` digits of a uniform random point.

    The point is revealed one block of random bits at a time: the dyadic
    cell containing it is expanded, and more bits are drawn while the cell
    is too coarse.  Returns ``(digits, complete)``; ``complete`` is False
    when ``max_bits`` ran out first.  For LinearDecay, whose branches are
    affine, the digits are drawn i.i.d. from the level-1 law instead (same
    distribution, one double per digit).
    """
    if system.kind == SystemKind.LINEAR_DECAY:
        return _iid_affine_digits(system, depth, rng), True
    need = int(64 + system.expected_bits_per_digit() * depth)
    if max_bits is None:
        max_bits = 64 + 40 * depth + 4096
    bits = 0
    U = 0
    digits: list = []
    while True:
        extra = max(64, need - bits)
        extra = min(extra, max_bits - bits) if bits < max_bits else 0
        if extra <= 0:
            return digits, False
        nbytes = (extra + 7) // 8
        fresh = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - extra)
        U = (U << extra) | fresh
        bits += extra
        digits = expand_dyadic_cell(system, U, bits, depth)
        if len(digits) >= depth:
            return digits[:depth], True
        missing = depth - len(digits)
        need = bits + int(system.expected_bits_per_digit() * missing * 1.5) + 64
