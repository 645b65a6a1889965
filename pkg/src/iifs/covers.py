"""Upper-bound machinery: cover sums and their critical exponents.

Cylinder lengths are bounded by ``c2^n prod a_i^-d``; every sum over an
unbounded digit alphabet is evaluated through a per-letter closed form
(Hurwitz zeta) or, for bounded monotone families, by a dynamic program
over complete homogeneous symmetric polynomials.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

from .cantor import count_monotone_words
from .interval import hurwitz_zeta
from .measures import BracketError, zeta
from .systems import GaussLikeSystem

__all__ = [
    "good_critical_exponent",
    "GoodExponentResult",
    "product_set_upper_bound",
    "DkBound",
    "dk_cardinality_bound",
    "dk_tilde_cardinality_bound",
    "stirling_bounds",
    "GoodFM",
    "Dk",
    "DkTilde",
    "CoverSumProfile",
    "hausdorff_sum_scan",
    "crossing_trend",
    "SubdivisionResult",
    "subdivision_dimension_bound",
]


# -- Good-type sets --------------------------------------------------------------


class GoodExponentResult(NamedTuple):
    s_star: float
    M: int
    bracket: tuple
    tol: float

    def to_json(self) -> str:
        return json.dumps({"s_star": self.s_star, "M": self.M, "bracket": list(self.bracket),
                           "tol": self.tol}, sort_keys=True)


def _log_letter_sum(d: float, c2: float, M: int, s: float, prec: int = 64) -> float:
    """``log(c2^s * sum_{b>=M} b^-ds)`` from a rigorous Hurwitz enclosure."""
    z = hurwitz_zeta(d * s, M, prec)
    return s * math.log(c2) + float(z.log().mid())


def good_critical_exponent(d: float, c2: float = 1.0, M: int = 2, tol: float = 1e-12,
                           full: bool = False):
    """Root ``s*`` of ``c2^s sum_{b>=M} b^-ds = 1``.

    The left side is infinite as ``s -> 1/d`` and decreasing, so bisection
    on ``(1/d, s_hi]`` applies once some ``s_hi`` makes it drop below 1.
    """
    if not d > 1:
        raise ValueError("d must be > 1")
    if M < 2:
        raise ValueError("M must be >= 2")
    if c2 <= 0:
        raise ValueError("c2 must be positive")
    if math.log(c2) >= d * math.log(M):
        raise BracketError("no root: c2 >= M^d keeps the per-letter sum above 1")
    lo = (1.0 + 1e-9) / d
    if _log_letter_sum(d, c2, M, lo) <= 0:
        raise BracketError("cover sum is already below 1 next to s = 1/d")
    hi = 1.0 / d + 1.0
    for _ in range(60):
        if _log_letter_sum(d, c2, M, hi) < 0:
            break
        hi *= 2.0
    else:
        raise BracketError("no root above 1/d: the per-letter sum never drops below 1")
    bracket = (lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _log_letter_sum(d, c2, M, mid) > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return GoodExponentResult(s, M, bracket, tol) if full else s


# -- product sets ----------------------------------------------------------------------


def product_set_upper_bound(d: float, c2: float, m: int, t: float, eps: float):
    """``s = (t+eps)/d`` and the least integer ``M`` with
    ``s log c2 + log zeta(t) < eps log M / (m+1)``."""
    if not t > 1:
        raise ValueError("t must be > 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if m < 1:
        raise ValueError("m must be >= 1")
    s = (t + eps) / d
    with mpmath.workdps(60):
        rhs = (m + 1) * (s * mpmath.log(c2) + mpmath.log(mpmath.zeta(t))) / eps
        if rhs < 0:
            return s, 1
        M = int(mpmath.floor(mpmath.exp(rhs)))
        while mpmath.log(M) <= rhs:
            M += 1
        while M > 1 and mpmath.log(M - 1) > rhs:
            M -= 1
    return s, M


# -- cardinality bounds ---------------------------------------------------------------


def _floor_power(k: int, e) -> int:
    """``floor(k^e)`` exactly for rational or float ``e``."""
    if isinstance(e, Fraction):
        # largest L with L^q <= k^p
        p, q = e.numerator, e.denominator
        target = k ** p if p >= 0 else None
        if target is not None:
            with mpmath.workdps(50):
                L = int(mpmath.floor(mpmath.power(k, mpmath.mpf(p) / q)))
            while L ** q > target:
                L -= 1
            while (L + 1) ** q <= target:
                L += 1
            return L
    with mpmath.workdps(50):
        return int(mpmath.floor(mpmath.power(k, mpmath.mpf(float(e)))))


def _ceil_power(j: int, e) -> int:
    if j <= 0:
        return 1
    L = _floor_power(j, e)
    if isinstance(e, Fraction):
        p, q = e.numerator, e.denominator
        return L if L ** q == j ** p else L + 1
    with mpmath.workdps(50):
        v = mpmath.power(j, mpmath.mpf(float(e)))
        return int(mpmath.ceil(v))


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return x


class DkBound(NamedTuple):
    log_exact: float
    log_bound: float
    ell: int
    exact: int

    @property
    def holds(self) -> bool:
        return self.log_exact <= self.log_bound


def _log_int(n: int) -> float:
    return -math.inf if n <= 0 else math.log(n)


def dk_cardinality_bound(k: int, alpha, s, sigma_t) -> DkBound:
    """Monotone words of length ``k`` with digits at most ``floor(k^((alpha+s)/sigma_t))``.

    Returns the exact count and the bound ``(1 + log k) k^((alpha+s)/sigma_t)``,
    both in log scale.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    a, sv, sg = _exact(alpha), _exact(s), _exact(sigma_t)
    e = (a + sv) / sg
    ell = _floor_power(k, e)
    bound = (1.0 + math.log(k)) * float(k) ** float(e)
    if ell < 1:
        return DkBound(-math.inf, bound, ell, 0)
    exact = count_monotone_words(k, ell)
    return DkBound(_log_int(exact), bound, ell, exact)


def stirling_bounds(n: int):
    """Log of ``sqrt(2 pi) n^(n+1/2) e^-n`` and ``e n^(n+1/2) e^-n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    core = (n + 0.5) * math.log(n) - n
    return 0.5 * math.log(2 * math.pi) + core, 1.0 + core


def _tilde_lower_bounds(k: int, alpha, eps, sigma_t, m: int):
    e = (alpha - eps) / sigma_t
    return [_ceil_power(j - m, e) for j in range(1, k + 1)]


def dk_tilde_cardinality_bound(k: int, alpha, eps, sigma_t, m: int = 0,
                               max_states: int = 20_000_000) -> DkBound:
    """Family with the extra floor ``a_j >= (j-m)^((alpha-eps)/sigma_t)``.

    Exact count by dynamic programming (``None`` beyond ``max_states``) and
    the Stirling-type bound ``2^k e^(k (alpha+eps)/sigma_t) (k!)^((alpha+eps)/sigma_t - 1)``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    a, ep, sg = _exact(alpha), _exact(eps), _exact(sigma_t)
    e_hi = (a + ep) / sg
    ell = _floor_power(k, e_hi)
    fe = float(e_hi)
    log_bound = k * math.log(2) + k * fe + (fe - 1.0) * math.lgamma(k + 1)
    if ell < 1:
        return DkBound(-math.inf, log_bound, ell, 0)
    if k * ell > max_states:
        return DkBound(math.nan, log_bound, ell, None)
    lows = _tilde_lower_bounds(k, a, ep, sg, m)
    # counts[v-1] = number of valid prefixes ending in value v (Python ints, exact)
    counts = [1 if v >= lows[0] else 0 for v in range(1, ell + 1)]
    for j in range(1, k):
        run = 0
        nxt = []
        for v in range(1, ell + 1):
            run += counts[v - 1]
            nxt.append(run if v >= lows[j] else 0)
        counts = nxt
    exact = sum(counts)
    return DkBound(_log_int(exact), log_bound, ell, exact)


# -- cover families and scans ------------------------------------------------------------


@dataclass(frozen=True)
class GoodFM:
    """All words with every digit at least ``M``."""

    M: int


@dataclass(frozen=True)
class Dk:
    """Monotone words with ``a_k <= k^((alpha+s)/sigma_t)``; the cut-off uses the scanned ``s``."""

    alpha: float
    sigma_t: float


@dataclass(frozen=True)
class DkTilde:
    """Monotone words between ``(j-m)^((alpha-eps)/sigma_t)`` and ``k^((alpha+eps)/sigma_t)``."""

    alpha: float
    sigma_t: float
    eps: float = 1e-2
    m: int = 0


@dataclass
class CoverSumProfile:
    s_grid: np.ndarray
    log_sums: np.ndarray
    truncation: dict = field(default_factory=dict)
    crossing: float | None = None

    def to_csv(self, stream, digits: int = 12) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["s", "log_sum", "k"])
        k = self.truncation.get("k")
        for s, v in zip(self.s_grid, self.log_sums):
            w.writerow([f"{s:.{digits}g}", "inf" if v == math.inf else f"{v:.{digits}g}", k])


def _letter_sum_float(d: float, s: float, M: int, terms: int = 20_000) -> float:
    """``sum_{b>=M} b^-ds`` by direct summation plus an Euler-Maclaurin tail."""
    e = d * s
    if e <= 1:
        return math.inf
    b = np.arange(M, M + terms, dtype=float)
    head = float(np.sum(b ** (-e)))
    B = float(M + terms)
    tail = B ** (1 - e) / (e - 1) + 0.5 * B ** (-e) + e * B ** (-e - 1) / 12.0
    return head + tail


def _log_h(logx: np.ndarray, k: int) -> float:
    """``log h_k(x_1..x_l)`` (complete homogeneous symmetric polynomial)."""
    H = np.zeros(logx.size)                  # h_0 over prefixes = 1
    for _ in range(k):
        H = np.logaddexp.accumulate(logx + H)
    return float(H[-1])


def _log_tilde_sum(logx: np.ndarray, lows: Sequence[int], k: int) -> float:
    ell = logx.size
    v = np.arange(1, ell + 1)
    F = np.where(v >= lows[0], logx, -np.inf)
    for j in range(1, k):
        with np.errstate(invalid="ignore"):
            acc = np.logaddexp.accumulate(F)
        F = np.where(v >= lows[j], logx + acc, -np.inf)
    with np.errstate(invalid="ignore"):
        return float(np.logaddexp.reduce(F))


def hausdorff_sum_scan(system: GaussLikeSystem, family, k: int, s_grid) -> CoverSumProfile:
    """Log of ``sum_{w in family_k} (c2^k prod a_i^-d)^s`` across ``s_grid``."""
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.ndim != 1 or s_grid.size == 0 or np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be strictly increasing")
    if k < 1:
        raise ValueError("k must be >= 1")
    d, c2 = system.d, system.c2_float()
    out = np.empty(s_grid.size)
    if isinstance(family, GoodFM):
        if family.M < 1:
            raise ValueError("M must be >= 1")
        for i, s in enumerate(s_grid):
            if s == 0:
                out[i] = math.inf
                continue
            ls = _letter_sum_float(d, s, family.M)
            out[i] = math.inf if ls == math.inf else k * (s * math.log(c2) + math.log(ls))
        trunc = {"k": k, "family": "GoodFM", "M": family.M}
    elif isinstance(family, Dk):
        if family.sigma_t <= 0:
            raise ValueError("sigma_t must be positive")
        ells = []
        for i, s in enumerate(s_grid):
            e = (family.alpha + s) / family.sigma_t
            ell = _floor_power(k, e)
            ells.append(ell)
            if ell < 1:
                out[i] = -math.inf
                continue
            logx = s * (math.log(c2) - d * np.log(np.arange(1, ell + 1, dtype=float)))
            out[i] = _log_h(logx, k)
        trunc = {"k": k, "family": "Dk", "alpha": family.alpha, "sigma_t": family.sigma_t,
                 "ell_max": max(ells)}
    elif isinstance(family, DkTilde):
        if not 0 < family.eps < family.alpha:
            raise ValueError("eps must lie in (0, alpha)")
        a, sg, ep = _exact(family.alpha), _exact(family.sigma_t), _exact(family.eps)
        ell = _floor_power(k, (a + ep) / sg)
        lows = _tilde_lower_bounds(k, a, ep, sg, family.m)
        if ell < 1 or lows[-1] > ell:
            out[:] = -math.inf
        else:
            logv = np.log(np.arange(1, ell + 1, dtype=float))
            for i, s in enumerate(s_grid):
                out[i] = _log_tilde_sum(s * (math.log(c2) - d * logv), lows, k)
        trunc = {"k": k, "family": "DkTilde", "alpha": family.alpha, "sigma_t": family.sigma_t,
                 "eps": family.eps, "m": family.m, "ell": ell}
    else:
        raise TypeError("family must be GoodFM, Dk or DkTilde")
    return CoverSumProfile(s_grid, out, trunc, _crossing(s_grid, out))


def _crossing(s_grid, log_sums):
    """First ``s`` where the log-sum falls through zero, linearly interpolated."""
    for i in range(1, len(s_grid)):
        a, b = log_sums[i - 1], log_sums[i]
        if a > 0 and b <= 0:
            if not math.isfinite(a):
                return float(s_grid[i])
            return float(s_grid[i - 1] + (s_grid[i] - s_grid[i - 1]) * a / (a - b))
    return None


def crossing_trend(system: GaussLikeSystem, family, ks, s_grid):
    """Crossing exponent for each truncation level ``k``."""
    return [(k, hausdorff_sum_scan(system, family, k, s_grid).crossing) for k in ks]


# -- subdivision bound ---------------------------------------------------------------------


class SubdivisionResult(NamedTuple):
    value: object
    argmax: int
    values: list

    def __float__(self):
        return float(self.value)


def subdivision_dimension_bound(alpha, sigma_t, d, n: int) -> SubdivisionResult:
    """``max_{0<=k<n} (k+1)(alpha-sigma)/(d((n-k)sigma + k alpha))``.

    Exact for rational inputs.  Needs ``sigma < alpha < inf`` and
    ``n > (alpha - sigma)/sigma``, under which the maximum sits at ``k = n-1``.
    """
    a, sg, dd = _exact(alpha), _exact(sigma_t), _exact(d)
    if a == math.inf or not (sg < a):
        raise ValueError("need sigma_t < alpha < inf")
    if not dd > 1:
        raise ValueError("d must be > 1")
    if not n > (a - sg) / sg:
        raise ValueError("n must exceed (alpha - sigma_t)/sigma_t")
    vals = [(k + 1) * (a - sg) / (dd * ((n - k) * sg + k * a)) for k in range(n)]
    best = max(range(n), key=lambda k: vals[k])
    return SubdivisionResult(vals[best], best, vals)
