"""Zeta-weighted cylinder measures, pressure, transfer operators and
Monte Carlo averages along typical orbits."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath
import numpy as np
from scipy import sparse, special

from .interval import Interval, riemann_zeta
from .systems import (
    DigitWord,
    GaussLikeSystem,
    branch_derivative_bounds,
    random_expansion,
)

__all__ = [
    "DivergenceError",
    "BracketError",
    "zeta",
    "zeta_interval",
    "GibbsMeasureSpec",
    "mu_t_cylinder",
    "mu_t_children_sum",
    "mu_t_mass_check",
    "PressureEnclosure",
    "pressure",
    "pressure_root",
    "DensityGrid",
    "perron_iterate",
    "transfer_apply",
    "BirkhoffResult",
    "birkhoff_geometric_mean",
    "khinchin_constant",
    "luroth_geometric_mean",
    "level1_log_mean",
    "density_log_mean",
    "surrogate_log_mean",
    "has_bounded_subsequence",
    "ae_tau_is_infinite_evidence",
]


class DivergenceError(ValueError):
    """A series that must converge does not (exponent at or below threshold)."""


class BracketError(ValueError):
    """Root-finding bracket without a sign change."""


# -- zeta ----------------------------------------------------------------------


def zeta_interval(t, precision: int = 64) -> Interval:
    if not t > 1 + 1e-6:
        raise DivergenceError(f"zeta(t) needs t > 1 + 1e-6, got {t!r}")
    return riemann_zeta(t, precision + 4)


def zeta(t, precision: int = 53):
    """``sum_k k^-t`` accurate to ``2^-precision`` (an mpfr)."""
    return zeta_interval(t, precision).mid()


@dataclass(frozen=True)
class GibbsMeasureSpec:
    """Bernoulli measure giving digit ``a`` the weight ``a^-t / zeta(t)``."""

    t: float
    precision: int = 53
    log_zeta_t: float = field(default=None)

    def __post_init__(self):
        if not self.t > 1:
            raise DivergenceError("the weights a^-t are summable only for t > 1")
        if self.log_zeta_t is None:
            z = zeta_interval(self.t, max(self.precision, 53))
            object.__setattr__(self, "log_zeta_t", float(z.log().mid()))


def mu_t_cylinder(spec: GibbsMeasureSpec, word, log: bool = False) -> float:
    """Measure of the cylinder of ``word``: ``prod a_j^-t / zeta(t)``."""
    w = word if isinstance(word, DigitWord) else DigitWord(word)
    if len(w) == 0:
        raise ValueError("word must be non-empty")
    val = -len(w) * spec.log_zeta_t - spec.t * float(np.sum(w.log_digits()))
    return val if log else math.exp(val)


def _capped_partial(t: float, cap: int) -> float:
    """``sum_{a<=cap} a^-t``."""
    if cap <= 10_000:
        a = np.arange(1, cap + 1, dtype=float)
        return float(np.sum(a ** (-t)))
    return float(mpmath.zeta(t) - mpmath.zeta(t, cap + 1))


def mu_t_children_sum(spec: GibbsMeasureSpec, word, cap: int) -> float:
    """``sum_{a<=cap} mu(word . a)``; never exceeds ``mu(word)``."""
    base = mu_t_cylinder(spec, word) if len(word) else 1.0
    return base * _capped_partial(spec.t, cap) / math.exp(spec.log_zeta_t)


def mu_t_mass_check(spec: GibbsMeasureSpec, n: int, digit_cap: int, exhaustive: bool = False) -> float:
    """Total measure of the level-``n`` cylinders with all digits ``<= digit_cap``.

    By the product structure this is ``(sum_{a<=cap} a^-t / zeta(t))^n``.
    ``exhaustive=True`` sums word by word instead (small ``n`` and caps only).
    """
    if n < 1 or digit_cap < 1:
        raise ValueError("n and digit_cap must be >= 1")
    if exhaustive:
        if n > 6 or digit_cap ** n > 2_000_000:
            raise ValueError("exhaustive mode needs n <= 6 and cap^n <= 2e6")
        total = 0.0
        for w in itertools.product(range(1, digit_cap + 1), repeat=n):
            total += mu_t_cylinder(spec, w)
        return total
    per_letter = _capped_partial(spec.t, digit_cap) / math.exp(spec.log_zeta_t)
    return per_letter ** n


# -- pressure ------------------------------------------------------------------


class PressureEnclosure(NamedTuple):
    lower: float
    upper: float
    estimate: float          # (1/n) log of the level-1 cylinder-length sum

    def contains(self, v: float) -> bool:
        return self.lower <= v <= self.upper


def _derivative_bound_arrays(system: GaussLikeSystem, cap: int):
    a = np.arange(1, cap + 1, dtype=float)
    x0 = np.zeros_like(a)
    x1 = np.ones_like(a)
    d0 = system.derivative_float(a, x0)
    d1 = system.derivative_float(a, x1)
    return np.minimum(d0, d1), np.maximum(d0, d1)


def _log_sum_pow(v: np.ndarray, t: float) -> float:
    return float(special.logsumexp(t * np.log(v)))


def pressure(system: GaussLikeSystem, t: float, n: int = 1, digit_cap: int = 100_000,
             exhaustive: bool = False) -> PressureEnclosure:
    """Enclosure of ``(1/n) log sum_{|w|=n} ||f_w'||^t``.

    Lower bound from the per-branch minima ``xi_a`` and upper bound from
    the maxima ``lambda_a``; the digits beyond ``digit_cap`` contribute
    integral tail bounds.  ``exhaustive=True`` enumerates level-``n`` words
    with digits up to ``digit_cap`` and bounds each composition by the
    chain rule on its sub-cylinders.
    """
    if t * system.d <= 1:
        raise DivergenceError(f"pressure series diverges for t <= 1/d = {1 / system.d:g}")
    if n < 1:
        raise ValueError("n must be >= 1")
    xi, lam = _derivative_bound_arrays(system, digit_cap)
    tail_lo, tail_hi = system.tail_power_sum_bounds(t, digit_cap)
    log_xi_cap = _log_sum_pow(xi, t)
    log_lam_cap = _log_sum_pow(lam, t)
    s_lo = math.log(math.exp(log_xi_cap) + tail_lo) if math.isfinite(tail_lo) else math.inf
    s_hi = math.log(math.exp(log_lam_cap) + tail_hi)
    lengths = system.level1_lengths(np.arange(1, digit_cap + 1))
    est = math.log(math.exp(_log_sum_pow(lengths, t)) + system.length_tail_float(t, digit_cap))
    if not exhaustive or n == 1:
        return PressureEnclosure(min(s_lo, est), max(s_hi, est), est)
    # exhaustive composition bounds
    if digit_cap ** n > 1_000_000:
        raise ValueError("exhaustive mode needs digit_cap^n <= 1e6")
    inner_lo = 0.0
    inner_hi = 0.0
    for w in itertools.product(range(1, digit_cap + 1), repeat=n):
        lo_d, hi_d = _composition_derivative_bounds(system, w)
        inner_lo += lo_d ** t
        inner_hi += hi_d ** t
    # words with at least one digit above the cap
    full_lo = math.exp(s_lo * n) - math.exp(log_xi_cap * n)
    full_hi = math.exp(s_hi * n) - math.exp(log_lam_cap * n)
    lower = math.log(inner_lo + max(full_lo, 0.0)) / n
    upper = math.log(inner_hi + full_hi) / n
    return PressureEnclosure(lower, upper, est)


def _composition_derivative_bounds(system, word):
    """``(min, max)`` of ``|(f_{w1} o ... o f_{wn})'|`` on [0, 1] by the chain rule."""
    lo, hi = 0.0, 1.0
    dmin, dmax = 1.0, 1.0
    for a in reversed(word):
        e = system.derivative_float(float(a), np.array([lo, hi]))
        dmin *= float(e.min())
        dmax *= float(e.max())
        y = system.branch_float(float(a), np.array([lo, hi]))
        lo, hi = float(y.min()), float(y.max())
    return dmin, dmax


def pressure_root(system: GaussLikeSystem, t_lo: float = 0.8, t_hi: float = 1.2,
                  tol: float = 1e-10, digit_cap: int = 100_000) -> float:
    """Zero of the pressure located by bisection on the length-sum estimate.

    The estimate ``log sum |I_1(a)|^t`` is exactly zero at ``t = 1`` for
    systems whose cylinders tile [0, 1].
    """
    if not t_lo < t_hi:
        raise ValueError("need t_lo < t_hi")

    def f(t):
        return pressure(system, t, 1, digit_cap).estimate

    f_lo, f_hi = f(t_lo), f(t_hi)
    if f_lo == 0:
        return t_lo
    if f_hi == 0:
        return t_hi
    if (f_lo > 0) == (f_hi > 0):
        raise BracketError(f"pressure has the same sign at {t_lo} and {t_hi}")
    lo, hi = t_lo, t_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (f_lo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- transfer operator -----------------------------------------------------------


@dataclass
class DensityGrid:
    grid_points: np.ndarray
    values: np.ndarray
    iteration_count: int
    sup_diffs: list = field(default_factory=list)
    integrals: list = field(default_factory=list)
    diverged: bool = False

    def integral(self) -> float:
        return _trapezoid(self.values, self.grid_points)

    def __call__(self, x):
        return np.interp(x, self.grid_points, self.values)

    def to_csv(self, stream, digits: int = 12) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["x", "g"])
        for x, g in zip(self.grid_points, self.values):
            w.writerow([f"{x:.{digits}g}", f"{g:.{digits}g}"])


def _trapezoid(y, x):
    fn = getattr(np, "trapezoid", None) or np.trapz
    return float(fn(y, x))


class _TransferOperator:
    """Discretized ``(Lf)(x) = sum_i |f_i'(x)|^t f(f_i(x))`` on a uniform grid."""

    def __init__(self, system: GaussLikeSystem, t: float, grid_size: int, digit_cap: int):
        if grid_size < 2:
            raise ValueError("grid too small")
        G = grid_size
        self.x = np.linspace(0.0, 1.0, G)
        h = 1.0 / (G - 1)
        # branches whose whole image lies in the first grid cell are folded
        # into two moments, which is exact for piecewise-linear f
        i0 = 1
        while i0 < digit_cap and system.partition_float(i0 + 1) > h:
            i0 *= 2
        lo_i, hi_i = max(1, i0 // 2), i0
        while lo_i < hi_i:
            mid = (lo_i + hi_i) // 2
            if system.partition_float(mid + 1) <= h:
                hi_i = mid
            else:
                lo_i = mid + 1
        explicit = min(digit_cap, max(lo_i, 1))
        acc = np.zeros(G * G) if G <= 4096 else None
        rows_all, cols_all, vals_all = [], [], []
        x = self.x
        chunk = max(1, 4_000_000 // G)
        for start in range(1, explicit + 1, chunk):
            idx = np.arange(start, min(explicit, start + chunk - 1) + 1, dtype=float)[:, None]
            y = np.clip(system.branch_float(idx, x[None, :]), 0.0, 1.0)
            wgt = system.derivative_float(idx, x[None, :]) ** t
            pos = y * (G - 1)
            k = np.minimum(np.floor(pos).astype(np.int64), G - 2)
            frac = pos - k
            rows = np.broadcast_to(np.arange(G), y.shape)
            r = np.concatenate([rows.ravel(), rows.ravel()])
            c = np.concatenate([k.ravel(), (k + 1).ravel()])
            v = np.concatenate([(wgt * (1 - frac)).ravel(), (wgt * frac).ravel()])
            if acc is not None:
                acc += np.bincount(r * G + c, weights=v, minlength=G * G)
            else:
                rows_all.append(r)
                cols_all.append(c)
                vals_all.append(v)
        # moments of the folded branches: W0 = sum w_i, W1 = sum w_i f_i(x)
        W0 = np.zeros(G)
        W1 = np.zeros(G)
        for start in range(explicit + 1, digit_cap + 1, chunk):
            idx = np.arange(start, min(digit_cap, start + chunk - 1) + 1, dtype=float)[:, None]
            wgt = system.derivative_float(idx, x[None, :]) ** t
            W0 += wgt.sum(axis=0)
            W1 += (wgt * system.branch_float(idx, x[None, :])).sum(axis=0)
        tail = system.derivative_tail_float(x, t, digit_cap)
        W0 += tail
        W1 += system.derivative_moment_tail_float(x, t, digit_cap)
        a0 = W0 - W1 / h
        a1 = W1 / h
        if acc is not None:
            acc[np.arange(G) * G] += a0
            acc[np.arange(G) * G + 1] += a1
            self.matrix = acc.reshape(G, G)
        else:
            rows_all += [np.arange(G), np.arange(G)]
            cols_all += [np.zeros(G, dtype=np.int64), np.ones(G, dtype=np.int64)]
            vals_all += [a0, a1]
            self.matrix = sparse.csr_matrix(
                (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
                shape=(G, G))
        self.explicit_branches = explicit

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f


def transfer_apply(system: GaussLikeSystem, f, t: float = 1.0, grid_size: int = 1024,
                   digit_cap: int = 1000) -> np.ndarray:
    """One application of the transfer operator to grid values ``f``."""
    op = _TransferOperator(system, t, grid_size, digit_cap)
    return op.apply(np.asarray(f, dtype=float))


def perron_iterate(system: GaussLikeSystem, t: float = 1.0, grid_size: int = 1024,
                   iterations: int = 30, digit_cap: int = 1000, tol: float = 1e-6) -> DensityGrid:
    """Iterate the transfer operator on the constant function 1.

    ``diverged`` is set when the sup-norm step is above ``tol`` and failed
    to shrink over the last five iterations.  Steps that stall below
    ``tol`` come from the grid operator's leading eigenvalue differing
    from 1 by the interpolation error.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    x = np.linspace(0.0, 1.0, grid_size)
    f = np.ones(grid_size)
    integrals = [_trapezoid(f, x)]
    diffs: list = []
    if iterations > 0:
        op = _TransferOperator(system, t, grid_size, digit_cap)
        for _ in range(iterations):
            g = op.apply(f)
            diffs.append(float(np.max(np.abs(g - f))))
            integrals.append(_trapezoid(g, x))
            f = g
    diverged = False
    if len(diffs) >= 5 and diffs[-1] > tol:
        tail = diffs[-5:]
        diverged = not all(b < a for a, b in zip(tail, tail[1:]))
    return DensityGrid(x, f, iterations, diffs, integrals, diverged)


# -- Monte Carlo ------------------------------------------------------------------


@dataclass
class BirkhoffResult:
    estimate: float
    stderr: float
    samples: int
    depth: int
    seed: int
    min_depth: int
    depth_reduced: bool
    extras: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.estimate
        yield self.stderr

    def to_dict(self) -> dict:
        d = {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "samples": self.samples,
            "depth": self.depth,
            "seed": self.seed,
            "min_depth": self.min_depth,
            "depth_reduced": self.depth_reduced,
        }
        d.update(self.extras)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _sample_digits(system, depth, seed, i, max_bits):
    rng = np.random.default_rng([seed, i])
    return random_expansion(system, depth, rng, max_bits)


def _map_samples(fn, samples, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(samples)))
    return [fn(i) for i in range(samples)]


def birkhoff_geometric_mean(system: GaussLikeSystem, samples: int, depth: int, seed: int,
                            max_bits: int | None = None, workers: int = 1,
                            with_density: bool = False) -> BirkhoffResult:
    """Sample mean of ``(1/depth) sum log a_k`` over uniform points, exponentiated.

    Each sample uses its own RNG stream derived from ``(seed, index)``, so
    results do not depend on ``workers``.  The standard error is
    propagated through the exponential by the delta method.
    """
    if samples < 1 or depth < 1:
        raise ValueError("samples and depth must be positive")

    def one(i):
        digits, _ = _sample_digits(system, depth, seed, i, max_bits)
        if not digits:
            return 0.0, 0
        return float(np.mean([math.log(a) for a in digits])), len(digits)

    results = _map_samples(one, samples, workers)
    means = np.array([m for m, _ in results])
    used = [k for _, k in results]
    mu = float(means.mean())
    sd = float(means.std(ddof=1)) if samples > 1 else 0.0
    est = math.exp(mu)
    extras = {"system": system.to_config(), "mean_log": mu}
    if with_density:
        extras["density_integral"] = math.exp(density_log_mean(system))
        extras["surrogate"] = math.exp(surrogate_log_mean(system))
    return BirkhoffResult(est, est * sd / math.sqrt(samples), samples, depth, seed,
                          min(used), min(used) < depth, extras)


def khinchin_constant(terms: int = 1_000_000) -> float:
    """``prod_k (1 + 1/(k(k+2)))^{log2 k}`` summed in logs with a tail estimate."""
    k = np.arange(2, terms + 1, dtype=float)
    s = float(np.sum(np.log2(k) * np.log1p(1.0 / (k * (k + 2.0)))))
    # tail: sum_{k>K} log2(k)/k^2 ~ (ln K + 1) / (K ln 2)
    K = float(terms)
    s += (math.log(K) + 1.0) / (K * math.log(2.0))
    return math.exp(s)


def luroth_geometric_mean(terms: int = 1_000_000) -> float:
    """``exp(sum_k log k / (k(k+1)))``."""
    k = np.arange(2, terms + 1, dtype=float)
    s = float(np.sum(np.log(k) / (k * (k + 1.0))))
    K = float(terms)
    s += (math.log(K) + 1.0) / K
    return math.exp(s)


def level1_log_mean(system: GaussLikeSystem, digit_cap: int = 1_000_000) -> float:
    """Lebesgue mean of ``log a_1``: ``sum log k |I_1(k)|``."""
    k = np.arange(1, digit_cap + 1, dtype=float)
    return float(np.sum(np.log(k) * system.level1_lengths(k)))


def density_log_mean(system: GaussLikeSystem, grid_size: int = 2048, iterations: int = 40,
                     digit_cap: int = 100_000) -> float:
    """``sum_k log k * m(I_1(k))`` with ``m`` the iterated invariant density."""
    dens = perron_iterate(system, 1.0, grid_size, iterations, min(digit_cap, 4096))
    norm = dens.integral()
    k = np.arange(1, digit_cap + 2, dtype=float)
    q = np.asarray(system.partition_float(k), dtype=float)      # q_1 .. q_{cap+1}
    xs = np.linspace(0.0, 1.0, 20001)
    cdf_vals = np.concatenate([[0.0], np.cumsum(0.5 * (dens(xs[1:]) + dens(xs[:-1])) * np.diff(xs))])
    cdf = np.interp(q, xs, cdf_vals) / norm
    masses = cdf[:-1] - cdf[1:]
    return float(np.sum(np.log(k[:-1]) * masses))


def surrogate_log_mean(system: GaussLikeSystem) -> float:
    """``sum log k * k^-d / zeta(d)``, the digit law of the decay exponent alone."""
    d = system.d
    return float(mpmath.zeta(d, 1, 1) * -1 / mpmath.zeta(d))


def has_bounded_subsequence(digits, bound: int = 1, fraction: float = 0.01) -> bool:
    """True when at least ``fraction`` of the digits are ``<= bound``."""
    n = len(digits)
    if n == 0:
        return False
    small = sum(1 for a in digits if a <= bound)
    return small >= fraction * n


def ae_tau_is_infinite_evidence(system: GaussLikeSystem, samples: int, depth: int, seed: int,
                                bound: int = 1, fraction: float = 0.01,
                                max_bits: int | None = None, workers: int = 1) -> float:
    """Fraction of sampled points with a bounded digit subsequence of positive density."""

    def one(i):
        digits, _ = _sample_digits(system, depth, seed, i, max_bits)
        return has_bounded_subsequence(digits, bound, fraction)

    hits = _map_samples(one, samples, workers)
    return sum(hits) / samples
