"""Cantor-type digit sets ``{x : s_n - r_n <= a_n(x) <= s_n + r_n, n >= N}``.

Sequence families are described in log form so that values like ``e^n``
can be handled far beyond float range; integer boxes are recomputed in
high precision whenever a float would be ambiguous.  Also the closed-form
dimension values of the level sets studied here and the monotone-word
count.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import mpmath
import numpy as np

from .exponents import WeightVector
from .systems import DigitWord

__all__ = [
    "CantorSpec",
    "SequenceFamily",
    "ConstructionError",
    "DegenerateSequenceError",
    "SpectrumRangeError",
    "builtin_cantor_spec",
    "tabulated_spec",
    "read_tabulated_csv",
    "write_sequence_csv",
    "integer_box",
    "sample_point",
    "monotone_violation_rate",
    "LRResult",
    "lr_dimension_formula",
    "spectrum_E",
    "spectrum_E_weighted",
    "spectrum_E_Lambda",
    "spectrum_F_G",
    "count_monotone_words",
    "INF",
]

INF = math.inf


class ConstructionError(ValueError):
    """An integer digit box is empty."""


class DegenerateSequenceError(ValueError):
    """``log r_n <= 0`` past the burn-in."""


class SpectrumRangeError(ValueError):
    """Parameter outside the range where the closed form holds."""


@dataclass(frozen=True)
class SequenceFamily:
    """A positive sequence known through ``log v_n`` (float) and ``v_n`` (mpmath)."""

    name: str
    log_fn: Callable          # ndarray of n -> ndarray of log v_n
    mp_fn: Callable           # int n -> mpmath value (uses the current mp precision)
    params: dict = field(default_factory=dict)

    def log_values(self, n) -> np.ndarray:
        return self.log_fn(np.asarray(n, dtype=float))


@dataclass(frozen=True)
class CantorSpec:
    case: str
    s_fn: SequenceFamily
    r_fn: SequenceFamily
    N: int = 1
    params: dict = field(default_factory=dict)

    def log_s(self, n):
        return self.s_fn.log_values(n)

    def log_r(self, n):
        return self.r_fn.log_values(n)

    def to_dict(self) -> dict:
        return {"case": self.case, "N": self.N, **self.params}


def _power_family(name, coef, expo, params):
    """``coef * n^expo``."""
    lc = math.log(coef)
    return SequenceFamily(name, lambda n: lc + expo * np.log(n),
                          lambda n: mpmath.mpf(coef) * mpmath.power(n, expo), params)


def _q_num(value):
    """Exact rationals become mpmath fractions, others floats."""
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def builtin_cantor_spec(case: str, alpha=None, sigma_t=None) -> CantorSpec:
    """Sequences used by the lower-bound constructions.

    ``E0``: ``s_n = 2e^n, r_n = e^n``.
    ``PowerAlpha``: ``s_n = 2n^(1/alpha), r_n = n^(1/alpha)`` (alpha > 0).
    ``EAlphaWeighted``: ``s_n = 2n^(1/(alpha sigma)), r_n = n^(1/(alpha sigma))``.
    ``Jqdg``: ``s_n = (2n+1)n^(alpha/sigma - 1), r_n = n^(alpha/sigma - 1)``, alpha > sigma.
    ``Infinity``: ``s_n = (2n+1)e^n, r_n = e^n``.
    """
    key = case.strip().lower().replace("_", "").replace("-", "")
    if key == "e0":
        s = SequenceFamily("2e^n", lambda n: math.log(2) + n, lambda n: 2 * mpmath.exp(n))
        r = SequenceFamily("e^n", lambda n: n * 1.0, lambda n: mpmath.exp(n))
        return CantorSpec("E0", s, r, 1, {})
    if key in ("poweralpha", "power"):
        a = _positive(alpha, "alpha")
        e = 1.0 / float(a)
        return CantorSpec("PowerAlpha", _power_family("2n^(1/a)", 2.0, e, {}),
                          _power_family("n^(1/a)", 1.0, e, {}), 1, {"alpha": float(a)})
    if key in ("ealphaweighted", "weighted"):
        a = _positive(alpha, "alpha")
        sg = _positive(sigma_t, "sigma_t")
        e = 1.0 / (float(a) * float(sg))
        return CantorSpec("EAlphaWeighted", _power_family("2n^(1/(a S))", 2.0, e, {}),
                          _power_family("n^(1/(a S))", 1.0, e, {}), 1,
                          {"alpha": float(a), "sigma_t": float(sg)})
    if key == "jqdg":
        a = _positive(alpha, "alpha")
        sg = _positive(sigma_t, "sigma_t")
        if not a > sg:
            raise ValueError("the Jqdg construction needs alpha > sigma_t")
        q = float(a) / float(sg) - 1.0
        qm = _q_num(Fraction(a) / Fraction(sg) - 1) if _is_rational(a, sg) else mpmath.mpf(q)
        s = SequenceFamily("(2n+1)n^q", lambda n: np.log(2 * n + 1) + q * np.log(n),
                           lambda n: (2 * n + 1) * mpmath.power(n, qm))
        r = SequenceFamily("n^q", lambda n: q * np.log(n), lambda n: mpmath.power(n, qm))
        return CantorSpec("Jqdg", s, r, 1, {"alpha": float(a), "sigma_t": float(sg)})
    if key in ("infinity", "inf", "exp", "expfamily"):
        s = SequenceFamily("(2n+1)e^n", lambda n: np.log(2 * n + 1) + n,
                           lambda n: (2 * n + 1) * mpmath.exp(n))
        r = SequenceFamily("e^n", lambda n: n * 1.0, lambda n: mpmath.exp(n))
        return CantorSpec("Infinity", s, r, 1, {})
    raise ValueError(f"unknown Cantor case {case!r}")


def _is_rational(*vals):
    return all(isinstance(v, (int, Fraction)) for v in vals)


def _positive(v, name):
    if v is None:
        raise ValueError(f"{name} is required")
    if isinstance(v, str):
        v = Fraction(v)
    if not v > 0 or (isinstance(v, float) and not math.isfinite(v)):
        raise ValueError(f"{name} must be a positive finite number")
    return v


def tabulated_spec(s_values, r_values, N: int = 1, log: bool = False) -> CantorSpec:
    """Custom spec from finite tables ``s_1.., r_1..``; hypotheses are only warned about.

    With ``log=True`` the tables hold ``log s_n`` and ``log r_n``.
    """
    s = np.asarray(s_values, dtype=float)
    r = np.asarray(r_values, dtype=float)
    if s.shape != r.shape or s.ndim != 1 or s.size == 0:
        raise ValueError("s and r tables must be equal-length non-empty sequences")
    if log:
        ls, lr = s, r
        if not (np.all(np.isfinite(ls)) and np.all(np.isfinite(lr))):
            raise ValueError("log tables must be finite")
    else:
        if np.any(s <= 0) or np.any(r <= 0):
            raise ValueError("tabulated sequences must be positive")
        ls, lr = np.log(s), np.log(r)
    bad = np.nonzero(ls <= lr)[0]
    if bad.size:
        warnings.warn(f"s_n <= r_n at n = {int(bad[0]) + 1}", stacklevel=2)
    if ls.size >= 4 and not (ls[-1] > ls[0] and lr[-1] > lr[0]):
        warnings.warn("tabulated sequences do not appear to grow", stacklevel=2)
    gap = -np.expm1(lr - ls)
    if gap[-max(1, ls.size // 2):].min() <= 0:
        warnings.warn("(s_n - r_n)/s_n is not bounded away from 0 on the tail", stacklevel=2)

    def lookup(table):
        def fn(n):
            idx = np.asarray(n, dtype=np.int64) - 1
            if np.any(idx < 0) or np.any(idx >= table.size):
                raise IndexError("index beyond the tabulated prefix")
            return table[idx]
        return fn

    ls_list = [float(v) for v in ls]
    lr_list = [float(v) for v in lr]
    sf = SequenceFamily("table_s", lookup(ls), lambda n: mpmath.exp(ls_list[int(n) - 1]))
    rf = SequenceFamily("table_r", lookup(lr), lambda n: mpmath.exp(lr_list[int(n) - 1]))
    return CantorSpec("Tabulated", sf, rf, N, {"length": int(ls.size)})


def write_sequence_csv(spec: CantorSpec, n_max: int, stream, digits: int = 17) -> None:
    """Columns ``n,log_s,log_r`` for ``n = 1..n_max``; readable by :func:`read_tabulated_csv`."""
    n = np.arange(1, n_max + 1, dtype=float)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["n", "log_s", "log_r"])
    for k, a, b in zip(range(1, n_max + 1), spec.log_s(n), spec.log_r(n)):
        w.writerow([k, f"{a:.{digits}g}", f"{b:.{digits}g}"])


def read_tabulated_csv(source, N: int = 1) -> CantorSpec:
    """CSV with columns ``s,r`` or ``log_s,log_r`` (an ``n`` column is ignored).

    ``source`` is a path or text stream; lines starting with ``#`` are skipped.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    s_vals, r_vals = [], []
    header = None
    cols = None
    for line, row in enumerate(csv.reader(lines), start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if header is None:
            header = [c.strip().lower() for c in row]
            if "log_s" in header and "log_r" in header:
                cols = (header.index("log_s"), header.index("log_r"), True)
            elif "s" in header and "r" in header:
                cols = (header.index("s"), header.index("r"), False)
            else:
                raise ValueError(f"line {line}: header must contain columns s,r or log_s,log_r")
            continue
        if len(row) != len(header):
            raise ValueError(f"line {line}: expected {len(header)} columns")
        try:
            s_vals.append(float(row[cols[0]]))
            r_vals.append(float(row[cols[1]]))
        except ValueError:
            raise ValueError(f"line {line}: non-numeric entry") from None
    if header is None:
        raise ValueError("line 1: empty file")
    if not s_vals:
        raise ValueError(f"line {len(lines)}: no data rows")
    return tabulated_spec(s_vals, r_vals, N, log=cols[2])


# -- integer boxes and sampling -----------------------------------------------------


def _box_mp(spec: CantorSpec, n: int):
    """Exact integer box at index ``n`` in high precision."""
    ls = float(spec.log_s(np.array([n]))[0])
    bits = int(max(ls, 1.0) / math.log(2)) + 96
    with mpmath.workprec(bits):
        s = spec.s_fn.mp_fn(n)
        r = spec.r_fn.mp_fn(n)
        lo = int(mpmath.ceil(s - r))
        hi = int(mpmath.floor(s + r))
    return lo, hi


def integer_box(spec: CantorSpec, n: int):
    """``(ceil(s_n - r_n), floor(s_n + r_n))``."""
    return _box_mp(spec, int(n))


def _boxes(spec: CantorSpec, n_digits: int):
    """Boxes for ``n = 1..n_digits``: int64 arrays when they fit, else lists of ints."""
    n = np.arange(1, n_digits + 1, dtype=float)
    ls, lr = spec.log_s(n), spec.log_r(n)
    if float(np.max(ls)) < 40.0:              # s_n < e^40 ~ 2^57.7 keeps s +- r in exact-ish float range
        s, r = np.exp(ls), np.exp(lr)
        a, b = s - r, s + r
        lo = np.ceil(a)
        hi = np.floor(b)
        # near-integer endpoints are recomputed exactly
        tol = 1e-9 * np.maximum(1.0, np.abs(b))
        fuzzy = np.nonzero((np.abs(a - np.rint(a)) < tol) | (np.abs(b - np.rint(b)) < tol))[0]
        lo = lo.astype(np.int64)
        hi = hi.astype(np.int64)
        for k in fuzzy:
            lo[k], hi[k] = _box_mp(spec, int(k) + 1)
        return lo, hi
    out_lo, out_hi = [], []
    for k in range(1, n_digits + 1):
        a, b = _box_mp(spec, k)
        out_lo.append(a)
        out_hi.append(b)
    return out_lo, out_hi


def _uniform_int(rng, lo: int, hi: int) -> int:
    span = hi - lo + 1
    if span <= 1:
        return lo
    if span < 2**62:
        return lo + int(rng.integers(0, span))
    nbits = span.bit_length()
    nbytes = (nbits + 7) // 8
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - nbits)
        if v < span:
            return lo + v


def sample_point(spec: CantorSpec, n_digits: int, seed: int, monotone: bool = False,
                 max_tries: int = 10_000) -> DigitWord:
    """Digits of a point of the Cantor set: uniform in each integer box.

    Indices below ``N`` are set to 1.  With ``monotone=True`` each digit
    is redrawn until it is at least the previous one.
    """
    if n_digits < 1:
        raise ValueError("n_digits must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = _boxes(spec, n_digits)
    for k in range(spec.N - 1, n_digits):
        if lo[k] > hi[k] or hi[k] < 1:
            raise ConstructionError(f"empty integer box at n = {k + 1}: [{lo[k]}, {hi[k]}]")
    if isinstance(lo, np.ndarray) and not monotone:
        lo_c = np.maximum(lo, 1)
        digits = rng.integers(lo_c, hi + 1)
        digits[: spec.N - 1] = 1
        return DigitWord(digits)
    digits = []
    prev = 1
    for k in range(n_digits):
        if k < spec.N - 1:
            digits.append(1)
            continue
        a, b = max(int(lo[k]), 1), int(hi[k])
        if monotone:
            if b < prev:
                raise ConstructionError(f"no non-decreasing choice at n = {k + 1}")
            for _ in range(max_tries):
                v = _uniform_int(rng, a, b)
                if v >= prev:
                    break
            else:
                v = _uniform_int(rng, max(a, prev), b)
        else:
            v = _uniform_int(rng, a, b)
        digits.append(v)
        prev = v
    return DigitWord(digits)


def monotone_violation_rate(spec: CantorSpec, n_digits: int, seeds) -> float:
    """Fraction of adjacent index pairs ``a_n > a_{n+1}`` over sampled points."""
    bad = 0
    total = 0
    for seed in seeds:
        w = sample_point(spec, n_digits, seed).tolist()
        bad += sum(1 for x, y in zip(w, w[1:]) if x > y)
        total += max(len(w) - 1, 0)
    return bad / total if total else 0.0


# -- lower-bound formula ----------------------------------------------------------------


class LRResult(NamedTuple):
    value: float
    tail_min: float
    trace: np.ndarray

    def __iter__(self):                     # (value, running_min_tail) like a pair
        yield self.value
        yield self.tail_min


def lr_dimension_formula(spec: CantorSpec, n_max: int, d: float, burn_in: int | None = None) -> LRResult:
    """``sum_{i<=n} log r_i / (d sum_{i<=n+1} log s_i - log r_{n+1})`` for ``n <= n_max``.

    The value at ``n_max`` and the minimum over the tail half are returned
    (the latter as the liminf proxy), with the full trace.
    """
    if n_max < 100:
        raise ValueError("n_max must be >= 100")
    if burn_in is None:
        burn_in = max(spec.N, 10)
    n = np.arange(1, n_max + 2, dtype=float)
    ls, lr = spec.log_s(n), spec.log_r(n)
    bad = np.nonzero(lr[burn_in:] <= 0)[0]
    if bad.size:
        raise DegenerateSequenceError(f"log r_n <= 0 at n = {int(bad[0]) + burn_in + 1}")
    num = np.cumsum(lr)[:-1]                          # sum_{i<=n} log r_i, n = 1..n_max
    den = d * np.cumsum(ls)[1:] - lr[1:]              # d sum_{i<=n+1} log s_i - log r_{n+1}
    with np.errstate(divide="ignore", invalid="ignore"):
        trace = num / den
    half = n_max // 2
    return LRResult(float(trace[-1]), float(np.min(trace[half - 1:])), trace)


# -- closed-form spectra -------------------------------------------------------------------


def _num(x):
    """Keep ints and Fractions exact; ``inf`` and floats pass through."""
    if isinstance(x, str):
        t = x.strip().lower()
        if t in ("inf", "+inf", "infinity", "∞"):
            return INF
        return Fraction(t)
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, int):
        return Fraction(x)
    return x


def _check_d(d):
    d = _num(d)
    if not d > 1 or d == INF:
        raise ValueError("d must be a finite number > 1")
    return d


def _reciprocal(d):
    return 1 / d if isinstance(d, Fraction) else 1.0 / d


def _sigma(w) -> Fraction:
    if isinstance(w, WeightVector):
        return w.sigma_t
    if isinstance(w, (list, tuple)):
        return WeightVector(w).sigma_t
    s = _num(w)
    if not s > 0:
        raise ValueError("sigma_t must be positive")
    return s


def spectrum_E(alpha, d):
    """Dimension of the set where the exponent of the digit sequence equals ``alpha``: ``1/d``."""
    alpha, d = _num(alpha), _check_d(d)
    if alpha == INF:
        raise SpectrumRangeError("the closed form holds for finite alpha only")
    if alpha < 0:
        raise SpectrumRangeError("alpha must be >= 0")
    return _reciprocal(d)


def spectrum_E_weighted(alpha, w, d):
    """Weighted-product version; the value ``1/d`` does not depend on the weights."""
    alpha, d = _num(alpha), _check_d(d)
    if not isinstance(w, WeightVector):
        w = WeightVector(w)
    if alpha == INF:
        raise SpectrumRangeError("the closed form holds for finite alpha only")
    if alpha < 0:
        raise SpectrumRangeError("alpha must be >= 0")
    return _reciprocal(d)


def spectrum_E_Lambda(alpha, w, d):
    """Monotone-digit level sets: ``0`` below ``sigma_t``, ``(alpha - sigma_t)/(d alpha)`` above, ``1/d`` at infinity.

    ``w`` may be a WeightVector, a weight list, or ``sigma_t`` itself.
    """
    alpha, d = _num(alpha), _check_d(d)
    sg = _sigma(w)
    if alpha == INF:
        return _reciprocal(d)
    if alpha < 0:
        raise SpectrumRangeError("alpha must be >= 0")
    if alpha < sg:
        return Fraction(0) if isinstance(alpha, Fraction) and isinstance(d, Fraction) else 0.0
    return (alpha - sg) / (d * alpha)


def spectrum_F_G(alpha, w, d):
    """Same values as :func:`spectrum_E_Lambda` for the liminf/limsup variants."""
    return spectrum_E_Lambda(alpha, w, d)


def count_monotone_words(n: int, ell: int) -> int:
    """Number of non-decreasing words of length ``n`` over ``{1..ell}``: ``C(n+ell-1, n)``."""
    if n < 1 or ell < 1:
        raise ValueError("n and ell must be >= 1")
    return math.comb(n + ell - 1, n)
