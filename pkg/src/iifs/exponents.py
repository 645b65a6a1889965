"""Convergence exponents of digit sequences.

For a positive sequence ``a_n`` the convergence exponent is the infimum
of the ``s`` for which ``sum a_n^-s`` converges.  For a non-decreasing
unbounded rearrangement ``b_n`` it equals ``limsup log n / log b_n``, which
is what the main estimator evaluates on the tail half of the data.  A
second, independent estimator classifies partial-sum growth and bisects.

Everything works on ``log a_n`` so digits may be arbitrarily large ints
and weighted products stay real-valued.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "WeightVector",
    "ExponentEstimate",
    "PartialSumEstimate",
    "DigitFormatError",
    "tau_from_rearrangement",
    "tau_direct_limsup",
    "tau_by_partial_sums",
    "tau2_from_digits",
    "ratio_diagnostics",
    "is_monotone",
    "log_digits",
    "read_digits_csv",
    "write_digits_csv",
    "parse_digits_json",
    "estimate_to_json",
]

INF = math.inf


class DigitFormatError(ValueError):
    """Malformed digit input; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _exact(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("weights must be finite")
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class WeightVector:
    """Exponents ``(t_0, ..., t_m)`` of the product ``a_n^t0 ... a_{n+m}^tm``."""

    weights: tuple

    def __init__(self, weights):
        ws = tuple(_exact(w) for w in weights)
        if len(ws) < 2:
            raise ValueError("weight vector needs m >= 1, i.e. at least two weights")
        if any(w < 0 for w in ws):
            raise ValueError("weights must be non-negative")
        if ws[0] == 0:
            raise ValueError("t_0 must be non-zero")
        if all(w == 0 for w in ws[1:]):
            raise ValueError("at least one of t_1..t_m must be non-zero")
        object.__setattr__(self, "weights", ws)

    @property
    def m(self) -> int:
        return len(self.weights) - 1

    @property
    def sigma_t(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def as_floats(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def scaled(self, lam) -> "WeightVector":
        lam = _exact(lam)
        return WeightVector([w * lam for w in self.weights])


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    ratio_liminf: float
    ratio_limsup: float
    window: int
    n_used: int
    ratios: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if v == INF else float(v)

        return {
            "value": enc(self.value),
            "ratio_liminf": enc(self.ratio_liminf),
            "ratio_limsup": enc(self.ratio_limsup),
            "window": int(self.window),
            "n_used": int(self.n_used),
        }


class PartialSumEstimate(NamedTuple):
    value: float
    boundary: str | None      # "lower" / "upper" when the threshold was not bracketed

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------


def log_digits(digits) -> np.ndarray:
    """``log a_n`` as floats; accepts big Python ints."""
    if isinstance(digits, np.ndarray) and digits.dtype.kind in "iuf":
        arr = digits.astype(float)
        if arr.size and arr.min() < 1:
            raise ValueError("digits must be >= 1")
        return np.log(arr)
    out = np.empty(len(digits), dtype=float)
    for k, a in enumerate(digits):
        a = int(a)
        if a < 1:
            raise ValueError("digits must be >= 1")
        out[k] = math.log(a)
    return out


def _tail_window(N: int) -> int:
    return max(1, N // 2)


def _limsup_log_ratio(logb: np.ndarray) -> ExponentEstimate:
    """``max log n / log b_n`` over the tail half; ``logb`` read in the given order.

    Infinite when the tail contains ones or its last quarter is constant.
    """
    N = logb.size
    w = _tail_window(N)
    n = np.arange(w, N + 1, dtype=float)
    tail = logb[w - 1:]
    quarter = tail[tail.size // 2:]
    if np.any(tail <= 0) or quarter.min() == quarter.max():
        return ExponentEstimate(INF, INF, INF, w, N)
    ratios = np.log(n) / tail
    return ExponentEstimate(float(ratios.max()), float(ratios.min()), float(ratios.max()), w, N, ratios)


def _tau_from_logs(logs: np.ndarray) -> ExponentEstimate:
    if logs.size < 10:
        raise ValueError("need at least 10 terms")
    return _limsup_log_ratio(np.sort(logs, kind="stable"))


def tau_from_rearrangement(digits) -> ExponentEstimate:
    """Convergence exponent via the non-decreasing rearrangement.

    Sorts the digits, then takes the largest ``log n / log b_n`` over the
    tail half ``[N/2, N]``.  Returns infinity when the tail of the
    rearrangement contains ones or its last quarter is constant, i.e. a
    positive fraction of the digits looks bounded.
    """
    return _tau_from_logs(log_digits(digits))


def tau_direct_limsup(digits) -> ExponentEstimate:
    """``limsup log n / log a_n`` in the given order, without sorting.

    Agrees exactly with :func:`tau_from_rearrangement` on non-decreasing input.
    """
    logs = log_digits(digits)
    if logs.size < 10:
        raise ValueError("need at least 10 terms")
    return _limsup_log_ratio(logs)


def _block_ratio(sorted_logs: np.ndarray, s: float) -> float:
    """Ratio of the last two complete dyadic block sums of ``b_n^-s``."""
    N = sorted_logs.size
    k = int(math.floor(math.log2(N + 1))) - 1       # last complete block [2^k, 2^{k+1})
    last = sorted_logs[(1 << k) - 1:(1 << (k + 1)) - 1]
    prev = sorted_logs[(1 << (k - 1)) - 1:(1 << k) - 1]
    return float(logsumexp(-s * last) - logsumexp(-s * prev))


def tau_by_partial_sums(digits, s_lo: float = 0.0, s_hi: float = 2.0,
                        tol: float = 1e-10) -> PartialSumEstimate:
    """Independent exponent estimate by classifying partial-sum growth.

    A value ``s`` counts as divergent when the last complete dyadic block
    of ``sum b_n^-s`` (sorted terms) is at least as large as the block
    before it.  The threshold is located by bisection.  If the
    classification does not change sign over ``[s_lo, s_hi]`` the nearer
    boundary is returned with a flag.
    """
    if not s_lo < s_hi:
        raise ValueError("need s_lo < s_hi")
    logs = np.sort(log_digits(digits), kind="stable")
    if logs.size < 8:
        raise ValueError("need at least 8 terms")

    def diverges(s):
        return _block_ratio(logs, s) >= 0.0

    if not diverges(s_lo):
        return PartialSumEstimate(s_lo, "lower")
    if diverges(s_hi):
        return PartialSumEstimate(s_hi, "upper")
    lo, hi = s_lo, s_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if diverges(mid):
            lo = mid
        else:
            hi = mid
    value = 0.5 * (lo + hi)
    flag = "lower" if value - s_lo <= 2 * tol else None
    return PartialSumEstimate(value, flag)


def _product_logs(digits, w: WeightVector) -> np.ndarray:
    logs = log_digits(digits)
    m = w.m
    if logs.size <= m + 10:
        raise ValueError("need more than m + 10 digits")
    L = logs.size - m
    out = np.zeros(L)
    for i, t in enumerate(w.as_floats()):
        if t:
            out += t * logs[i:i + L]
    return out


def tau2_from_digits(digits, w: WeightVector) -> ExponentEstimate:
    """Exponent of the weighted products ``P_n = prod a_{n+i}^{t_i}``."""
    if not isinstance(w, WeightVector):
        w = WeightVector(w)
    return _tau_from_logs(_product_logs(digits, w))


def ratio_diagnostics(digits, w: WeightVector) -> ExponentEstimate:
    """Tail min and max of ``log P_n / log n``; ``value`` is the min (liminf level)."""
    if not isinstance(w, WeightVector):
        w = WeightVector(w)
    logp = _product_logs(digits, w)
    N = logp.size
    win = max(2, _tail_window(N))
    n = np.arange(win, N + 1, dtype=float)
    ratios = logp[win - 1:] / np.log(n)
    lo, hi = float(ratios.min()), float(ratios.max())
    return ExponentEstimate(lo, lo, hi, win, N, ratios)


def is_monotone(digits) -> bool:
    """True iff the sequence is non-decreasing."""
    prev = None
    for a in digits:
        if prev is not None and a < prev:
            return False
        prev = a
    return True


# -- I/O ---------------------------------------------------------------------


def _parse_digit(text: str, line: int) -> int:
    t = text.strip()
    try:
        v = int(t)
    except ValueError:
        raise DigitFormatError(f"not an integer digit: {t!r}", line) from None
    if v < 1:
        raise DigitFormatError(f"digit must be >= 1, got {v}", line)
    return v


def read_digits_csv(source) -> list:
    """Single-column CSV with header ``digit``.  ``source`` is a path or text stream.

    Lines starting with ``#`` (provenance comments) are skipped.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    rows = csv.reader(io.StringIO(text))
    digits = []
    header_seen = False
    for line, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            if [c.strip().lower() for c in row] != ["digit"]:
                raise DigitFormatError("expected header 'digit'", line)
            header_seen = True
            continue
        if len(row) != 1:
            raise DigitFormatError(f"expected one column, got {len(row)}", line)
        digits.append(_parse_digit(row[0], line))
    if not header_seen:
        raise DigitFormatError("empty input: missing header 'digit'", 1)
    return digits


def write_digits_csv(digits, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["digit"])
    for a in digits:
        w.writerow([int(a)])


def parse_digits_json(text: str) -> list:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DigitFormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if isinstance(data, dict) and "digits" in data:
        data = data["digits"]
    if not isinstance(data, list):
        raise DigitFormatError("expected a JSON array of digits")
    out = []
    for k, v in enumerate(data):
        if isinstance(v, bool) or not isinstance(v, int):
            raise DigitFormatError(f"entry {k} is not an integer")
        if v < 1:
            raise DigitFormatError(f"entry {k} must be >= 1")
        out.append(v)
    return out


def estimate_to_json(est: ExponentEstimate, **extra) -> str:
    d = est.to_dict()
    d.update(extra)
    return json.dumps(d, sort_keys=True)
