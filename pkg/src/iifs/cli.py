"""Command-line entry point: ``iifs <subcommand> [flags]``.

Every command writes CSV (with ``#`` provenance lines ahead of the header)
or a flat JSON object carrying the same provenance keys.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import __version__
from .cantor import (builtin_cantor_spec, count_monotone_words, lr_dimension_formula,
                     read_tabulated_csv, sample_point, spectrum_E, spectrum_E_Lambda,
                     spectrum_E_weighted, spectrum_F_G, write_sequence_csv)
from .covers import (Dk, DkTilde, GoodFM, dk_cardinality_bound, dk_tilde_cardinality_bound,
                     good_critical_exponent, hausdorff_sum_scan, product_set_upper_bound,
                     subdivision_dimension_bound)
from .exponents import (DigitFormatError, WeightVector, ratio_diagnostics, read_digits_csv,
                        tau2_from_digits, tau_by_partial_sums, tau_direct_limsup,
                        tau_from_rearrangement)
from .measures import (ae_tau_is_infinite_evidence, birkhoff_geometric_mean, khinchin_constant,
                       luroth_geometric_mean, perron_iterate, pressure, pressure_root)
from .systems import GaussLikeSystem, expand, project, system_from_config

PRECISION_ENV = "IIFS_PRECISION_BITS"
FORMATS = ("csv", "json")


class UsageError(Exception):
    """Bad flag values detected after parsing (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    system: dict | None
    precision: int | None
    seed: int | None
    output: str | None
    format: str = "csv"
    digits: int = 12

    def __post_init__(self):
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {FORMATS}")

    def provenance(self, **truncation) -> dict:
        prov = {"iifs_version": __version__, "seed": self.seed, "precision": self.precision}
        if self.system is not None:
            prov["system"] = json.dumps(self.system, sort_keys=True)
        prov.update(truncation)
        return prov


# -- formatting ---------------------------------------------------------------------


def _fmt(v, digits):
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.{digits}g}"
    return str(v)


def _json_value(v, digits):
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return _fmt(v, digits)
        return float(f"{v:.{digits}g}")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(x, digits) for x in v]
    if isinstance(v, int) and abs(v) >= 2 ** 53:
        return str(v)
    return v


def _emit(cfg: RunConfig, columns, rows, prov: dict, extra_json: dict | None = None) -> None:
    """Write a table in the configured format to the output path or stdout."""
    buf = io.StringIO()
    if cfg.format == "csv":
        for k in sorted(prov):
            buf.write(f"# {k}={_fmt(prov[k], cfg.digits)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v, cfg.digits) for v in row])
    else:
        obj = {k: _json_value(v, cfg.digits) for k, v in prov.items()}
        if extra_json:
            obj.update({k: _json_value(v, cfg.digits) for k, v in extra_json.items()})
        rows = list(rows)
        if len(rows) == 1:
            obj.update({c: _json_value(v, cfg.digits) for c, v in zip(columns, rows[0])})
        else:
            for j, c in enumerate(columns):
                obj[c] = [_json_value(r[j], cfg.digits) for r in rows]
        buf.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")
    text = buf.getvalue()
    if cfg.output and cfg.output != "-":
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- parsing helpers -----------------------------------------------------------------


def _number(text: str):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}") from None


def parse_grid(text: str) -> list:
    """Comma-separated items, each a number, ``inf`` or an inclusive ``lo:hi:step`` range."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise UsageError(f"range must be lo:hi:step, got {item!r}")
            lo, hi, step = (_number(p) for p in parts)
            if math.inf in (lo, hi, step) or step <= 0 or hi < lo:
                raise UsageError(f"bad range {item!r}")
            n = int((hi - lo) / step)
            out.extend(lo + k * step for k in range(n + 1))
        else:
            out.append(_number(item))
    if not out:
        raise UsageError("empty grid")
    return out


def _weights(text: str | None):
    if text is None:
        return None
    try:
        return WeightVector([p for p in text.split(",") if p.strip()])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _system(args) -> GaussLikeSystem:
    spec = args.system
    if spec is None:
        raise UsageError("--system is required")
    if not spec.strip().startswith("{"):
        spec = {"kind": spec}
        if getattr(args, "d", None) is not None:
            spec["d"] = float(args.d)
    try:
        return system_from_config(spec)
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from None


def _precision(args) -> int | None:
    if getattr(args, "precision", None) is not None:
        return args.precision
    env = os.environ.get(PRECISION_ENV)
    if env:
        try:
            p = int(env)
        except ValueError:
            raise UsageError(f"{PRECISION_ENV} must be an integer") from None
        if p < 16:
            raise UsageError(f"{PRECISION_ENV} must be >= 16")
        return p
    return None


def _config(args, system: GaussLikeSystem | None = None) -> RunConfig:
    return RunConfig(system.to_config() if system is not None else None, _precision(args),
                     getattr(args, "seed", None), args.output, args.format, args.sig_digits)


def _threads(args) -> int:
    t = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if t < 1:
        raise UsageError("--threads must be >= 1")
    return t


def _word(text: str) -> list:
    try:
        w = [int(p) for p in text.replace(" ", "").split(",") if p]
    except ValueError:
        raise UsageError(f"word must be comma-separated integers, got {text!r}") from None
    if not w or min(w) < 1:
        raise UsageError("word digits must be >= 1")
    return w


# -- commands --------------------------------------------------------------------------


def cmd_expand(args) -> int:
    system = _system(args)
    cfg = _config(args, system)
    e = expand(system, args.x, args.digits, precision=cfg.precision, strict=args.strict)
    prov = cfg.provenance(digits=args.digits, trusted_count=e.trusted_count,
                          ambiguous=e.ambiguous, precision_used=e.precision_bits)
    _emit(cfg, ["digit"], [[a] for a in e.word], prov)
    return 0


def cmd_project(args) -> int:
    system = _system(args)
    cfg = _config(args, system)
    word = _word(args.word)
    cyl = project(system, word, precision=cfg.precision)
    lo, hi = cyl.length_bounds()
    prov = cfg.provenance(level=len(word), precision_used=cyl.precision_bits)
    _emit(cfg, ["left", "right", "length_lower", "length_upper", "degraded"],
          [[float(cyl.lo), float(cyl.hi), float(lo), float(hi), cyl.degraded]], prov)
    return 0


def _read_digits(path):
    if path in (None, "-"):
        return read_digits_csv(sys.stdin)
    return read_digits_csv(path)


def cmd_tau(args) -> int:
    cfg = _config(args)
    digits = _read_digits(args.input)
    w = _weights(args.weights)
    prov = cfg.provenance(method=args.method, n_digits=len(digits),
                          weights=args.weights if w is not None else None)
    if args.method == "partial-sums":
        if w is not None:
            raise UsageError("partial-sums works on the digits themselves; drop --weights")
        est = tau_by_partial_sums(digits, args.s_lo, args.s_hi, args.tol)
        _emit(cfg, ["value", "boundary"], [[est.value, est.boundary or ""]],
              {**prov, "s_lo": args.s_lo, "s_hi": args.s_hi, "tol": args.tol})
        return 0
    if args.method == "ratio":
        if w is None:
            raise UsageError("ratio needs --weights")
        est = ratio_diagnostics(digits, w)
    elif w is not None:
        est = tau2_from_digits(digits, w)
    elif args.method == "direct":
        est = tau_direct_limsup(digits)
    else:
        est = tau_from_rearrangement(digits)
    _emit(cfg, ["value", "ratio_liminf", "ratio_limsup", "window", "n_used"],
          [[est.value, est.ratio_liminf, est.ratio_limsup, est.window, est.n_used]], prov)
    return 0


_SPECTRA = {
    "e": lambda a, w, d: spectrum_E(a, d),
    "e-weighted": lambda a, w, d: spectrum_E_weighted(a, w, d),
    "e-lambda": lambda a, w, d: spectrum_E_Lambda(a, w, d),
    "f-g": lambda a, w, d: spectrum_F_G(a, w, d),
}


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    d = _number(args.d)
    w = _weights(args.weights)
    if w is None and args.sigma_t is not None:
        w = _number(args.sigma_t)
    if args.family != "e" and w is None:
        raise UsageError(f"family {args.family} needs --weights or --sigma-t")
    if args.family == "e-weighted" and not isinstance(w, WeightVector):
        raise UsageError("family e-weighted needs --weights")
    fn = _SPECTRA[args.family]
    sig = w.sigma_t if isinstance(w, WeightVector) else w
    rows = [[a, "" if sig is None else sig, d, fn(a, w, d)] for a in parse_grid(args.alpha)]
    prov = cfg.provenance(family=args.family, weights=args.weights)
    _emit(cfg, ["alpha", "sigma_t", "d", "dim"], rows, prov)
    return 0


def _cantor_spec(args):
    if args.table:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            spec = read_tabulated_csv(args.table, args.N)
        for wmsg in caught:
            print(f"warning: {wmsg.message}", file=sys.stderr)
        return spec
    if not args.case:
        raise UsageError("cantor needs --case or --table")
    alpha = None if args.alpha is None else _number(args.alpha)
    sigma = None if args.sigma_t is None else _number(args.sigma_t)
    return builtin_cantor_spec(args.case, alpha, sigma)


def cmd_cantor(args) -> int:
    cfg = _config(args)
    spec = _cantor_spec(args)
    prov = cfg.provenance(**{"case": spec.case, **{f"spec_{k}": v for k, v in spec.to_dict().items()
                                                    if k != "case"}})
    if args.mode == "sample":
        if args.seed is None:
            raise UsageError("sampling needs --seed")
        word = sample_point(spec, args.n_digits, args.seed, monotone=args.monotone)
        _emit(cfg, ["digit"], [[a] for a in word], {**prov, "n_digits": args.n_digits,
                                                      "monotone": args.monotone})
        return 0
    if args.mode == "sequence":
        if cfg.format != "csv":
            raise UsageError("sequence tables are CSV only")
        buf = io.StringIO()
        for k, v in sorted({**prov, "n_max": args.n_max}.items()):
            buf.write(f"# {k}={_fmt(v, cfg.digits)}\n")
        write_sequence_csv(spec, args.n_max, buf)
        _write_text(cfg, buf.getvalue())
        return 0
    if args.d is None:
        raise UsageError("the dimension formula needs --d")
    d = float(_number(args.d))
    n_max = args.n_max
    if args.table:
        n_max = min(n_max, spec.to_dict()["length"] - 1)
    res = lr_dimension_formula(spec, n_max, d)
    _emit(cfg, ["value", "tail_min"], [[res.value, res.tail_min]], {**prov, "n_max": n_max, "d": d})
    return 0


def _write_text(cfg: RunConfig, text: str) -> None:
    if cfg.output and cfg.output != "-":
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_pressure(args) -> int:
    system = _system(args)
    cfg = _config(args, system)
    if args.root:
        r = pressure_root(system, args.t_lo, args.t_hi, args.tol, args.digit_cap)
        _emit(cfg, ["t_root"], [[r]], cfg.provenance(digit_cap=args.digit_cap, tol=args.tol,
                                                     t_lo=args.t_lo, t_hi=args.t_hi))
        return 0
    rows = []
    for t in parse_grid(args.t):
        if t == math.inf:
            raise UsageError("t must be finite")
        enc = pressure(system, float(t), args.n, args.digit_cap, exhaustive=args.exhaustive)
        rows.append([t, enc.lower, enc.upper, enc.estimate])
    _emit(cfg, ["t", "lower", "upper", "estimate"], rows,
          cfg.provenance(n=args.n, digit_cap=args.digit_cap, exhaustive=args.exhaustive))
    return 0


def cmd_density(args) -> int:
    system = _system(args)
    cfg = _config(args, system)
    g = perron_iterate(system, args.t, args.grid_size, args.iterations, args.digit_cap)
    prov = cfg.provenance(t=args.t, grid_size=args.grid_size, iterations=args.iterations,
                          digit_cap=args.digit_cap, diverged=g.diverged,
                          last_sup_diff=g.sup_diffs[-1] if g.sup_diffs else None)
    _emit(cfg, ["x", "g"], zip(g.grid_points, g.values), prov)
    return 0


def cmd_khinchin(args) -> int:
    system = _system(args)
    cfg = _config(args, system)
    if args.seed is None:
        raise UsageError("khinchin needs --seed")
    workers = _threads(args)
    prov = cfg.provenance(samples=args.samples, depth=args.depth)
    if args.ae_evidence:
        frac = ae_tau_is_infinite_evidence(system, args.samples, args.depth, args.seed,
                                           workers=workers)
        _emit(cfg, ["fraction_bounded_subsequence"], [[frac]], prov)
        return 0
    res = birkhoff_geometric_mean(system, args.samples, args.depth, args.seed, workers=workers)
    oracle = {"continued_fraction": khinchin_constant, "luroth": luroth_geometric_mean}.get(system.kind)
    row = [res.estimate, res.stderr, res.min_depth, res.depth_reduced,
           oracle() if oracle else None]
    _emit(cfg, ["estimate", "stderr", "min_depth", "depth_reduced", "oracle"], [row], prov)
    return 0


def cmd_covers(args) -> int:
    mode = args.mode
    if mode == "critical":
        cfg = _config(args)
        r = good_critical_exponent(float(_number(args.d)), args.c2, args.M, args.tol, full=True)
        _emit(cfg, ["s_star", "M"], [[r.s_star, r.M]],
              cfg.provenance(tol=r.tol, bracket_lo=r.bracket[0], bracket_hi=r.bracket[1]))
        return 0
    if mode == "product":
        cfg = _config(args)
        s, M = product_set_upper_bound(float(_number(args.d)), args.c2, args.m, args.t, args.eps)
        _emit(cfg, ["s", "M"], [[s, M]], cfg.provenance(m=args.m, t=args.t, eps=args.eps))
        return 0
    if mode == "subdivision":
        cfg = _config(args)
        r = subdivision_dimension_bound(_number(args.alpha), _number(args.sigma_t),
                                        _number(args.d), args.n)
        _emit(cfg, ["value", "argmax", "exact"], [[r.value, r.argmax, str(r.value)]],
              cfg.provenance(n=args.n))
        return 0
    if mode == "dk":
        cfg = _config(args)
        alpha, sg = _number(args.alpha), _number(args.sigma_t)
        if args.family == "dktilde":
            b = dk_tilde_cardinality_bound(args.k, alpha, _number(str(args.eps)), sg, args.m)
        else:
            b = dk_cardinality_bound(args.k, alpha, _number(args.s), sg)
        _emit(cfg, ["ell", "log_count", "log_bound", "holds"],
              [[b.ell, b.log_exact, b.log_bound, b.holds]], cfg.provenance(k=args.k, family="dktilde" if args.family == "dktilde" else "dk"))
        return 0
    # scan
    system = _system(args)
    cfg = _config(args, system)
    if args.family == "goodfm":
        fam = GoodFM(args.M)
    elif args.family == "dk":
        fam = Dk(float(_number(args.alpha)), float(_number(args.sigma_t)))
    else:
        fam = DkTilde(float(_number(args.alpha)), float(_number(args.sigma_t)), args.eps, args.m)
    grid = [float(v) for v in parse_grid(args.s_grid)]
    prof = hausdorff_sum_scan(system, fam, args.k, grid)
    prov = cfg.provenance(**{f"truncation_{k}": v for k, v in prof.truncation.items()},
                          crossing=prof.crossing)
    _emit(cfg, ["s", "log_sum", "k"], [[s, v, args.k] for s, v in zip(prof.s_grid, prof.log_sums)],
          prov)
    return 0


def cmd_count(args) -> int:
    cfg = _config(args)
    _emit(cfg, ["n", "ell", "count"], [[args.n, args.ell, count_monotone_words(args.n, args.ell)]],
          cfg.provenance())
    return 0


# -- parser -------------------------------------------------------------------------------


def _common(p, system=False, seed=False):
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--precision", type=int, help=f"working precision in bits (env {PRECISION_ENV})")
    p.add_argument("--sig-digits", type=int, default=12, help="significant digits of float output")
    p.add_argument("--threads", type=int, help="worker cap (default: available cores)")
    if system:
        p.add_argument("--system", required=True,
                       help="kind name (cf, luroth, qg, linear) or JSON config")
        p.add_argument("--d", help="decay exponent for linear_decay")
    if seed:
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iifs", description="Digit expansions, dimension spectra "
                                 "and cover bounds for d-decaying Gauss-like maps.")
    ap.add_argument("--version", action="version", version=f"iifs {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", help="digits of a point")
    _common(p, system=True)
    p.add_argument("--x", required=True, help="point in (0,1): decimal or p/q")
    p.add_argument("--digits", type=int, required=True)
    p.add_argument("--strict", action="store_true", help="fail on points at cylinder boundaries")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("project", help="cylinder interval of a word")
    _common(p, system=True)
    p.add_argument("--word", required=True, help="comma-separated digits")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("tau", help="convergence exponent of a digit CSV")
    _common(p)
    p.add_argument("--input", "-i", help="digit CSV (default stdin)")
    p.add_argument("--method", choices=("rearrangement", "direct", "partial-sums", "ratio"),
                   default="rearrangement")
    p.add_argument("--weights", help="t_0,...,t_m for weighted products")
    p.add_argument("--s-lo", type=float, default=0.0)
    p.add_argument("--s-hi", type=float, default=5.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_tau)

    p = sub.add_parser("spectrum", help="closed-form dimension spectra")
    _common(p)
    p.add_argument("--family", choices=sorted(_SPECTRA), required=True)
    p.add_argument("--d", required=True)
    p.add_argument("--sigma-t")
    p.add_argument("--weights")
    p.add_argument("--alpha", required=True, help="grid: lo:hi:step, values, inf")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("cantor", help="digit-box Cantor sets")
    _common(p, seed=True)
    p.add_argument("--mode", choices=("formula", "sample", "sequence"), default="formula")
    p.add_argument("--case", help="E0, PowerAlpha, EAlphaWeighted, Jqdg, Infinity")
    p.add_argument("--table", help="sequence CSV (s,r or log_s,log_r)")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--alpha")
    p.add_argument("--sigma-t")
    p.add_argument("--d")
    p.add_argument("--n-max", type=int, default=100_000)
    p.add_argument("--n-digits", type=int, default=10_000)
    p.add_argument("--monotone", action="store_true")
    p.set_defaults(func=cmd_cantor)

    p = sub.add_parser("pressure", help="topological pressure and its root")
    _common(p, system=True)
    p.add_argument("--t", default="1", help="grid of t values")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--digit-cap", type=int, default=100_000)
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--root", action="store_true")
    p.add_argument("--t-lo", type=float, default=0.8)
    p.add_argument("--t-hi", type=float, default=1.2)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_pressure)

    p = sub.add_parser("density", help="invariant density by transfer-operator iteration")
    _common(p, system=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--grid-size", type=int, default=1024)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--digit-cap", type=int, default=1000)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("khinchin", help="Monte Carlo geometric mean of digits")
    _common(p, system=True, seed=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--ae-evidence", action="store_true",
                   help="report the fraction of samples with a positive-density run of 1s")
    p.set_defaults(func=cmd_khinchin)

    p = sub.add_parser("covers", help="cover sums and critical exponents")
    _common(p)
    p.add_argument("--mode", choices=("critical", "product", "scan", "dk", "subdivision"),
                   required=True)
    p.add_argument("--system", help="system for scan mode")
    p.add_argument("--d", default="2")
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--t", type=float, default=1.1)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--family", choices=("goodfm", "dk", "dktilde"), default="goodfm")
    p.add_argument("--alpha", default="4")
    p.add_argument("--sigma-t", default="2")
    p.add_argument("--s", default="0.1", help="exponent in the Dk cut-off")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--s-grid", default="0.01:2:0.01")
    p.set_defaults(func=cmd_covers)

    p = sub.add_parser("count", help="number of non-decreasing words")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.set_defaults(func=cmd_count)
    return ap


def main(argv=None) -> int:
    if hasattr(sys, "set_int_max_str_digits"):
        sys.set_int_max_str_digits(0)       # digits and counts can be very long integers
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"iifs {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except DigitFormatError as exc:
        print(f"iifs {args.command}: malformed input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"iifs {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, IndexError) as exc:
        print(f"iifs {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
