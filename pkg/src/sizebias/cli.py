"""Command-line front end: ``sizebias {bound,dickman,sample,verify,couple}``.

Exit status is 0 on success, 1 on a usage error and 2 when verification
finds a bound violated beyond confidence.  Every probability is printed as
a linear value and as log10; when the linear value underflows to 0 the log
column is the authoritative one.  Numbers carry 12 significant digits in
text and CSV and full precision in JSON.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import bounds as bd
from . import distributions as dm
from . import montecarlo as mc
from .errors import DomainError, PremiseError, SpecError
from .special_fn import default_table, log_gamma
from .specs import parse_spec

SAMPLES_ENV = "SIZEBIAS_SAMPLES"
LOG10E = 1.0 / math.log(10.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v) + 0.0
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return f"{v:.12g}"


def _render(rows: list[dict], fmt: str, header: str | None = None) -> str:
    if fmt == "json":
        return mc.to_json(rows) + "\n"
    if fmt == "csv":
        return mc.to_csv([{k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows])
    cols = list(rows[0]) if rows else []
    cells = [[_fmt(r[k]) if not isinstance(r[k], str) else r[k] for k in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = [header] if header else []
    lines.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"not a list of numbers: {text!r}") from None


def _range(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be START:STOP:STEP, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"range must be numeric, got {text!r}") from None
    if not step > 0 or stop < start:
        raise UsageError("range needs STEP > 0 and STOP >= START")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [float(f"{start + i * step:.12g}") for i in range(count)]


def _points(args, single: str, ranged: str) -> list[float]:
    a, b = getattr(args, single), getattr(args, ranged)
    if (a is None) == (b is None):
        raise UsageError(f"give exactly one of --{single} and --{ranged.replace('_', '-')}")
    return _float_list(a) if a is not None else _range(b)


def _prob_cells(prefix: str, log_p: float) -> dict:
    log_p = min(log_p, 0.0) + 0.0
    return {prefix: math.exp(log_p), f"{prefix}_log10": log_p * LOG10E}


# -- subcommands ------------------------------------------------------------


def cmd_bound(args) -> tuple[str, int]:
    xs = _points(args, "x", "x_range")
    if args.a is None or args.c is None:
        raise UsageError("bound needs --a and --c")
    if not args.a > 0 or not args.c > 0:
        raise UsageError("--a and --c must be positive")
    if any(not x >= 0 for x in xs):
        raise UsageError("x must be nonnegative")
    if args.n is not None and not args.n > 0:
        raise UsageError("--n must be positive")
    params = bd.BoundParams(args.a, args.c)
    rows = []
    for x in xs:
        rep = bd.best_report(x, params, n=args.n)
        for side, table, best in (("upper", rep.upper, rep.best_upper_name),
                                  ("lower", rep.lower, rep.best_lower_name)):
            entries = dict(table)
            if side == "lower" and rep.chebyshev:
                j = rep.best_chebyshev_j
                entries[f"chebyshev_{j}"] = bd.LogProb(rep.chebyshev[j])
            for name, lp in entries.items():
                rows.append({"x": x, "side": side, "bound": name, **_prob_cells("value", lp.log_p),
                             "best": name == best})
    return _render(rows, args.format, f"# a={_fmt(args.a)} c={_fmt(args.c)}"), 0


def cmd_dickman(args) -> tuple[str, int]:
    us = _points(args, "u", "u_range")
    table = default_table()
    if any(not 0 <= u <= table.u_max for u in us):
        raise UsageError(f"u must lie in [0, {_fmt(table.u_max)}]")
    rows = []
    for u in us:
        lr = float(table.log_rho(u))
        lg = -log_gamma(u + 1.0)
        rows.append({"u": u, **_prob_cells("rho", lr), **_prob_cells("inv_gamma", lg),
                     **_prob_cells("tail", float(table.log_tail(u))), "rho_le_inv_gamma": lr <= lg + 1e-12})
    return _render(rows, args.format), 0


def _sample_budget(args) -> int:
    if args.n is not None:
        n = args.n
    else:
        env = os.environ.get(SAMPLES_ENV)
        try:
            n = int(env) if env else mc.DEFAULT_SAMPLES
        except ValueError:
            raise UsageError(f"{SAMPLES_ENV} must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("sample count must be at least 1")
    return n


def cmd_sample(args) -> tuple[str, int]:
    model = parse_spec(args.spec, eps=args.eps)
    n = _sample_budget(args)
    parts = mc.map_chunks(lambda rng, s: np.asarray(model.sample(rng, s), dtype=float), n, args.seed)
    if args.raw:
        return "".join(f"{v:.17g}\n" for p in parts for v in p), 0
    s1 = math.fsum(math.fsum(p) for p in parts)
    s2 = math.fsum(math.fsum(p * p) for p in parts)
    mean = s1 / n
    var = (s2 - n * mean * mean) / (n - 1) if n > 1 else 0.0
    row = {"spec": model.text, "n": n, "seed": args.seed, "mean": mean, "variance": var,
           "exact_mean": model.exact_mean, "exact_variance": model.variance,
           "sampler_mean": model.mean - (model.truncation_bias or 0.0),
           "eps": model.eps if model.truncation_bias is not None else None,
           "truncation_bias": model.truncation_bias}
    header = None
    if model.truncation_bias is not None:
        header = f"# truncation at eps={_fmt(model.eps)} lowers the mean by {_fmt(model.truncation_bias)}"
    return _render([row], args.format, header), 0


def cmd_verify(args) -> tuple[str, int]:
    model = parse_spec(args.spec, eps=args.eps)
    xs = _float_list(args.x) if args.x else None
    if xs is not None and any(not x >= 0 for x in xs):
        raise UsageError("x must be nonnegative")
    a = model.mean if args.a is None else args.a
    c = model.c if args.c is None else args.c
    if not a > 0 or not c > 0:
        raise UsageError("--a and --c must be positive")
    if not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    rep = mc.verify_bounds(model, xs, bd.BoundParams(a, c), n=_sample_budget(args), delta=args.delta,
                           seed=args.seed, workers=args.workers)
    code = 0 if rep.passed else 2
    if args.format == "json":
        return mc.to_json(rep.to_dict()) + "\n", code
    rows = []
    for r in rep.csv_rows():
        r = dict(r)
        r.pop("spec")
        log_b = r.pop("log_bound")
        r.pop("bound_value")
        r.update(_prob_cells("bound_value", log_b))
        rows.append(r)
    header = (f"# {rep.spec}  a={_fmt(rep.params.a)} c={_fmt(rep.params.c)} n={rep.n} "
              f"delta={_fmt(rep.delta)} seed={rep.seed}\n"
              f"# sample mean={_fmt(rep.sample_mean)} variance={_fmt(rep.sample_variance)} "
              f"exact mean={_fmt(rep.exact_mean)} variance={_fmt(rep.exact_variance)}")
    if rep.truncation_bias is not None:
        header += f"\n# truncation bias (mean shortfall of the sampler)={_fmt(rep.truncation_bias)}"
    header += f"\n# result: {'PASS' if rep.passed else 'FAIL'} ({len(rep.violations)} violations)"
    if args.format == "csv":
        return _render(rows, "csv"), code
    return _render(rows, "text", header), code


def _cdf_of(spec_text, eps):
    model = parse_spec(spec_text, eps=eps)
    if model.cdf is None:
        raise UsageError(f"no exact CDF available for {spec_text!r}")
    return model


def _gap_text(gaps) -> str:
    if gaps.size > 12:
        return f"{gaps.size} distinct values"
    return " ".join(_fmt(g) for g in gaps)


def cmd_couple(args) -> tuple[str, int]:
    mx = _cdf_of(args.spec_x, args.eps)
    if args.size_bias == (args.spec_y is not None):
        raise UsageError("give either SPEC_Y or --size-bias, not both")
    if args.size_bias:
        if mx.biased_cdf is None:
            raise UsageError(f"cannot size-bias {args.spec_x!r}")
        fy, name_y = mx.biased_cdf, f"size-bias({mx.text})"
    else:
        my = _cdf_of(args.spec_y, args.eps)
        fy, name_y = my.cdf, my.text
    if args.c is not None and not args.c > 0:
        raise UsageError("--c must be positive")
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    cert = dm.quantile_gap_analysis(mx.cdf, fy, grid_size=args.grid, c=args.c)
    row = {"X": mx.text, "Y": name_y, "kind": cert.kind, "c_lo": cert.c_lo, "c_hi": cert.c_hi,
           "argmin_u": cert.argmin_u, "argmax_u": cert.argmax_u, "monotone": cert.monotone,
           "c": args.c, "gap_values": _gap_text(cert.gap_values)}
    if args.format == "json":
        row["gap_values"] = [float(g) for g in cert.gap_values]
    return _render([row], args.format), 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sizebias", description="Tail bounds under bounded size-bias couplings.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--format", choices=("text", "json", "csv"), default="text")

    sp = sub.add_parser("bound", help="evaluate every tail bound at given x")
    sp.add_argument("--a", type=float, help="mean")
    sp.add_argument("--c", type=float, help="coupling bound")
    sp.add_argument("--x", help="comma-separated points")
    sp.add_argument("--x-range", help="START:STOP:STEP")
    sp.add_argument("--n", type=int, help="number of [0,1] summands (adds the Hoeffding bound)")
    common(sp)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("dickman", help="tabulate the Dickman function")
    sp.add_argument("--u", help="comma-separated points")
    sp.add_argument("--u-range", help="START:STOP:STEP")
    common(sp)
    sp.set_defaults(func=cmd_dickman)

    sp = sub.add_parser("sample", help="draw from a spec and summarize")
    sp.add_argument("spec")
    sp.add_argument("-n", type=int, help=f"sample count (default ${SAMPLES_ENV} or {mc.DEFAULT_SAMPLES})")
    sp.add_argument("--eps", type=float, help="Levy truncation (default 1e-8)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--raw", action="store_true", help="print the samples, one per line")
    common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("verify", help="check the bounds against sampled and exact tails")
    sp.add_argument("spec")
    sp.add_argument("--x", help="comma-separated points (default: a + k sqrt(ac))")
    sp.add_argument("-n", "--n", type=int, help="sample count")
    sp.add_argument("--delta", type=float, default=mc.DEFAULT_DELTA)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--a", type=float, help="override the mean used by the bounds")
    sp.add_argument("--c", type=float, help="override the coupling bound")
    sp.add_argument("--eps", type=float, help="Levy truncation (default 1e-8)")
    sp.add_argument("--workers", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("couple", help="quantile-coupling certificate for two laws")
    sp.add_argument("spec_x")
    sp.add_argument("spec_y", nargs="?")
    sp.add_argument("--size-bias", action="store_true", help="couple X with its size-biased law")
    sp.add_argument("--c", type=float, help="target bound for the feasibility verdict")
    sp.add_argument("--grid", type=int, default=dm.DEFAULT_GRID)
    sp.add_argument("--eps", type=float)
    common(sp)
    sp.set_defaults(func=cmd_couple)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out, code = args.func(args)
    except (UsageError, SpecError, DomainError, PremiseError) as exc:
        token = getattr(exc, "token", None)
        extra = f" (at {token!r})" if isinstance(exc, SpecError) and token else ""
        print(f"sizebias {args.command}: error: {exc}{extra}", file=sys.stderr)
        return 1
    sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
