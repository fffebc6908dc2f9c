"""Command-line entry point: ``mdepld <command> [options]``.

Exit codes: 0 success, 2 parameter/regime error, 3 numerical instability,
4 failed check in ``verify-lemmas``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import families, harness, ldcore
from .exact import BernoulliChain, MemoryEstimateError, default_cap, pmf_auto, statistic_by_name
from .families import RegimeError
from .moments import Thresholds, block_moments, check_conditions
from .numerics import SeriesNotConverged

OUT_ENV = "MDEPLD_OUT"

EXIT_OK, EXIT_REGIME, EXIT_INSTABILITY, EXIT_VERIFY = 0, 2, 3, 4


def _emit(text: str, out: str | None, default_name: str) -> None:
    """Write to ``out`` (file or directory), else to $MDEPLD_OUT/default_name, else stdout."""
    target = out
    if target is None and os.environ.get(OUT_ENV):
        target = os.path.join(os.environ[OUT_ENV], default_name)
    if target is None or target == "-":
        sys.stdout.write(text)
        return
    path = Path(target)
    if path.is_dir():
        path = path / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def _stat_args(p: argparse.ArgumentParser, default: str | None = "two-runs") -> None:
    p.add_argument("--stat", default=default, help="two-runs | n11 | nk1k2")
    p.add_argument("--k1", type=int, default=1)
    p.add_argument("--k2", type=int, default=1)


def _format_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output file or directory (default: stdout)")


def _xs_from(arg: str | None, zone: str | None) -> tuple[list[int] | None, str | None]:
    """--x accepts 'a:b' ranges and comma lists; --zone takes an x-range rule."""
    if arg:
        xs: list[int] = []
        for part in arg.split(","):
            if ":" in part:
                lo, hi = part.split(":")
                xs.extend(range(int(lo), int(hi) + 1))
            elif part.strip():
                xs.append(int(part))
        return xs, None
    return None, zone


def cmd_exact(a) -> int:
    stat = statistic_by_name(a.stat, a.k1, a.k2)
    chain = BernoulliChain(a.n, a.p)
    cap = a.cap or default_cap(chain.n_terms * stat.mean_payoff(a.p))
    cap = min(cap, chain.n_terms * stat.max_payoff + 1)
    pmf = pmf_auto(stat, chain, cap=cap, method=a.method)
    text = pmf.to_json() + "\n" if a.format == "json" else pmf.to_csv()
    _emit(text, a.out, f"pmf.{a.format}")
    return EXIT_OK


def _family(a):
    kind = a.family
    if a.n is None and (a.lam, a.r, a.N) == (None, None, None):
        raise ValueError("give --n and --p, or the family parameters directly")
    if kind == "poisson":
        return families.Poisson(a.lam if a.lam is not None else a.n * a.p)
    if kind == "nb":
        if a.r is not None:
            return families.NegBinomial(a.r, a.qbar)
        return families.nb_params(a.n, a.p).family()
    if kind == "binomial":
        if a.N is not None:
            return families.Binomial(a.N, a.ptilde)
        return families.bi_params(a.n, a.p).family()
    raise ValueError(kind)


def cmd_approx(a) -> int:
    fam = _family(a)
    xs, _ = _xs_from(a.x, None)
    if xs is None:
        sd = math.sqrt(fam.variance)
        xs = list(range(max(0, int(fam.mean - 4 * sd)), int(fam.mean + 4 * sd) + 2))
    rows = []
    for x in xs:
        lp = families.pmf(fam, x).logval
        lt = families.tail(fam, x).logval
        rows.append((x, lp, math.exp(lp), lt))
    meta = json.loads(families.family_to_json(fam))
    if a.format == "json":
        doc = {
            "schema": harness.SCHEMA,
            "family": meta,
            "header": ["x", "log_pmf", "pmf", "log_tail"],
            "rows": [[harness._jsonable(v) for v in r] for r in rows],
        }
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    else:
        lines = [f"# schema={harness.SCHEMA}", f"# family={json.dumps(meta, sort_keys=True)}"]
        lines.append("x,log_pmf,pmf,log_tail")
        lines += [",".join(harness.fmt(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, a.out, f"approx.{a.format}")
    return EXIT_OK


def _zone(a) -> ldcore.ZoneConfig:
    return ldcore.ZoneConfig(a.zone_c, a.zone_divisor)


def _thresholds(a) -> Thresholds | None:
    if a.mode != "relaxed":
        return None
    return Thresholds(a.nu1_bound, a.y_bound, a.second_factor)


def _threshold_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("strict", "relaxed"), default="strict")
    p.add_argument("--nu1-bound", type=float, default=Thresholds.nu1_bound)
    p.add_argument("--y-bound", type=float, default=Thresholds.y_bound)
    p.add_argument("--second-factor", type=float, default=Thresholds.second_factor)


def cmd_ratio(a) -> int:
    setup = harness.make_setup(
        a.theorem,
        a.n,
        a.p,
        stat=a.stat,
        m=a.m,
        k1=a.k1,
        k2=a.k2,
        mode=a.mode,
        thresholds=_thresholds(a),
        zone=_zone(a),
        cap=a.cap,
        method=a.method,
    )
    xs, rule = _xs_from(a.x, a.zone)
    report = harness.ratio_report(setup, rule, xs)
    for reason in report.skipped:
        logging.info("skipped %s", reason)
    _emit(report.render(a.format), a.out, f"ratio-thm{a.theorem}.{a.format}")
    return EXIT_OK


def cmd_sweep(a) -> int:
    cfg = harness.load_sweep_config(a.config)
    if a.seed is not None:
        cfg = replace(cfg, seed=a.seed)
    if a.format is not None:
        cfg = replace(cfg, fmt=a.format)
    results = harness.run_sweep(cfg, a.workers)
    out = a.out or os.environ.get(OUT_ENV) or "sweep-out"
    harness.write_sweep(cfg, results, out)
    summary, _ = harness.trend_summary(cfg, results)
    sys.stdout.write(summary)
    codes = [r.exit_code for r in results if r.exit_code]
    return codes[0] if codes else EXIT_OK


def _grid(text: str | None):
    if not text:
        return None
    lo, hi, step = (float(v) for v in text.split(":"))
    if step <= 0 or hi < lo:
        raise ValueError(f"bad grid {text!r}")
    return lo, hi, step


def cmd_verify(a) -> int:
    only = [o for o in (a.only or "").split(",") if o] or None
    checks = harness.run_lemma_suite(a.seed, only, _grid(a.grid))
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print(f"overall {'PASS' if ok else 'FAIL'}")
    if a.out:
        doc = {"seed": a.seed, "checks": [c.to_dict() for c in checks], "pass": ok}
        _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", a.out, "lemmas.json")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_check(a) -> int:
    stat = statistic_by_name(a.stat, a.k1, a.k2)
    m = a.m or max(1, stat.width - 1)
    ms = block_moments(stat, a.p, m)
    n_blocks = a.n // m
    report = check_conditions(ms, n_blocks, a.x, a.mode, _thresholds(a))
    doc = json.loads(report.to_json())
    doc["inputs"] = {
        "stat": stat.name,
        "n_terms": a.n,
        "m": m,
        "n_blocks": n_blocks,
        "p": a.p,
        "x": a.x,
        "nu1": float(ms.nu1),
        "nu2": float(ms.nu2),
        "ex1x2": float(ms.ex1x2),
        "c0": ms.c0,
    }
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", a.out, "conditions.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdepld", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact law of a window statistic")
    _stat_args(p)
    p.add_argument("--n", type=int, required=True, help="number of windows (summands)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--method", choices=("auto", "dp", "matpow"), default="auto")
    _format_arg(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("approx", help="pmf and tail of an approximating law")
    p.add_argument("--family", choices=("poisson", "nb", "binomial"), required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--qbar", type=float, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--ptilde", type=float, default=None)
    p.add_argument("--x", default=None, help="points: 'a:b' ranges and/or comma list")
    _format_arg(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("ratio", help="exact versus approximate probabilities")
    p.add_argument(
        "--theorem", type=int, choices=(1, 2, 3, 4), required=True,
        help="1 Poisson point ratio, 2 x-dependent Poisson tail, 3 negative binomial, 4 binomial",
    )
    _stat_args(p, default=None)
    p.add_argument("--m", type=int, default=None, help="block length for grouping")
    p.add_argument("--n", type=int, required=True, help="number of windows (summands)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--x", default=None, help="points: 'a:b' ranges and/or comma list")
    p.add_argument("--zone", default="sd:2", help="x-range rule used when --x is absent")
    p.add_argument("--zone-c", type=float, default=1.0)
    p.add_argument("--zone-divisor", choices=("log", "none"), default="log")
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--method", choices=("auto", "dp", "matpow"), default="auto")
    _threshold_args(p)
    _format_arg(p)
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("sweep", help="ratio reports over a schedule from a config file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="report directory")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-lemmas", help="numerical checks of the auxiliary identities and bounds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", default=None, help=f"comma list from {', '.join(harness.LEMMA_CHECKS)}")
    p.add_argument("--grid", default=None, help="LO:HI:STEP for the Gamma bounds")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("check-conditions", help="evaluate the moment conditions for one point")
    _stat_args(p, default="n11")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--x", type=int, required=True)
    _threshold_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        return args.func(args)
    except (RegimeError, MemoryEstimateError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_REGIME
    except (ldcore.HeinrichInstability, SeriesNotConverged, ArithmeticError) as e:
        print(f"numerical instability: {e}", file=sys.stderr)
        return EXIT_INSTABILITY


if __name__ == "__main__":
    sys.exit(main())
