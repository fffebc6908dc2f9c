"""Ratio reports, configuration-driven sweeps and the lemma validation suite."""

from __future__ import annotations

import configparser
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import bounds, families, ldcore
from .exact import BernoulliChain, WindowStatistic, default_cap, pmf_auto, statistic_by_name
from .families import RegimeError
from .moments import Thresholds, block_moments, check_conditions, gamma_of, group_blocks
from .numerics import NEG_INF, SeriesNotConverged

log = logging.getLogger(__name__)

SCHEMA = 1
MIN_LOG_TAIL = math.log(1e-280)

DEFAULT_STATS = {1: ("n11", 2), 2: ("n11", 2), 3: ("two-runs", 1), 4: ("n11", 1)}

COLUMNS = (
    "x",
    "y",
    "log_exact",
    "log_approx",
    "ratio",
    "log_main_term",
    "ratio_over_main",
    "deviation",
    "error_scale",
    "saddle",
    "conditions_ok",
    "zone_ok",
)


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass
class RatioReport:
    header: dict
    rows: list[dict] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def deviations(self, zone_only: bool = False) -> list[float]:
        return [
            r["deviation"]
            for r in self.rows
            if (r["zone_ok"] or not zone_only) and math.isfinite(r["deviation"])
        ]

    def max_deviation(self, zone_only: bool = False) -> float:
        d = self.deviations(zone_only)
        return max(d) if d else math.nan

    def to_csv(self) -> str:
        lines = [f"# schema={SCHEMA}"]
        for k in sorted(self.header):
            v = self.header[k]
            if isinstance(v, (dict, list, tuple)):
                text = json.dumps(_jsonable(v), sort_keys=True, separators=(",", ":"))
            else:
                text = fmt(v) if isinstance(v, (int, float, bool)) else str(v)
            lines.append(f"# {k}={text}")
        for reason in self.skipped:
            lines.append(f"# skipped={reason}")
        lines.append(",".join(COLUMNS))
        for r in self.rows:
            lines.append(",".join(fmt(r[c]) for c in COLUMNS))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "schema": SCHEMA,
            "header": _jsonable(self.header),
            "skipped": self.skipped,
            "columns": list(COLUMNS),
            "rows": [[_jsonable(r[c]) for c in COLUMNS] for r in self.rows],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    def render(self, fmt_name: str) -> str:
        return self.to_json() if fmt_name == "json" else self.to_csv()


# x-range rules


def resolve_xs(rule: str, mean: float, halfwidth: float | None = None) -> list[int]:
    """Integer points selected by an x-range rule.

    ``absolute:LO:HI``      every integer in [LO, HI]
    ``sd:C``                |x - mean| <= C sqrt(mean)
    ``y:B``                 |x - mean| <= B mean
    ``sd-points:c1,c2,..``  round(mean + c sqrt(mean)) for each c
    ``zone:C``              |x - mean| <= C * halfwidth (the theorem's zone proxy at c=1)
    ``list:x1,x2,..``       the given points
    """
    kind, _, arg = rule.partition(":")
    sd = math.sqrt(max(mean, 0.0))
    if kind == "absolute":
        lo, _, hi = arg.partition(":")
        return list(range(int(lo), int(hi) + 1))
    if kind == "list":
        return sorted({int(v) for v in arg.split(",") if v.strip()})
    if kind == "sd-points":
        return sorted({int(round(mean + float(c) * sd)) for c in arg.split(",")})
    if kind == "sd":
        width = float(arg) * sd
    elif kind == "y":
        width = float(arg) * mean
    elif kind == "zone":
        if halfwidth is None:
            raise ValueError("zone rule needs the theorem's zone halfwidth")
        width = float(arg) * halfwidth
    else:
        raise ValueError(f"unknown x rule {rule!r}")
    lo = max(0, math.ceil(mean - width - 1e-9))
    hi = math.floor(mean + width + 1e-9)
    return list(range(lo, hi + 1))


@dataclass(frozen=True)
class RatioSetup:
    theorem: int
    n: int
    p: float
    stat: WindowStatistic
    m: int
    mode: str = "strict"
    thresholds: Thresholds | None = None
    zone: ldcore.ZoneConfig = ldcore.ZoneConfig()
    cap: int | None = None
    method: str = "auto"


def make_setup(
    theorem: int,
    n: int,
    p: float,
    stat: str | None = None,
    m: int | None = None,
    k1: int = 1,
    k2: int = 1,
    **kw,
) -> RatioSetup:
    if theorem not in (1, 2, 3, 4):
        raise ValueError(f"theorem must be 1..4, got {theorem}")
    dstat, dm = DEFAULT_STATS[theorem]
    name = stat or dstat
    ws = statistic_by_name(name, k1, k2)
    if theorem == 3 and ws.name != "two_runs":
        raise ValueError("the negative binomial comparison is for the 2-runs statistic")
    if theorem == 4 and ws.name != "n11_event":
        raise ValueError("the binomial comparison is for the n11 statistic")
    if m is None:
        m = dm if ws.name == statistic_by_name(dstat).name else max(1, ws.width - 1)
    return RatioSetup(theorem, int(n), float(p), ws, int(m), **kw)


def _center(setup: RatioSetup):
    """(effective n, mean, moments or None, approximating-family info)."""
    n, p = setup.n, setup.p
    if setup.theorem in (1, 2):
        g = group_blocks(setup.stat, setup.m, n)
        ms = replace(block_moments(setup.stat, p, setup.m), n_blocks=g.n_blocks)
        if g.n_blocks < 1:
            raise RegimeError("fewer windows than one block")
        return g.n_blocks, g.n_blocks * ms.nu1, ms, g
    if setup.theorem == 3:
        return n, n * p * p, None, None
    return n, n * p * (1 - p), None, None


def ratio_report(setup: RatioSetup, x_rule: str | None = None, xs: Iterable[int] | None = None) -> RatioReport:
    """Exact versus approximating probabilities for one (n, p) point."""
    th = setup.theorem
    n_eff, mean, ms, grouped = _center(setup)
    pred0 = ldcore.predict_main_term(
        th, n_eff, mean, nu1=(ms.nu1 if ms else None), p=setup.p, zone=setup.zone
    )
    if xs is None:
        xs = resolve_xs(x_rule or "sd:2", mean, pred0.zone_halfwidth)
    xs = sorted({int(x) for x in xs if x >= 0})

    header: dict = {
        "theorem": th,
        "statistic": setup.stat.name,
        "window_width": setup.stat.width,
        "n_terms": setup.n,
        "p": setup.p,
        "mode": setup.mode,
        "zone_c": setup.zone.c,
        "zone_divisor": setup.zone.divisor,
        "zone_halfwidth": pred0.zone_halfwidth,
        "mean": mean,
        "x_rule": x_rule or "",
    }
    report = RatioReport(header)
    if not xs:
        report.skipped.append("empty x range")
        return report

    terms = grouped.grouped_terms if grouped is not None else setup.n
    cap = setup.cap or default_cap(mean)
    cap = max(cap, max(xs) + 1)
    exact = pmf_auto(setup.stat, BernoulliChain(terms, setup.p), cap=cap, method=setup.method)
    header.update(cap=cap, summed_terms=terms, truncation_bound=exact.truncation_bound)

    fam_row: Callable[[int], tuple]
    if th in (1, 2):
        header.update(
            m=setup.m,
            n_blocks=n_eff,
            dropped_terms=grouped.remainder,
            nu1=float(ms.nu1),
            nu2=float(ms.nu2),
            ex1x2=float(ms.ex1x2),
            c0=ms.c0,
            gamma=gamma_of(ms),
        )
        if th == 1:
            header["family"] = json.loads(families.family_to_json(families.Poisson(mean)))
    elif th == 3:
        nb = families.nb_params(setup.n, setup.p)
        header.update(r=nb.r, qbar=nb.qbar, pbar=nb.pbar)
        header["family"] = json.loads(families.family_to_json(nb.family()))
    else:
        bi = families.bi_params(setup.n, setup.p)
        header.update(N=bi.N, Ntilde=bi.Ntilde, ptilde=bi.ptilde, alpha=bi.alpha)
        header["family"] = json.loads(families.family_to_json(bi.family()))

    for x in xs:
        pred = ldcore.predict_main_term(
            th,
            n_eff,
            x,
            nu1=(float(ms.nu1) if ms else None),
            p=setup.p,
            moments=ms,
            zone=setup.zone,
        )
        y = (x - mean) / mean if mean > 0 else math.nan
        cond = True
        saddle = math.nan
        if th == 1:
            log_exact = float(exact.log_masses[x]) if x < len(exact) else NEG_INF
            log_approx = float(families.Poisson(mean).log_pmf(x))
            cond = check_conditions(ms, n_eff, x, setup.mode, setup.thresholds).passed
            try:
                saddle = ldcore.solve_saddle("binomial_h", n=n_eff, nu1=float(ms.nu1), x=x).value
            except RegimeError:
                pass
        elif th == 2:
            log_exact = exact.log_tail(x)
            if log_exact < MIN_LOG_TAIL:
                report.skipped.append(f"x={x}: exact tail below 1e-280")
                continue
            try:
                lam = families.lambda_star(float(ms.nu1), y)
            except RegimeError as e:
                report.skipped.append(f"x={x}: {e}")
                continue
            log_approx = families.tail(families.Poisson(n_eff * lam), x).logval
            cond = check_conditions(ms, n_eff, x, setup.mode, setup.thresholds).passed and x > mean
            try:
                saddle = ldcore.solve_saddle("binomial_h", n=n_eff, nu1=float(ms.nu1), x=x).value
            except RegimeError:
                pass
        elif th == 3:
            log_exact = float(exact.log_masses[x]) if x < len(exact) else NEG_INF
            log_approx = float(families.pmf(nb.family(), x).logval)
            if x > 0:
                saddle = ldcore.solve_saddle("nb_w", r=nb.r, pbar=nb.pbar, x=x).value
        else:
            log_exact = float(exact.log_masses[x]) if x < len(exact) else NEG_INF
            log_approx = float(families.pmf(bi.family(), x).logval)
            if 0 < x < bi.N:
                saddle = ldcore.solve_saddle("bi_htilde", N=bi.N, ptilde=bi.ptilde, x=x).value
        if log_exact == NEG_INF or log_approx == NEG_INF:
            report.skipped.append(f"x={x}: zero probability")
            continue
        log_ratio = log_exact - log_approx
        ratio = math.exp(log_ratio)
        over = math.exp(log_ratio - pred.log_main_term) if not math.isnan(pred.log_main_term) else math.nan
        dev = abs(over - 1) if th in (1, 2) else abs(ratio - 1)
        report.rows.append(
            {
                "x": x,
                "y": y,
                "log_exact": log_exact,
                "log_approx": log_approx,
                "ratio": ratio,
                "log_main_term": pred.log_main_term,
                "ratio_over_main": over,
                "deviation": dev,
                "error_scale": pred.error_scale,
                "saddle": saddle,
                "conditions_ok": cond,
                "zone_ok": pred.zone_ok,
            }
        )
    if th in (1, 2):
        header["fitted_K"] = fitted_constant(report)
    return report


def fitted_constant(report: RatioReport) -> float:
    """Smallest K with deviation <= K * error_scale on every row whose conditions hold."""
    ks = [
        r["deviation"] / r["error_scale"]
        for r in report.rows
        if r["conditions_ok"] and r["error_scale"] > 0 and math.isfinite(r["deviation"])
    ]
    return max(ks) if ks else math.nan


# Sweeps


@dataclass(frozen=True)
class SweepConfig:
    theorem: int
    points: tuple[tuple[int, float], ...]
    x_rule: str = "sd:2"
    stat: str | None = None
    m: int | None = None
    k1: int = 1
    k2: int = 1
    mode: str = "strict"
    thresholds: Thresholds | None = None
    zone: ldcore.ZoneConfig = ldcore.ZoneConfig()
    cap: int | None = None
    method: str = "auto"
    zone_only: bool = False
    workers: int = 1
    seed: int = 0
    fmt: str = "csv"


def _p_rule(rule: str, n: int) -> float:
    kind, _, arg = rule.partition(":")
    if kind == "power":
        c, _, e = arg.partition(":")
        return float(c) * n ** float(e)
    if kind == "const":
        return float(arg)
    raise ValueError(f"unknown p rule {rule!r}")


def _ints(text: str) -> list[int]:
    return [int(float(v)) for v in text.replace("\n", ",").split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace("\n", ",").split(",") if v.strip()]


def load_sweep_config(path: str | Path) -> SweepConfig:
    """Read an INI sweep description (see the README for the grammar)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        cp.read_file(fh)
    return parse_sweep_config(cp)


def parse_sweep_config(cp: configparser.ConfigParser) -> SweepConfig:
    if not cp.has_section("sweep") or not cp.has_section("schedule"):
        raise ValueError("config needs [sweep] and [schedule] sections")
    sw, sc = cp["sweep"], cp["schedule"]
    ns = _ints(sc.get("n", ""))
    if not ns:
        raise ValueError("schedule is empty")
    prule = sc.get("p", "")
    if prule.partition(":")[0] in ("power", "const"):
        ps = [_p_rule(prule, n) for n in ns]
    else:
        ps = _floats(prule)
        if len(ps) == 1:
            ps = ps * len(ns)
    if len(ps) != len(ns):
        raise ValueError("p list and n list differ in length")
    th = None
    if cp.has_section("thresholds"):
        t = cp["thresholds"]
        th = Thresholds(
            t.getfloat("nu1_bound", Thresholds.nu1_bound),
            t.getfloat("y_bound", Thresholds.y_bound),
            t.getfloat("second_factor", Thresholds.second_factor),
        )
    cap = sw.get("cap", "auto")
    m = sw.get("m", "")
    return SweepConfig(
        theorem=sw.getint("theorem"),
        points=tuple(zip(ns, ps)),
        x_rule=sw.get("x_rule", "sd:2"),
        stat=sw.get("stat") or None,
        m=int(m) if m else None,
        k1=sw.getint("k1", 1),
        k2=sw.getint("k2", 1),
        mode=sw.get("mode", "strict"),
        thresholds=th,
        zone=ldcore.ZoneConfig(sw.getfloat("zone_c", 1.0), sw.get("zone_divisor", "log")),
        cap=None if cap == "auto" else int(cap),
        method=sw.get("method", "auto"),
        zone_only=sw.getboolean("zone_only", False),
        workers=sw.getint("workers", 1),
        seed=sw.getint("seed", 0),
        fmt=sw.get("format", "csv"),
    )


@dataclass
class PointResult:
    index: int
    n: int
    p: float
    report: RatioReport | None
    error: str = ""
    exit_code: int = 0


def _run_point(args) -> PointResult:
    cfg, i, n, p = args
    try:
        setup = make_setup(
            cfg.theorem,
            n,
            p,
            stat=cfg.stat,
            m=cfg.m,
            k1=cfg.k1,
            k2=cfg.k2,
            mode=cfg.mode,
            thresholds=cfg.thresholds,
            zone=cfg.zone,
            cap=cfg.cap,
            method=cfg.method,
        )
        return PointResult(i, n, p, ratio_report(setup, cfg.x_rule))
    except (RegimeError, ValueError, MemoryError) as e:
        return PointResult(i, n, p, None, str(e), 2)
    except (ArithmeticError, SeriesNotConverged) as e:
        return PointResult(i, n, p, None, str(e), 3)


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> list[PointResult]:
    """Evaluate every schedule point; results come back in schedule order."""
    jobs = [(cfg, i, n, p) for i, (n, p) in enumerate(cfg.points)]
    workers = workers or cfg.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    for r in results:
        if r.report is not None and not r.report.rows:
            log.info("point %d (n=%d, p=%g) skipped: %s", r.index, r.n, r.p, "; ".join(r.report.skipped))
    return results


SUMMARY_COLUMNS = ("point", "n", "p", "rows", "max_deviation", "fitted_K", "status")


def trend_summary(cfg: SweepConfig, results: list[PointResult]) -> tuple[str, bool]:
    """CSV of per-point max deviation and whether it strictly decreases along the schedule."""
    lines = [f"# schema={SCHEMA}", f"# theorem={cfg.theorem}", f"# x_rule={cfg.x_rule}"]
    lines.append(f"# zone_only={int(cfg.zone_only)}")
    devs = []
    body = []
    for r in results:
        if r.report is None:
            body.append(",".join([str(r.index), str(r.n), fmt(r.p), "0", "nan", "nan", "error: " + r.error.replace(",", ";")]))
            devs.append(math.nan)
            continue
        d = r.report.max_deviation(cfg.zone_only)
        devs.append(d)
        status = "ok" if r.report.rows else "skipped"
        k = r.report.header.get("fitted_K", math.nan)
        body.append(",".join([str(r.index), str(r.n), fmt(r.p), str(len(r.report.rows)), fmt(d), fmt(k), status]))
    decreasing = all(math.isfinite(d) for d in devs) and all(b < a for a, b in zip(devs, devs[1:]))
    lines.append(f"# strictly_decreasing={int(decreasing)}")
    lines.append(",".join(SUMMARY_COLUMNS))
    lines.extend(body)
    return "\n".join(lines) + "\n", decreasing


def write_sweep(cfg: SweepConfig, results: list[PointResult], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "json" if cfg.fmt == "json" else "csv"
    for r in results:
        if r.report is not None:
            (out / f"point-{r.index:03d}.{ext}").write_text(r.report.render(cfg.fmt))
    summary, _ = trend_summary(cfg, results)
    (out / "summary.csv").write_text(summary)
    return out


# Lemma validation suite


@dataclass
class LemmaCheck:
    name: str
    cases: int = 0
    failures: int = 0
    worst_margin: float = math.inf
    detail: str = ""

    def record(self, margin: float, what: str = ""):
        self.cases += 1
        if not margin >= 0:
            self.failures += 1
        if margin < self.worst_margin or math.isnan(margin):
            self.worst_margin = margin
            self.detail = what

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.failures == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<18} {status}  cases={self.cases:<6d} worst_margin={self.worst_margin:.6g}  {self.detail}"

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "cases": self.cases,
            "failures": self.failures,
            "pass": self.passed,
            "worst_margin": _jsonable(self.worst_margin),
            "detail": self.detail,
        }


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def check_hat_e_bound(rng: np.random.Generator, trials: int = 60) -> LemmaCheck:
    """|Ehat(Y_1..Y_k)| <= 2^{k-1} (E|Y|^2)^{k/2} at random u and p."""
    chk = LemmaCheck("hat-e-bound")
    stats = [(statistic_by_name("two-runs"), 1), (statistic_by_name("n11"), 2), (statistic_by_name("nk1k2", 2, 1), 2)]
    for _ in range(trials):
        stat, m = stats[int(rng.integers(len(stats)))]
        p = float(rng.uniform(0.01, 0.4))
        u = complex(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-math.pi, math.pi)))
        oracle = ldcore.BlockMomentOracle(stat, p, m)
        for k, val in enumerate(ldcore.heinrich_hat_E(oracle, u, 6), start=1):
            bound = ldcore.hat_e_bound(oracle, u, k)
            chk.record(bound - abs(val), f"{stat.name} p={p:.3g} u={u:.3g} k={k}")
    return chk


def check_inversion_bound(rng: np.random.Generator, trials: int = 1000) -> LemmaCheck:
    """Total variation norm <= the Fourier-side bound, on random signed measures."""
    chk = LemmaCheck("inversion-bound")
    for i in range(trials):
        size = int(rng.integers(1, 51))
        masses = rng.uniform(-1, 1, size)
        m = bounds.SignedLatticeMeasure(masses)
        w = np.abs(masses)
        a = float(np.sum(w * np.arange(size)) / np.sum(w)) if np.sum(w) > 0 else 0.0
        b = (1.0, 5.0)[i % 2]
        tv = bounds.tv_norm(m)
        rhs = bounds.varijotas_rhs(m, a, b)
        chk.record(rhs - tv + 1e-10 * rhs, f"trial={i} size={size} b={b}")
    # Tilted exact 2-runs law against the tilted Poisson law (a Poisson(x) law).
    for n, p, x in ((40, 0.2, 3), (60, 0.15, 3), (80, 0.1, 2)):
        stat = statistic_by_name("two-runs")
        exact = pmf_auto(stat, BernoulliChain(n, p), cap=n + 1)
        nu1 = p * p
        y = (x - n * nu1) / (n * nu1)
        h = ldcore.solve_saddle("binomial_h", n=n, nu1=nu1, x=x).value
        tilted, _ = ldcore.tilt_pmf(exact, h)
        pois = np.exp(families.Poisson(x).log_pmf(np.arange(len(tilted))))
        diff = bounds.SignedLatticeMeasure.difference(tilted.masses, pois)
        b = max(1.0, math.sqrt(n * nu1))
        tv = bounds.tv_norm(diff)
        rhs = bounds.varijotas_rhs(diff, float(x), b)
        chk.record(rhs - tv, f"tilted 2-runs n={n} p={p} x={x} y={y:.3g}")
    return chk


def check_tilt_inversion(rng: np.random.Generator, trials: int = 30) -> LemmaCheck:
    """e^{zm} G{m} recovered from the tilted transform, with an independent transform."""
    chk = LemmaCheck("tilt-inversion")
    stat = statistic_by_name("two-runs")
    for _ in range(trials):
        n = int(rng.integers(2, 13))
        p = float(rng.uniform(0.05, 0.3))
        z = float(rng.uniform(-0.3, 0.3))
        exact = pmf_auto(stat, BernoulliChain(n, p), cap=n + 1)
        # Points carrying at least 1e-3 of the tilted mass; far smaller ones sit below
        # the rounding floor of the quadrature, which is relative to the whole transform.
        tilted, _ = ldcore.tilt_pmf(exact, z)
        ms = [k for k in range(len(exact)) if tilted.log_masses[k] > math.log(1e-3)]
        m = ms[int(rng.integers(len(ms)))]
        res = ldcore.inversion_check(
            exact, z, m, transform=lambda u: ldcore.heinrich_cf_2runs(n, p, u).value
        )
        chk.record(1e-11 - res, f"n={n} p={p:.3g} z={z:.3g} m={m}")
    return chk


def _identity_check(name: str, cases, tol: float) -> LemmaCheck:
    chk = LemmaCheck(name)
    for what, lhs, rhs in cases:
        err = abs(math.expm1(lhs - rhs))
        chk.record(tol - err, what)
    return chk


def check_poisson_tilt() -> LemmaCheck:
    cases = []
    for mean in np.arange(1.0, 50.5, 3.5):
        for x in range(1, 101):
            lhs, rhs = ldcore.poisson_tilt_sides(float(mean), x)
            cases.append((f"mean={mean:g} x={x}", lhs, rhs))
    return _identity_check("poisson-tilt", cases, 1e-11)


def check_nb_tilt() -> LemmaCheck:
    cases = []
    for n in (100, 1000, 10_000, 100_000):
        for p in (0.01, 0.05, 0.1, 0.2):
            try:
                fam = families.nb_params(n, p).family()
            except RegimeError:
                continue
            mean = fam.mean
            for x in sorted({max(1, int(mean * f)) for f in (0.5, 0.9, 1.0, 1.1, 1.5, 2.0)}):
                lhs, rhs = ldcore.nb_tilt_sides(fam, x)
                cases.append((f"n={n} p={p} x={x}", lhs, rhs))
    return _identity_check("nb-tilt", cases, 1e-10)


def check_binomial_tilt() -> LemmaCheck:
    cases = []
    for n in (100, 1000, 10_000, 100_000):
        for p in (0.01, 0.05, 0.1, 0.2):
            fam = families.bi_params(n, p).family()
            mean = fam.mean
            for x in sorted({max(1, int(mean * f)) for f in (0.5, 0.9, 1.0, 1.1, 1.5, 2.0)}):
                if x >= fam.N:
                    continue
                lhs, rhs = ldcore.binomial_tilt_sides(fam, x)
                cases.append((f"n={n} p={p} x={x}", lhs, rhs))
    return _identity_check("binomial-tilt", cases, 1e-10)


def check_gamma_bounds(grid: tuple[float, float, float] = (1.0, 1000.0, 0.5)) -> LemmaCheck:
    lo, hi, step = grid
    chk = LemmaCheck("gamma-bounds")
    count = int(round((hi - lo) / step)) + 1
    for i in range(count):
        x = lo + i * step
        r = bounds.gamma_bounds_check(x)
        chk.record(min(r.lower_margin, r.upper_margin), f"x={x:g}")
    return chk


def check_saddle_identities(rng: np.random.Generator, trials: int = 200) -> LemmaCheck:
    """Saddle residuals, n lambda* e^h = x and the tilted transform ratio identity."""
    chk = LemmaCheck("saddle-identities")
    for _ in range(trials):
        n = float(rng.choice([1e2, 1e4, 1e6]))
        nu1 = float(rng.uniform(1e-4, 0.2))
        y = float(rng.uniform(-0.1, 0.1))
        t = float(rng.uniform(-math.pi, math.pi))
        x = n * nu1 * (1 + y)
        sol = ldcore.solve_saddle("binomial_h", n=n, nu1=nu1, x=x)
        chk.record(1e-12 - sol.residual, f"binomial_h n={n:g} nu1={nu1:.3g} y={y:.3g}")
        lam = families.lambda_star(nu1, y)
        chk.record(1e-12 - _rel(n * lam * math.exp(sol.value), x), f"lambda* n={n:g} nu1={nu1:.3g} y={y:.3g}")
        lhs, rhs = ldcore.binomial_ratio_sides(n, nu1, y, t)
        chk.record(1e-12 - abs(lhs - rhs), f"ratio n={n:g} nu1={nu1:.3g} y={y:.3g} t={t:.3g}")
        z = ldcore.solve_saddle("poisson_z", n=n, nu1=nu1, x=x)
        chk.record(1e-12 - z.residual, f"poisson_z y={y:.3g}")
    for n in (1000, 100_000):
        for p in (0.01, 0.1):
            nb = families.nb_params(n, p)
            bi = families.bi_params(n, p)
            for f in (0.8, 1.2):
                x = max(1, int(n * p * p * f))
                chk.record(1e-12 - ldcore.solve_saddle("nb_w", r=nb.r, pbar=nb.pbar, x=x).residual, f"nb_w n={n} p={p}")
                x = int(n * bi.alpha * f)
                chk.record(1e-12 - ldcore.solve_saddle("bi_htilde", N=bi.N, ptilde=bi.ptilde, x=x).residual, f"bi n={n} p={p}")
    return chk


def check_cramer_series(rng: np.random.Generator, trials: int = 200) -> LemmaCheck:
    """Series against closed forms, and the two-saddle identity for Lambda."""
    chk = LemmaCheck("cramer-series")
    for _ in range(trials):
        n = float(rng.choice([10, 1e3, 1e6]))
        nu1 = float(rng.uniform(1e-4, 0.3))
        smax = 0.5 * (1 - nu1) / nu1
        y = float(rng.uniform(-min(smax, 0.99), smax))
        a = ldcore.lambda_series(n, nu1, y, check=False)
        b = ldcore.lambda_closed_form(n, nu1, y)
        chk.record(1e-12 - _rel(a, b), f"Lambda n={n:g} nu1={nu1:.3g} y={y:.3g}")
        a = ldcore.lambda_star_series(n, nu1, y, check=False)
        b = ldcore.lambda_star_closed_form(n, nu1, y)
        chk.record(1e-12 - _rel(a, b), f"Lambda* n={n:g} nu1={nu1:.3g} y={y:.3g}")
    for n in (100, 1e4, 1e6):
        for nu1 in (0.005, 0.01, 0.05, 0.1):
            for y in (-0.1, -0.05, -0.02, 0.02, 0.05, 0.1):
                lhs = ldcore.cramer_identity_lhs(n, nu1, y)
                rhs = ldcore.lambda_closed_form(n, nu1, y)
                chk.record(1e-11 - _rel(lhs, rhs), f"identity n={n:g} nu1={nu1} y={y}")
    return chk


LEMMA_CHECKS = (
    "hat-e-bound",
    "inversion-bound",
    "tilt-inversion",
    "poisson-tilt",
    "nb-tilt",
    "binomial-tilt",
    "gamma-bounds",
    "saddle-identities",
    "cramer-series",
)
ALIASES = {"gamaf": "gamma-bounds", "gamma": "gamma-bounds"}


def run_lemma_suite(
    seed: int = 0,
    only: Iterable[str] | None = None,
    grid: tuple[float, float, float] | None = None,
) -> list[LemmaCheck]:
    """Run the selected checks; each draws from its own generator spawned from ``seed``."""
    names = list(LEMMA_CHECKS)
    if only:
        wanted = [ALIASES.get(o, o) for o in only]
        bad = [w for w in wanted if w not in LEMMA_CHECKS]
        if bad:
            raise ValueError(f"unknown checks {bad}; choose from {LEMMA_CHECKS}")
        names = [n for n in names if n in wanted]
    seeds = np.random.SeedSequence(seed).spawn(len(LEMMA_CHECKS))
    rngs = {n: np.random.default_rng(s) for n, s in zip(LEMMA_CHECKS, seeds)}
    runners = {
        "hat-e-bound": lambda: check_hat_e_bound(rngs["hat-e-bound"]),
        "inversion-bound": lambda: check_inversion_bound(rngs["inversion-bound"]),
        "tilt-inversion": lambda: check_tilt_inversion(rngs["tilt-inversion"]),
        "poisson-tilt": check_poisson_tilt,
        "nb-tilt": check_nb_tilt,
        "binomial-tilt": check_binomial_tilt,
        "gamma-bounds": lambda: check_gamma_bounds(grid or (1.0, 1000.0, 0.5)),
        "saddle-identities": lambda: check_saddle_identities(rngs["saddle-identities"]),
        "cramer-series": lambda: check_cramer_series(rngs["cramer-series"]),
    }
    return [runners[n]() for n in names]
