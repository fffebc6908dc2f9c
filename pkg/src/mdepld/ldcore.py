"""Cramer-type series, saddle points, exponential tilting and Heinrich factorizations.

The characteristic-function recursions all follow the same pattern: the transform of a
sum of a stationary 1-dependent sequence is a product of factors ``phi_k`` where

    phi_k = 1 + E Y + sum_{j<k} Ehat(Y_j..Y_k) / (phi_j ... phi_{k-1}),
    Y = exp(u X) - 1,

and the bracket ``Ehat`` only depends on the span ``k - j + 1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import Sequence

import numpy as np

from .exact import LatticePMF, WindowStatistic, _initial_state_weights, _transitions, cf_eval
from .families import NegBinomial, Binomial, Poisson, RegimeError
from .moments import GroupedStatistic, MomentSet, gamma_of
from .numerics import NEG_INF, log_sum_exp_array, periodic_quadrature, series_sum

MIN_FACTOR = 0.1
MAX_SPAN = 8
_DEC_PREC = 60


class HeinrichInstability(ArithmeticError):
    """A recursion factor fell below the stability threshold."""


def _ratio(nu1: float, y: float) -> float:
    s = nu1 * y / (1 - nu1)
    if not abs(s) < 1:
        raise RegimeError(f"series diverges: |nu1 y / (1 - nu1)| = {abs(s):.4g} >= 1")
    return s


def lambda_closed_form(n: float, nu1: float, y: float) -> float:
    """-n (1 - nu1) [s + (1 - s) ln(1 - s)] evaluated at 60 significant digits."""
    s = _ratio(nu1, y)
    with localcontext() as ctx:
        ctx.prec = _DEC_PREC
        ds = Decimal(s)
        inner = ds + (1 - ds) * (1 - ds).ln()
        return float(-Decimal(n) * (1 - Decimal(nu1)) * inner)


def lambda_star_closed_form(n: float, nu1: float, y: float) -> float:
    """-n [ln(1 - t) + t] evaluated at 60 significant digits."""
    t = _ratio(nu1, y)
    with localcontext() as ctx:
        ctx.prec = _DEC_PREC
        dt = Decimal(t)
        return float(-Decimal(n) * ((1 - dt).ln() + dt))


def lambda_series(n: float, nu1: float, y: float, check: bool = True) -> float:
    """Cramer-type exponent -n (1-nu1) sum_{j>=2} s^j / (j (j-1)), s = nu1 y / (1 - nu1)."""
    s = _ratio(nu1, y)
    if s == 0:
        return 0.0
    res = series_sum(
        lambda j: s**j / (j * (j - 1)), tol=1e-17, start=2, ratio_bound=abs(s)
    )
    val = -n * (1 - nu1) * res.value
    if check:
        _agree(val, lambda_closed_form(n, nu1, y), "Lambda")
    return val


def lambda_star_series(n: float, nu1: float, y: float, check: bool = True) -> float:
    """n sum_{j>=2} t^j / j, t = nu1 y / (1 - nu1)."""
    t = _ratio(nu1, y)
    if t == 0:
        return 0.0
    res = series_sum(lambda j: t**j / j, tol=1e-17, start=2, ratio_bound=abs(t))
    val = n * res.value
    if check:
        _agree(val, lambda_star_closed_form(n, nu1, y), "Lambda*")
    return val


def _agree(a: float, b: float, what: str, rtol: float = 1e-10):
    if abs(a - b) > rtol * max(abs(a), abs(b), 1e-300):
        raise ArithmeticError(f"{what}: series {a!r} and closed form {b!r} disagree")


def cramer_identity_lhs(n: float, nu1: float, y: float) -> float:
    """-x h + n ln(1 + nu1 (e^h - 1)) + z x - n nu1 (e^z - 1) at the two saddle points."""
    x = n * nu1 * (1 + y)
    h = solve_saddle("binomial_h", n=n, nu1=nu1, x=x).value
    z = solve_saddle("poisson_z", n=n, nu1=nu1, x=x).value
    return -x * h + n * math.log1p(nu1 * math.expm1(h)) + z * x - n * nu1 * math.expm1(z)


@dataclass(frozen=True)
class SaddleSolution:
    kind: str
    value: float
    derived: float
    log_normalizer: float
    residual: float


def solve_saddle(kind: str, **params) -> SaddleSolution:
    """Closed-form root of one of the four saddle-point equations.

    ``binomial_h`` (n, nu1, x): x = n nu1 e^h / (1 + nu1 (e^h - 1)).
    ``poisson_z`` (n, nu1, x): n nu1 e^z = x.
    ``nb_w`` (r, pbar, x): pbar e^w = x / (r + x).
    ``bi_htilde`` (N, ptilde, x): N ptilde e^h / (1 + ptilde (e^h - 1)) = x.
    """
    x = float(params["x"])
    if kind == "binomial_h":
        n, nu1 = params["n"], params["nu1"]
        y = (x - n * nu1) / (n * nu1)
        s = nu1 * y / (1 - nu1)
        if not (s < 1 and y > -1):
            raise RegimeError(f"binomial saddle undefined for y={y:.4g}")
        h = math.log1p(y) - math.log1p(-s)
        em1 = math.expm1(h)
        lognorm = n * math.log1p(nu1 * em1)
        resid = n * nu1 * math.exp(h) / (1 + nu1 * em1) - x
    elif kind == "poisson_z":
        n, nu1 = params["n"], params["nu1"]
        y = (x - n * nu1) / (n * nu1)
        if not y > -1:
            raise RegimeError("Poisson saddle needs x > 0")
        h = math.log1p(y)
        em1 = y
        lognorm = n * nu1 * em1
        resid = n * nu1 * math.exp(h) - x
    elif kind == "nb_w":
        r, pbar = params["r"], params["pbar"]
        if not x > 0:
            raise RegimeError("NB saddle needs x > 0")
        h = math.log(x / (r + x)) - math.log(pbar)
        em1 = math.expm1(h)
        lognorm = r * (math.log1p(-pbar) - math.log(r / (r + x)))
        resid = pbar * math.exp(h) - x / (r + x)
    elif kind == "bi_htilde":
        N, pt = params["N"], params["ptilde"]
        if not 0 < x < N:
            raise RegimeError(f"binomial saddle needs 0 < x < N={N}, got x={x}")
        h = math.log(x * (1 - pt)) - math.log(pt * (N - x))
        em1 = math.expm1(h)
        lognorm = N * math.log1p(pt * em1)
        resid = N * pt * math.exp(h) / (1 + pt * em1) - x
    else:
        raise ValueError(f"unknown saddle kind {kind!r}")
    scale = max(abs(x), 1e-300)
    return SaddleSolution(kind, h, em1, lognorm, abs(resid) / scale)


def tilt_pmf(pmf: LatticePMF, z: float) -> tuple[LatticePMF, float]:
    """Conjugate law e^{z m} G{m} / G^(z) over the stored masses, plus log G^(z).

    For a truncated input the overflow cell is tilted by its worst case
    (e^{z * support_max} for z > 0), which keeps the returned bound rigorous.
    """
    ks = np.arange(len(pmf))
    with np.errstate(over="ignore", invalid="ignore"):
        logs = pmf.log_masses + z * ks
    if not np.all(np.isfinite(logs) | (logs == NEG_INF)):
        raise OverflowError(f"tilting by z={z} overflows")
    lognorm = log_sum_exp_array(logs)
    bound = NEG_INF
    if pmf.truncated and pmf.log_truncation_bound > NEG_INF:
        if z <= 0:
            edge = z * len(pmf)
        elif pmf.support_max is not None:
            edge = z * pmf.support_max
        else:
            edge = math.inf
        bound = pmf.log_truncation_bound + edge - lognorm
    out = LatticePMF(
        logs - lognorm,
        truncated=pmf.truncated,
        log_truncation_bound=bound,
        support_max=pmf.support_max,
    )
    return out, lognorm


def inversion_check(pmf: LatticePMF, z: float, m: int, transform=None, nodes: int | None = None) -> float:
    """Relative gap between e^{z m} G{m} and (1/2pi) int G^(it + z) e^{-itm} dt.

    ``transform`` defaults to the transform of ``pmf`` itself; passing an independently
    computed one (e.g. a Heinrich product) makes both sides independent.
    """
    if transform is None:
        transform = lambda u: cf_eval(pmf, u)  # noqa: E731
    nodes = nodes or 2 * len(pmf) + 1
    rhs = periodic_quadrature(lambda t: transform(z + 1j * t) * cmath.exp(-1j * t * m), nodes)
    lhs = math.exp(z * m + float(pmf.log_masses[m])) if 0 <= m < len(pmf) else 0.0
    return abs(rhs - lhs) / (abs(lhs) if lhs else 1.0)


class BlockMomentOracle:
    """Mixed moments of Y_j = exp(u X_j) - 1 for blocks of ``m`` window payoffs.

    Uses the per-bit transfer matrix: the block matrix C(u) = T(u)^m sums
    P(bits) e^{u X} over block bit strings between boundary states, so
    E[Y_1 ... Y_k] = pi (C(u) - C(0))^k 1 with pi the iid law of w-1 boundary bits.
    """

    def __init__(self, stat: WindowStatistic, p: float, m: int):
        if m < max(1, stat.width - 1):
            raise ValueError("blocks must hold at least w-1 windows")
        self.stat, self.p, self.m = stat, p, m
        self.pi = np.array(_initial_state_weights(stat, p), dtype=complex)
        self._trans = _transitions(stat)
        self._block_pmf = None

    def _step(self, u: complex) -> np.ndarray:
        ns = self.stat.n_states
        t = np.zeros((ns, ns), dtype=complex)
        w = (1 - self.p, self.p)
        for s, b, s2, f in self._trans:
            t[s, s2] += w[b] * cmath.exp(u * f)
        return t

    def block_matrix(self, u: complex) -> np.ndarray:
        return np.linalg.matrix_power(self._step(u), self.m) - np.linalg.matrix_power(
            self._step(0), self.m
        )

    def prod_moments(self, u: complex, span: int) -> list[complex]:
        """[E Y_1, E Y_1 Y_2, ..., E Y_1 ... Y_span]."""
        b = self.block_matrix(u)
        v = self.pi.copy()
        out = []
        for _ in range(span):
            v = v @ b
            out.append(complex(v.sum()))
        return out

    def block_law(self) -> LatticePMF:
        if self._block_pmf is None:
            from .exact import BernoulliChain, pmf_dp

            self._block_pmf = pmf_dp(self.stat, BernoulliChain(self.m, self.p))
        return self._block_pmf

    def abs2(self, u: complex) -> float:
        """E |Y|^2."""
        law = self.block_law()
        ks = np.arange(len(law))
        return float(np.sum(law.masses * np.abs(np.exp(complex(u) * ks) - 1) ** 2))


def heinrich_hat_E(oracle: BlockMomentOracle, u: complex, span: int) -> list[complex]:
    """[Ehat(Y_1), Ehat(Y_1, Y_2), ..., Ehat(Y_1..Y_span)] for a stationary sequence."""
    if span < 1 or span > MAX_SPAN:
        raise ValueError(f"span must be in 1..{MAX_SPAN}")
    mom = oracle.prod_moments(u, span)
    hat: list[complex] = []
    for k in range(1, span + 1):
        val = mom[k - 1]
        for j in range(1, k):
            val -= hat[j - 1] * mom[k - j - 1]
        hat.append(val)
    return hat


def hat_e_bound(oracle: BlockMomentOracle, u: complex, k: int) -> float:
    """2^{k-1} prod (E|Y_m|^2)^{1/2} for k identically distributed factors."""
    return 2.0 ** (k - 1) * oracle.abs2(u) ** (k / 2)


@dataclass
class HeinrichResult:
    value: complex
    log_value: complex
    factors: list[complex] = field(repr=False)
    truncation_diagnostic: float = 0.0
    hat_e: list[complex] = field(default_factory=list, repr=False)


def _product(factors: Sequence[complex]) -> tuple[complex, complex]:
    logv = sum(cmath.log(f) for f in factors)
    return cmath.exp(logv), logv


def _guard(f: complex, k: int):
    if abs(f) < MIN_FACTOR:
        raise HeinrichInstability(f"|factor {k}| = {abs(f):.3g} < {MIN_FACTOR}")


def heinrich_cf_generic(
    grouped: GroupedStatistic, p: float, u: complex, depth: int = 6
) -> HeinrichResult:
    """E exp(u S) for S the sum of the blocks, keeping brackets of span <= depth."""
    if grouped.n_blocks is None or grouped.n_blocks < 1:
        raise ValueError("grouping needs n_terms with at least one block")
    if not 1 <= depth <= MAX_SPAN:
        raise ValueError(f"depth must be in 1..{MAX_SPAN}")
    oracle = BlockMomentOracle(grouped.stat, p, grouped.m)
    hat = heinrich_hat_E(oracle, u, depth)
    ey = hat[0]
    factors: list[complex] = []
    for k in range(1, grouped.n_blocks + 1):
        phi = 1 + ey
        denom = 1.0 + 0j
        for s in range(2, min(depth, k) + 1):
            denom *= factors[k - s]
            phi += hat[s - 1] / denom
        _guard(phi, k)
        factors.append(phi)
    value, logv = _product(factors)
    return HeinrichResult(value, logv, factors, abs(hat[depth - 1]), hat)


def _inner_sum(first: complex, ratio_num: complex, factors: list[complex], k: int, alternate: bool):
    """sum over spans s = 2..k of term_s, term_{s+1} = term_s * ratio_num / f_{k-s}.

    ``first`` is the span-2 numerator; terms are divided progressively by the
    trailing factors.  Stops once a term drops below 1e-18 of the running sum.
    """
    total = 0j
    num = first
    denom = 1.0 + 0j
    for s in range(2, k + 1):
        denom *= factors[k - s]
        term = num / denom
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300) and abs(ratio_num) < abs(factors[k - s]):
            break
        num = num * ratio_num * (-1 if alternate else 1)
    return total


def heinrich_cf_2runs(n: int, p: float, u: complex) -> HeinrichResult:
    """E exp(u S) for the 2-runs count via its explicit factor recursion."""
    a = cmath.exp(u) - 1
    base = 1 + p * p * a
    factors: list[complex] = []
    for k in range(1, n + 1):
        f = base
        if k > 1:
            f += _inner_sum(a * a * p**3 * (1 - p), a * p * (1 - p), factors, k, False)
        _guard(f, k)
        factors.append(f)
    value, logv = _product(factors)
    return HeinrichResult(value, logv, factors)


N11_VARIANTS = ("upToKminus1", "upToK")


def heinrich_cf_n11(n: int, p: float, u: complex, variant: str = "upToKminus1") -> HeinrichResult:
    """E exp(u S) for the count of success-failure pairs via its factor recursion.

    ``upToKminus1`` divides span terms by g_j ... g_{k-1}; ``upToK`` also by g_k,
    which makes each factor the fixed point of g = c + S / g.
    """
    if variant not in N11_VARIANTS:
        raise ValueError(f"variant must be one of {N11_VARIANTS}")
    alpha = p * (1 - p)
    a = cmath.exp(u) - 1
    base = 1 + alpha * a
    factors: list[complex] = []
    for k in range(1, n + 1):
        if k == 1:
            g = base
        else:
            s = _inner_sum(-(alpha * a) ** 2, alpha * a, factors, k, True)
            if variant == "upToKminus1":
                g = base + s
            else:
                g = base
                for _ in range(50):
                    g_new = base + s / g
                    if abs(g_new - g) <= 1e-16 * abs(g_new):
                        g = g_new
                        break
                    g = g_new
                else:
                    raise HeinrichInstability(f"fixed point for factor {k} did not converge")
        _guard(g, k)
        factors.append(g)
    value, logv = _product(factors)
    return HeinrichResult(value, logv, factors)


@dataclass(frozen=True)
class ZoneConfig:
    """Finite-n proxy for little-o zones: |x - mean| <= c * bound / divisor(n)."""

    c: float = 1.0
    divisor: str = "log"

    def div(self, n: float) -> float:
        if self.divisor == "log":
            return math.log(n)
        if self.divisor == "none":
            return 1.0
        raise ValueError(f"unknown zone divisor {self.divisor!r}")


@dataclass(frozen=True)
class MainTermPrediction:
    theorem: int
    log_main_term: float
    zone_ok: bool
    zone_halfwidth: float
    center: float
    error_scale: float
    inputs: dict

    @property
    def main_term(self) -> float:
        return math.exp(self.log_main_term)


def predict_main_term(
    theorem: int,
    n: float,
    x: float,
    nu1: float | None = None,
    p: float | None = None,
    moments: MomentSet | None = None,
    zone: ZoneConfig = ZoneConfig(),
) -> MainTermPrediction:
    """Main term and zone flag for one of the four ratio statements.

    Selectors 1 (Poisson point ratio) and 2 (x-dependent Poisson tail) need ``nu1``
    or ``moments`` and report an error scale when ``moments`` are given; 3 (negative
    binomial) and 4 (binomial) need ``p`` and predict a ratio near 1.
    """
    inputs = {"n": n, "x": x, "nu1": nu1, "p": p, "zone_c": zone.c, "zone_divisor": zone.divisor}
    err = math.nan
    if theorem in (1, 2):
        if nu1 is None:
            if moments is None:
                raise ValueError("need nu1 or moments")
            nu1 = float(moments.nu1)
            inputs["nu1"] = nu1
        mean = n * nu1
        y = (x - mean) / mean
        try:
            if theorem == 1:
                logm = lambda_series(n, nu1, y)
            else:
                logm = lambda_star_series(n, nu1, y)
        except RegimeError:
            logm = math.nan
        if theorem == 1:
            half = zone.c * math.sqrt(mean) / zone.div(n)
            ok = abs(x - mean) <= half
        else:
            half = zone.c * math.sqrt(mean)
            ok = x > mean and abs(x - mean) <= half
        if moments is not None:
            g = gamma_of(moments)
            err = g * (1 / nu1 + n * y * y)
            if theorem == 2:
                err *= math.sqrt(mean)
        ok = ok and not math.isnan(logm)
        return MainTermPrediction(theorem, logm, ok, half, mean, err, inputs)
    if theorem in (3, 4):
        if p is None:
            raise ValueError("need p")
        if theorem == 3:
            mean = n * p * p
            bound = min(n * p * p, n ** (2 / 3) * p ** (2 / 3))
        else:
            mean = n * p * (1 - p)
            bound = min(n * p, n ** (2 / 3))
        half = zone.c * bound / zone.div(n)
        return MainTermPrediction(theorem, 0.0, abs(x - mean) <= half, half, mean, err, inputs)
    raise ValueError(f"theorem must be 1..4, got {theorem}")


# Tilting identities for the three approximating laws.


def poisson_tilt_sides(mean: float, x: int) -> tuple[float, float]:
    """log of both sides of mean^x e^-mean / x! = exp(mean(e^z - 1) - z x) x^x e^-x / x!."""
    z = math.log(x / mean)
    lhs = float(Poisson(mean).log_pmf(x))
    rhs = mean * math.expm1(z) - z * x + float(Poisson(x).log_pmf(x))
    return lhs, rhs


def nb_tilt_sides(fam: NegBinomial, x: int) -> tuple[float, float]:
    """log NB{x} versus -w x + log NB^(w) + log NB(r, r/(r+x)){x}."""
    sol = solve_saddle("nb_w", r=fam.r, pbar=fam.pbar, x=x)
    lhs = float(fam.log_pmf(x))
    rhs = -sol.value * x + sol.log_normalizer + float(NegBinomial(fam.r, fam.r / (fam.r + x)).log_pmf(x))
    return lhs, rhs


def binomial_tilt_sides(fam: Binomial, x: int) -> tuple[float, float]:
    """log BI{x} versus -h x + log BI^(h) + log BI(N, x/N){x}."""
    sol = solve_saddle("bi_htilde", N=fam.N, ptilde=fam.ptilde, x=x)
    lhs = float(fam.log_pmf(x))
    rhs = -sol.value * x + sol.log_normalizer + float(Binomial(fam.N, x / fam.N).log_pmf(x))
    return lhs, rhs


def binomial_ratio_sides(n: float, nu1: float, y: float, t: float) -> tuple[complex, complex]:
    """(1 + nu1(e^{it+h} - 1)) / (1 + nu1(e^h - 1)) versus 1 + (x/n)(e^{it} - 1)."""
    x = n * nu1 * (1 + y)
    h = solve_saddle("binomial_h", n=n, nu1=nu1, x=x).value
    lhs = (1 + nu1 * (cmath.exp(1j * t + h) - 1)) / (1 + nu1 * math.expm1(h))
    rhs = 1 + (x / n) * (cmath.exp(1j * t) - 1)
    return lhs, rhs


def select_n11_variant(n: int, p: float, exact_cf, probes: Sequence[complex] = (0.4j, 0.1 + 1.3j, -0.2 + 2.5j)) -> str:
    """Denominator convention whose product matches ``exact_cf`` best at the probe points."""
    errs = {}
    for v in N11_VARIANTS:
        try:
            errs[v] = max(abs(heinrich_cf_n11(n, p, u, v).value - exact_cf(u)) for u in probes)
        except HeinrichInstability:
            errs[v] = math.inf
    return min(N11_VARIANTS, key=lambda v: errs[v])
