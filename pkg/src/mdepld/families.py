"""Poisson, negative binomial and binomial laws with moment-matched parameter choices."""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from .numerics import NEG_INF, LogReal, log_sum_exp_array

TAIL_RTOL = 1e-18
# Constant claimed for |N ptilde^2 - (3n-2) alpha^2| <= C alpha^2; checked, not assumed.
VARIANCE_PROXIMITY_C = 2.0
_CHUNK = 512


class RegimeError(ValueError):
    """Parameters fall outside the range where a parameter choice is defined."""


@dataclass(frozen=True)
class Poisson:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise RegimeError(f"Poisson parameter must be positive, got {self.lam}")

    def log_pmf(self, k):
        k = np.asarray(k, dtype=float)
        out = k * math.log(self.lam) - self.lam - gammaln(k + 1)
        return np.where(k >= 0, out, NEG_INF)

    def cf(self, u: complex) -> complex:
        return cmath.exp(self.lam * (cmath.exp(u) - 1))

    @property
    def mean(self) -> float:
        return self.lam

    @property
    def variance(self) -> float:
        return self.lam

    def term_ratio_bound(self, k: int) -> float:
        """Upper bound on pmf(j+1)/pmf(j) for all j >= k."""
        return self.lam / (k + 1)

    support_max = None


@dataclass(frozen=True)
class NegBinomial:
    """NB(r, qbar){j} = Gamma(r+j) / (j! Gamma(r)) qbar^r pbar^j."""

    r: float
    qbar: float

    def __post_init__(self):
        if not self.r > 0:
            raise RegimeError(f"NB shape r must be positive, got {self.r}")
        if not 0 < self.qbar < 1:
            raise RegimeError(f"NB qbar must lie in (0, 1), got {self.qbar}")

    @property
    def pbar(self) -> float:
        return 1.0 - self.qbar

    def log_pmf(self, k):
        k = np.asarray(k, dtype=float)
        out = (
            gammaln(self.r + k)
            - gammaln(k + 1)
            - gammaln(self.r)
            + self.r * math.log(self.qbar)
            + k * math.log1p(-self.qbar)
        )
        return np.where(k >= 0, out, NEG_INF)

    def cf(self, u: complex) -> complex:
        z = self.pbar * cmath.exp(u)
        if abs(z) >= 1:
            raise RegimeError(f"NB transform diverges: |pbar e^u| = {abs(z):.4g} >= 1")
        return cmath.exp(self.r * (math.log(self.qbar) - cmath.log(1 - z)))

    @property
    def mean(self) -> float:
        return self.r * self.pbar / self.qbar

    @property
    def variance(self) -> float:
        return self.r * self.pbar / self.qbar**2

    def term_ratio_bound(self, k: int) -> float:
        # pmf(j+1)/pmf(j) = pbar (r+j)/(j+1), monotone in j towards pbar.
        return self.pbar * max((self.r + k) / (k + 1), 1.0)

    support_max = None


@dataclass(frozen=True)
class Binomial:
    N: int
    ptilde: float

    def __post_init__(self):
        if self.N < 1 or int(self.N) != self.N:
            raise RegimeError(f"binomial N must be a positive integer, got {self.N}")
        if not 0 < self.ptilde < 1:
            raise RegimeError(f"binomial ptilde must lie in (0, 1), got {self.ptilde}")

    def log_pmf(self, k):
        k = np.asarray(k, dtype=float)
        inside = (k >= 0) & (k <= self.N)
        kk = np.clip(k, 0, self.N)
        out = (
            gammaln(self.N + 1.0)
            - gammaln(kk + 1)
            - gammaln(self.N - kk + 1)
            + kk * math.log(self.ptilde)
            + (self.N - kk) * math.log1p(-self.ptilde)
        )
        return np.where(inside, out, NEG_INF)

    def cf(self, u: complex) -> complex:
        return (1 - self.ptilde + self.ptilde * cmath.exp(u)) ** self.N

    @property
    def mean(self) -> float:
        return self.N * self.ptilde

    @property
    def variance(self) -> float:
        return self.N * self.ptilde * (1 - self.ptilde)

    @property
    def support_max(self) -> int:
        return self.N

    def term_ratio_bound(self, k: int) -> float:
        return 0.0 if k >= self.N else (self.N - k) / (k + 1) * self.ptilde / (1 - self.ptilde)


ApproxFamily = Union[Poisson, NegBinomial, Binomial]


def family_to_json(fam: ApproxFamily) -> str:
    return json.dumps({"variant": type(fam).__name__, **asdict(fam)})


def pmf(fam: ApproxFamily, k: int) -> LogReal:
    """Point mass at k; zero outside the support."""
    return LogReal(float(fam.log_pmf(k)))


def tail(fam: ApproxFamily, x: int) -> LogReal:
    """P(Z >= x), summed until the remaining tail is certified below 1e-18 of the sum.

    Certification uses a bound rho < 1 on all later term ratios, giving a geometric
    majorant ``last * rho / (1 - rho)`` for what is left.
    """
    if x <= 0:
        return LogReal(0.0)
    top = fam.support_max
    if top is not None and x > top:
        return LogReal()
    acc = NEG_INF
    k = x
    while True:
        hi = k + _CHUNK if top is None else min(k + _CHUNK, top + 1)
        logs = fam.log_pmf(np.arange(k, hi))
        acc = np.logaddexp(acc, log_sum_exp_array(logs))
        if top is not None and hi > top:
            return LogReal(float(acc))
        rho = fam.term_ratio_bound(hi - 1)
        if rho < 1:
            rest = float(logs[-1]) + math.log(rho) - math.log1p(-rho) if rho > 0 else NEG_INF
            if rest - acc <= math.log(TAIL_RTOL):
                return LogReal(float(acc))
        k = hi


def cf(fam: ApproxFamily, u: complex) -> complex:
    return fam.cf(complex(u))


@dataclass(frozen=True)
class NBParams:
    r: float
    qbar: float
    pbar: float

    def family(self) -> NegBinomial:
        return NegBinomial(self.r, self.qbar)


def nb_params(n: int, p: float) -> NBParams:
    """Negative binomial matching the mean and variance of the 2-runs statistic."""
    b = n * p**3 * (2 - 3 * p) - 2 * p**3 * (1 - p)
    a = n * p**2
    if not b > 0:
        raise RegimeError(
            f"NB parameters undefined for n={n}, p={p}: variance excess {b:.3e} <= 0"
        )
    r = n**2 * p**4 / b
    # Take the complement of whichever is >= 1/2 so that pbar + qbar == 1 exactly.
    qbar = a / (a + b)
    pbar = b / (a + b)
    if qbar >= 0.5:
        pbar = 1.0 - qbar
    else:
        qbar = 1.0 - pbar
    if not (0 < pbar < 1 and r > 0):
        raise RegimeError(f"NB parameters out of range: r={r}, pbar={pbar}")
    return NBParams(r, qbar, pbar)


@dataclass(frozen=True)
class BIParams:
    N: int
    Ntilde: float
    ptilde: float
    alpha: float

    def family(self) -> Binomial:
        return Binomial(self.N, self.ptilde)


def bi_params(n: int, p: float) -> BIParams:
    """Binomial with the exact mean n*alpha of the N(1,1) count, alpha = p(1-p)."""
    if n < 1:
        raise RegimeError("n must be >= 1")
    alpha = p * (1 - p)
    ntilde = n * n / (3 * n - 2)
    N = math.floor(ntilde)
    if N < 1:
        raise RegimeError(f"N = floor({ntilde:.4g}) < 1")
    ptilde = n * alpha / N
    if not 0 < ptilde < 1:
        raise RegimeError(f"binomial ptilde = {ptilde:.4g} outside (0, 1)")
    return BIParams(N, ntilde, ptilde, alpha)


def variance_proximity(n: int, p) -> float:
    """|N ptilde^2 - (3n-2) alpha^2| in units of alpha^2.

    Equals (3n-2) frac(Ntilde) / N, so it stays below (3n-2)/N but is not bounded by
    a fixed small constant on every n.
    """
    bp = bi_params(n, p)
    gap = bp.N * bp.ptilde**2 - (3 * n - 2) * bp.alpha**2
    return float(abs(gap) / bp.alpha**2)


def lambda_star(nu1: float, y: float) -> float:
    """x-dependent Poisson rate nu1 * (1 - nu1 y / (1 - nu1))."""
    val = nu1 * (1 - nu1 * y / (1 - nu1))
    if not val > 0:
        raise RegimeError(f"lambda* = {val:.4g} is not positive")
    return val
