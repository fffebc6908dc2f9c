"""Norms of signed lattice measures and numerical checks of two auxiliary inequalities."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .numerics import periodic_quadrature


@dataclass(frozen=True, eq=False)
class SignedLatticeMeasure:
    """Signed masses on offset, offset+1, ... (linear scale)."""

    masses: np.ndarray
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float))

    @classmethod
    def difference(cls, a, b) -> "SignedLatticeMeasure":
        """a - b for two non-negative mass vectors starting at 0."""
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        size = max(a.size, b.size)
        return cls(np.pad(a, (0, size - a.size)) - np.pad(b, (0, size - b.size)))

    @property
    def support(self) -> np.ndarray:
        return self.offset + np.arange(self.masses.size)

    def scaled(self, c: float) -> "SignedLatticeMeasure":
        return SignedLatticeMeasure(c * self.masses, self.offset)

    def transform(self, t):
        """M^(it) = sum_k M{k} e^{itk}, vectorized over t."""
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self.support)) @ self.masses


def tv_norm(m: SignedLatticeMeasure) -> float:
    return float(np.sum(np.abs(m.masses)))


def kolmogorov_norm(m: SignedLatticeMeasure) -> float:
    if m.masses.size == 0:
        return 0.0
    return float(np.max(np.abs(np.cumsum(m.masses))))


def varijotas_rhs(m: SignedLatticeMeasure, a: float, b: float, nodes: int | None = None) -> float:
    """(1 + b pi)^{1/2} ((1/2pi) int |M^|^2 + b^-2 |(e^{-ita} M^(it))'|^2 dt)^{1/2}.

    The derivative is the exact trigonometric sum sum_k i(k - a) e^{it(k-a)} M{k}.
    """
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    ks = m.support.astype(float)
    if nodes is None:
        nodes = max(4, 2 * (int(np.max(np.abs(ks))) + 1) + 1) if ks.size else 4
    shifted = ks - a
    w = m.masses

    def integrand(t):
        ph = np.exp(1j * np.multiply.outer(t, shifted))
        val = ph @ w
        der = ph @ (1j * shifted * w)
        return np.abs(val) ** 2 + np.abs(der) ** 2 / (b * b)

    # |e^{-ita} M^|^2 has integer frequencies, so the quadrature is exact for
    # nodes above twice the support width.
    integral = periodic_quadrature(integrand, nodes).real
    return math.sqrt(1 + b * math.pi) * math.sqrt(max(integral, 0.0))


def varijotas_parseval(m: SignedLatticeMeasure, a: float, b: float) -> float:
    """Same right-hand side through Parseval: sum M{k}^2 (1 + (k - a)^2 / b^2)."""
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    d = m.support - a
    return math.sqrt(1 + b * math.pi) * math.sqrt(float(np.sum(m.masses**2 * (1 + d * d / (b * b)))))


_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class CheckResult:
    check: str
    inputs: dict
    lhs: float
    rhs: float
    passed: bool
    margin: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "check": self.check,
                "inputs": self.inputs,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "pass": self.passed,
                "margin": self.margin,
            }
        )


@dataclass(frozen=True)
class GammaBoundsResult:
    x: float
    lower_ok: bool
    upper_ok: bool
    lower_margin: float
    upper_margin: float


def _stirling_log(x: float, shift: float) -> float:
    return x * math.log(x) - x + _HALF_LOG_2PI + 0.5 * math.log(x + shift)


def gamma_bounds_check(x: float) -> GammaBoundsResult:
    """x^x e^-x sqrt(2pi(x+0.16)) < Gamma(x+1) < x^x e^-x sqrt(2pi(x+0.18)), in logs.

    Margins are log-scale gaps, positive when the inequality holds.
    """
    if x < 1:
        raise ValueError(f"bounds are only claimed for x >= 1, got {x}")
    lg = float(gammaln(x + 1.0))
    lo = lg - _stirling_log(x, 0.16)
    hi = _stirling_log(x, 0.18) - lg
    return GammaBoundsResult(x, lo > 0, hi > 0, lo, hi)
