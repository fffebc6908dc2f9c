"""Log-domain reals, extended-exponent arrays, convergent series and periodic quadrature.

Exact rational arithmetic uses :class:`fractions.Fraction` and complex values use the
builtin :class:`complex`; neither needs a wrapper here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Union

import numpy as np

NEG_INF = float("-inf")


@dataclass(frozen=True, order=True)
class LogReal:
    """A non-negative real stored as its natural log (``-inf`` is zero).

    ``lo`` is a small correction with ``log(value) = logval + lo``.  Keeping it makes
    conversions and products accurate to a few ulp of the value itself instead of
    ``|logval| * eps``, which matters near 1e-300.
    """

    logval: float = NEG_INF
    lo: float = field(default=0.0, compare=False)

    @classmethod
    def from_value(cls, value: float) -> "LogReal":
        if value < 0:
            raise ValueError(f"LogReal needs a non-negative value, got {value}")
        if value == 0:
            return cls()
        hi = math.log(value)
        scale = math.exp(-hi)
        if not math.isfinite(scale) or scale == 0:
            return cls(hi)
        return _renorm(hi, math.log(value * scale))

    @property
    def value(self) -> float:
        if self.logval == NEG_INF:
            return 0.0
        return math.exp(self.logval) * math.exp(self.lo)

    @property
    def is_zero(self) -> bool:
        return self.logval == NEG_INF

    def __add__(self, other: "LogReal") -> "LogReal":
        a, b = (self, other) if self.logval >= other.logval else (other, self)
        if b.is_zero:
            return a
        d = (b.logval - a.logval) + (b.lo - a.lo)
        return _renorm(a.logval, a.lo + math.log1p(math.exp(d)))

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.is_zero or other.is_zero:
            return LogReal()
        hi, err = _two_sum(self.logval, other.logval)
        return _renorm(hi, err + self.lo + other.lo)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.is_zero:
            raise ZeroDivisionError("division by LogReal zero")
        if self.is_zero:
            return LogReal()
        hi, err = _two_sum(self.logval, -other.logval)
        return _renorm(hi, err + self.lo - other.lo)

    def __float__(self) -> float:
        return self.value


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _renorm(hi: float, lo: float) -> LogReal:
    if not math.isfinite(hi):
        return LogReal(hi)
    s = hi + lo
    return LogReal(s, lo - (s - hi))


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def log_sum_exp(values: Iterable[Union[LogReal, float]]) -> LogReal:
    """Log of the sum of linear-scale values, shifting by the maximum first.

    Accepts :class:`LogReal` items or raw log values.
    """
    items = [v if isinstance(v, LogReal) else LogReal(float(v)) for v in values]
    if not items:
        return LogReal()
    top = max(items)
    if top.is_zero or math.isinf(top.logval):
        return top
    acc = math.fsum(
        math.exp((v.logval - top.logval) + (v.lo - top.lo)) for v in items if not v.is_zero
    )
    return _renorm(top.logval, top.lo + math.log(acc))


def log_sum_exp_array(logs: np.ndarray) -> float:
    if logs.size == 0:
        return NEG_INF
    top = float(np.max(logs))
    if top == NEG_INF:
        return NEG_INF
    if top == float("inf"):
        return top
    return top + math.log(float(np.sum(np.exp(logs - top))))


def log_of(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(values, dtype=float))


class SeriesResult(NamedTuple):
    value: float
    terms_used: int
    tail_bound: float


class SeriesNotConverged(ArithmeticError):
    def __init__(self, message: str, tail_bound: float):
        super().__init__(message)
        self.tail_bound = tail_bound


def series_sum(
    term: Callable[[int], float],
    tol: float = 1e-16,
    max_terms: int = 10_000,
    start: int = 0,
    ratio_bound: float | None = None,
) -> SeriesResult:
    """Sum ``term(start) + term(start + 1) + ...`` for geometrically decaying terms.

    The tail after the last used term is bounded by ``|t| * rho / (1 - rho)`` where rho
    is ``ratio_bound`` if given, else the largest ratio of consecutive magnitudes seen
    over the last few terms.  Stops once that bound is below ``tol * |sum|``.
    """
    total = 0.0
    comp = 0.0
    prev = None
    ratios: list[float] = []
    tail = float("inf")
    for i in range(max_terms):
        t = float(term(start + i))
        # Kahan summation keeps long alternating sums at rounding level.
        yk = t - comp
        s = total + yk
        comp = (s - total) - yk
        total = s
        mag = abs(t)
        if prev is not None:
            if prev == 0.0:
                if mag == 0.0:
                    tail = 0.0
                    return SeriesResult(total, i + 1, tail)
                ratios.append(float("inf"))
            else:
                ratios.append(mag / prev)
        prev = mag
        if ratio_bound is not None:
            rho = ratio_bound
        elif len(ratios) >= 2:
            rho = max(ratios[-3:])
        else:
            continue
        if rho < 1.0:
            tail = mag * rho / (1.0 - rho)
            if tail <= tol * abs(total) or tail == 0.0:
                return SeriesResult(total, i + 1, tail)
    raise SeriesNotConverged(
        f"series did not converge within {max_terms} terms (tail bound {tail:.3e})", tail
    )


def periodic_quadrature(f: Callable[[np.ndarray], np.ndarray], nodes: int) -> complex:
    """(1/2pi) * integral of a 2pi-periodic ``f`` over [-pi, pi] by the trapezoidal rule.

    Exact up to rounding for trigonometric polynomials of degree below ``nodes``.
    ``f`` is called with the whole node array; scalar-only callables also work.
    """
    if nodes < 4:
        raise ValueError(f"need at least 4 quadrature nodes, got {nodes}")
    t = -math.pi + 2.0 * math.pi * np.arange(nodes) / nodes
    try:
        vals = np.asarray(f(t), dtype=complex)
        if vals.shape != t.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([complex(f(float(ti))) for ti in t])
    return complex(np.sum(vals) / nodes)


ZERO_EXP = -(2**40)
_LN2 = math.log(2.0)
# Spread (in binary exponents) inside one chunk of a chunked convolution.  Two chunks
# multiply, so the smallest product stays above 2**-962 and never underflows.
_CHUNK_BITS = 480


@dataclass(frozen=True, eq=False)
class ExtArray:
    """Non-negative reals as ``mant * 2**expo`` with an int64 exponent per cell.

    Mantissas lie in [0.5, 1) (or are 0 with ``expo == ZERO_EXP``).  Products and sums
    are exact up to one rounding per operation whatever the magnitudes, which log-domain
    arithmetic cannot offer for very small masses.
    """

    mant: np.ndarray
    expo: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "ExtArray":
        return cls(np.zeros(size), np.full(size, ZERO_EXP, dtype=np.int64))

    @classmethod
    def from_log(cls, logs) -> "ExtArray":
        logs = np.atleast_1d(np.asarray(logs, dtype=float))
        finite = np.isfinite(logs)
        e = np.where(finite, np.floor(np.where(finite, logs, 0.0) / _LN2), 0).astype(np.int64)
        m = np.where(finite, np.exp(np.where(finite, logs, 0.0) - e * _LN2), 0.0)
        return _normalize(m, e)

    @classmethod
    def from_values(cls, values) -> "ExtArray":
        v = np.atleast_1d(np.asarray(values, dtype=float))
        return _normalize(v, np.zeros(v.size, dtype=np.int64))

    def to_log(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = np.log(self.mant) + self.expo * _LN2
        out[self.mant == 0] = NEG_INF
        return out

    def __len__(self) -> int:
        return self.mant.size

    def __getitem__(self, idx) -> "ExtArray":
        return ExtArray(self.mant[idx], self.expo[idx])

    def is_zero(self) -> bool:
        return not np.any(self.mant)


def _normalize(m: np.ndarray, e: np.ndarray) -> ExtArray:
    f, d = np.frexp(m)
    e2 = np.where(f == 0, ZERO_EXP, e + d).astype(np.int64)
    return ExtArray(f, e2)


def _aligned(a: ExtArray, top) -> np.ndarray:
    return np.ldexp(a.mant, np.maximum(a.expo - top, -1100))


def ext_add(a: ExtArray, b: ExtArray) -> ExtArray:
    top = np.maximum(a.expo, b.expo)
    return _normalize(_aligned(a, top) + _aligned(b, top), top)


def ext_scale(a: ExtArray, w: float) -> ExtArray:
    return _normalize(a.mant * w, a.expo)


def ext_sum(a: ExtArray) -> ExtArray:
    """Sum of all cells as a one-cell array."""
    if a.is_zero():
        return ExtArray.zeros(1)
    top = int(np.max(a.expo))
    return _normalize(np.array([np.sum(_aligned(a, top))]), np.array([top]))


def ext_shift(a: ExtArray, k: int) -> ExtArray:
    """Multiply a capped polynomial by x**k; degrees saturate in the last cell."""
    if k == 0:
        return a
    n = len(a)
    m = np.zeros(n)
    e = np.full(n, ZERO_EXP, dtype=np.int64)
    if k < n - 1:
        m[k : n - 1] = a.mant[: n - 1 - k]
        e[k : n - 1] = a.expo[: n - 1 - k]
        tail = ext_sum(a[n - 1 - k :])
    else:
        tail = ext_sum(a)
    m[n - 1], e[n - 1] = tail.mant[0], tail.expo[0]
    return ExtArray(m, e)


def _chunks(a: ExtArray) -> list[tuple[int, int, int]]:
    """Contiguous runs of cells whose nonzero exponents span at most ``_CHUNK_BITS``."""
    out = []
    nz = a.mant != 0
    expo = a.expo
    n = nz.size
    i = 0
    while i < n:
        while i < n and not nz[i]:
            i += 1
        if i >= n:
            break
        lo = hi = int(expo[i])
        j = i + 1
        while j < n:
            if nz[j]:
                v = int(expo[j])
                if max(hi, v) - min(lo, v) > _CHUNK_BITS:
                    break
                lo, hi = min(lo, v), max(hi, v)
            j += 1
        out.append((i, j, hi))
        i = j
    return out


def ext_convolve(a: ExtArray, b: ExtArray, size: int | None = None) -> ExtArray:
    """Convolution of two non-negative sequences.

    If ``size`` is given the result has that length and every index ``>= size - 1`` is
    folded into the last cell (saturating degree, used for count-capped polynomials).
    Only non-negative terms are summed, so each cell keeps full relative accuracy.
    """
    full = len(a) + len(b) - 1
    out = ExtArray.zeros(full)
    ca = _chunks(a)
    cb = _chunks(b) if b is not a else ca
    for sa, ea, ta in ca:
        xa = _aligned(a[sa:ea], ta)
        for sb, eb, tb in cb:
            xb = _aligned(b[sb:eb], tb)
            c = np.convolve(xa, xb)
            seg = slice(sa + sb, sa + sb + c.size)
            part = _normalize(c, np.full(c.size, ta + tb, dtype=np.int64))
            merged = ext_add(out[seg], part)
            out.mant[seg], out.expo[seg] = merged.mant, merged.expo
    if size is None or size == full:
        return out
    if size > full:
        pad = ExtArray.zeros(size - full)
        return ExtArray(np.concatenate([out.mant, pad.mant]), np.concatenate([out.expo, pad.expo]))
    tail = ext_sum(out[size - 1 :])
    m = out.mant[:size].copy()
    e = out.expo[:size].copy()
    m[-1], e[-1] = tail.mant[0], tail.expo[0]
    return ExtArray(m, e)
