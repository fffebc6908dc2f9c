"""Block moments of grouped window statistics and the regularity conditions on them."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

from .exact import WindowStatistic

Number = Union[float, Fraction]

MAX_ENUM_BITS = 30

STRICT_NU1_BOUND = 0.002
STRICT_Y_BOUND = 0.1
STRICT_SECOND_FACTOR = 1.0 / 20.0


@dataclass(frozen=True)
class GroupedStatistic:
    """``n_terms`` window payoffs summed in consecutive blocks of ``m``.

    Blocks of ``m >= w - 1`` windows form a 1-dependent sequence; the ``remainder``
    trailing windows that do not fill a block are dropped.
    """

    stat: WindowStatistic
    m: int
    n_terms: int | None = None

    @property
    def n_blocks(self) -> int | None:
        return None if self.n_terms is None else self.n_terms // self.m

    @property
    def remainder(self) -> int | None:
        return None if self.n_terms is None else self.n_terms % self.m

    @property
    def grouped_terms(self) -> int | None:
        """Number of windows actually summed (``n_blocks * m``)."""
        return None if self.n_terms is None else self.n_blocks * self.m

    @property
    def bits_per_block(self) -> int:
        return self.m + self.stat.width - 1


def group_blocks(stat: WindowStatistic, m: int, n_terms: int | None = None) -> GroupedStatistic:
    if m < 1 or m < stat.width - 1:
        raise ValueError(
            f"block length m={m} < width-1={stat.width - 1}: blocks would not be 1-dependent"
        )
    return GroupedStatistic(stat, m, n_terms)


@dataclass(frozen=True)
class MomentSet:
    nu1: Number
    nu2: Number
    ex1x2: Number
    c0: int
    n_blocks: int | None = None

    def __post_init__(self):
        if self.c0 < 1:
            raise ValueError("c0 must be a positive integer")
        if not (0 <= self.nu1 <= self.c0 and self.nu2 >= 0 and self.ex1x2 >= 0):
            raise ValueError(f"inconsistent moments {self}")


def _block_sums(stat: WindowStatistic, m: int, blocks: int):
    """Block sums for every string of ``blocks * m + w - 1`` bits, plus its number of ones."""
    length = blocks * m + stat.width - 1
    if length > MAX_ENUM_BITS:
        raise ValueError(f"enumeration over {length} bits exceeds {MAX_ENUM_BITS}")
    idx = np.arange(1 << length, dtype=np.uint32)
    table = np.array(stat.payoff, dtype=np.int64)
    sums = []
    for blk in range(blocks):
        total = np.zeros(idx.size, dtype=np.int64)
        for j in range(blk * m, (blk + 1) * m):
            window = np.zeros(idx.size, dtype=np.uint32)
            for i in range(stat.width):
                window = (window << np.uint32(1)) | ((idx >> np.uint32(j + i)) & np.uint32(1))
            total += table[window]
        sums.append(total)
    ones = np.bitwise_count(idx).astype(np.int64)
    return sums, ones, length


def _weighted(values: np.ndarray, ones: np.ndarray, length: int, p: Number) -> Number:
    # Integer totals per number of ones stay below 2**53, so the float bincount is exact.
    agg = np.bincount(ones, weights=values.astype(float), minlength=length + 1)
    q = 1 - p
    return sum(
        (int(round(agg[k])) * p**k * q ** (length - k) for k in range(length + 1) if agg[k]),
        0 * p,
    )


def block_moments(stat: WindowStatistic, p: Number, m: int) -> MomentSet:
    """nu1 = E X1, nu2 = E X1(X1-1), E X1 X2 by enumerating two adjacent blocks.

    A :class:`~fractions.Fraction` ``p`` gives exact rational moments.
    ``c0`` is the largest block sum any bit string achieves (at least 1).
    """
    group_blocks(stat, m)
    (x1, x2), ones, length = _block_sums(stat, m, 2)
    nu1 = _weighted(x1, ones, length, p)
    nu2 = _weighted(x1 * (x1 - 1), ones, length, p)
    ex1x2 = _weighted(x1 * x2, ones, length, p)
    if not isinstance(p, Fraction):
        nu1, nu2, ex1x2 = float(nu1), float(nu2), float(ex1x2)
    c0 = max(1, int(x1.max()))
    return MomentSet(nu1, nu2, ex1x2, c0)


def gamma_of(ms: MomentSet) -> float:
    return math.exp(1.5 * ms.c0) * max(float(ms.nu1) ** 2, float(ms.nu2), float(ms.ex1x2))


def rel_dev_y(n: int, nu1: float, x: float) -> float:
    mean = n * nu1
    if mean == 0:
        raise ValueError("n * nu1 = 0: relative deviation undefined")
    return (x - mean) / mean


@dataclass(frozen=True)
class Thresholds:
    nu1_bound: float = STRICT_NU1_BOUND
    y_bound: float = STRICT_Y_BOUND
    second_factor: float = STRICT_SECOND_FACTOR

    def looser_than(self, other: "Thresholds") -> bool:
        return (
            self.nu1_bound >= other.nu1_bound
            and self.y_bound >= other.y_bound
            and self.second_factor >= other.second_factor
        )


STRICT = Thresholds()


@dataclass(frozen=True)
class Clause:
    clause: str
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "clause": self.clause,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "pass": self.passed,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class ConditionReport:
    mode: str
    thresholds: Thresholds
    clauses: tuple[Clause, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def __getitem__(self, name: str) -> Clause:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "thresholds": asdict(self.thresholds),
            "pass": self.passed,
            "clauses": [c.to_dict() for c in self.clauses],
        }
        return json.dumps(doc, indent=1)


def check_conditions(
    ms: MomentSet,
    n: int,
    x: float,
    mode: str = "strict",
    thresholds: Thresholds | None = None,
) -> ConditionReport:
    """Evaluate every clause of the moment conditions, with margins ``rhs - lhs``.

    Strict mode always uses the published constants; relaxed mode takes ``thresholds``.
    """
    if mode == "strict":
        th = STRICT
    elif mode == "relaxed":
        th = thresholds or STRICT
    else:
        raise ValueError(f"unknown mode {mode!r}")
    c0 = ms.c0
    nu1 = float(ms.nu1)
    y = rel_dev_y(n, nu1, x) if n * nu1 > 0 else math.inf
    second = nu1 * math.exp(-1.5 * c0) * th.second_factor
    clauses = (
        Clause("x_positive", -float(x), -1.0),
        Clause("nu1_small", math.exp(5 * c0) * nu1, th.nu1_bound),
        Clause("abs_y", abs(y), th.y_bound),
        Clause("nu2_small", float(ms.nu2), second),
        Clause("ex1x2_small", float(ms.ex1x2), second),
    )
    return ConditionReport(mode, th, clauses)
