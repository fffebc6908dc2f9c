"""Exact laws of sliding-window statistics over iid Bernoulli chains.

A statistic ``S = sum_j f(eta_j, ..., eta_{j+w-1})`` over ``n_terms`` windows uses a
chain of ``n_terms + w - 1`` Bernoulli(p) bits; the first window starts at the first bit.
Three independent routes compute its law: a forward DP over (last w-1 bits, count), a
transfer matrix of count-capped polynomials raised by repeated squaring, and brute-force
enumeration with exact rationals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .numerics import (
    NEG_INF,
    ExtArray,
    LogReal,
    ext_add,
    ext_convolve,
    ext_scale,
    ext_shift,
    ext_sum,
    log_of,
    log_sum_exp_array,
)

BRUTEFORCE_MAX_BITS = 24
DEFAULT_MEMORY_LIMIT = 2 * 1024**3


class MemoryEstimateError(MemoryError):
    """Raised before allocating when a computation would exceed the memory limit."""


@dataclass(frozen=True)
class WindowStatistic:
    """Payoff ``f`` on windows of ``width`` consecutive bits.

    ``payoff[i]`` is the value on the window whose bits, oldest first, spell ``i`` in
    binary (oldest bit most significant).
    """

    width: int
    payoff: tuple[int, ...]
    name: str = "custom"

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("window width must be >= 1")
        if len(self.payoff) != 2**self.width:
            raise ValueError(f"payoff needs {2**self.width} entries, got {len(self.payoff)}")
        if any(v < 0 or int(v) != v for v in self.payoff):
            raise ValueError("payoff values must be non-negative integers")

    @classmethod
    def from_function(cls, width: int, func, name: str = "custom") -> "WindowStatistic":
        table = []
        for idx in range(2**width):
            bits = tuple((idx >> (width - 1 - i)) & 1 for i in range(width))
            table.append(int(func(*bits)))
        return cls(width, tuple(table), name)

    @property
    def max_payoff(self) -> int:
        return max(self.payoff)

    @property
    def n_states(self) -> int:
        return 2 ** (self.width - 1)

    def __call__(self, *bits: int) -> int:
        idx = 0
        for b in bits:
            idx = (idx << 1) | int(b)
        return self.payoff[idx]

    def mean_payoff(self, p: float) -> float:
        total = 0.0
        for idx, v in enumerate(self.payoff):
            if v:
                k = bin(idx).count("1")
                total += v * p**k * (1 - p) ** (self.width - k)
        return total


def two_runs() -> WindowStatistic:
    return WindowStatistic.from_function(2, lambda a, b: a * b, "two_runs")


def n11_event() -> WindowStatistic:
    return WindowStatistic.from_function(2, lambda a, b: a * (1 - b), "n11_event")


def nk1k2_event(k1: int, k2: int) -> WindowStatistic:
    """Indicator of ``k1`` failures followed by ``k2`` successes."""
    if k1 < 1 or k2 < 1:
        raise ValueError("k1 and k2 must be positive")

    def f(*bits):
        return int(all(b == 0 for b in bits[:k1]) and all(b == 1 for b in bits[k1:]))

    return WindowStatistic.from_function(k1 + k2, f, f"nk1k2_event({k1},{k2})")


def statistic_by_name(name: str, k1: int = 1, k2: int = 1) -> WindowStatistic:
    key = name.replace("-", "_").lower()
    if key in ("two_runs", "2runs", "runs2"):
        return two_runs()
    if key in ("n11", "n11_event"):
        return n11_event()
    if key in ("nk1k2", "nk1k2_event"):
        return nk1k2_event(k1, k2)
    raise ValueError(f"unknown statistic {name!r}")


@dataclass(frozen=True)
class BernoulliChain:
    n_terms: int
    p: float

    def __post_init__(self):
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")

    def chain_length(self, stat: WindowStatistic) -> int:
        return self.n_terms + stat.width - 1


@dataclass(frozen=True, eq=False)
class LatticePMF:
    """Law on 0, 1, ..., len-1 stored as log masses.

    When ``truncated`` is set, mass on counts beyond the stored range is not represented
    in ``log_masses``; ``log_truncation_bound`` is an upper bound for it (the exact
    lumped mass for the PMFs built in this module).  ``support_max`` is the largest
    value the variable can take, if known.
    """

    log_masses: np.ndarray
    truncated: bool = False
    log_truncation_bound: float = NEG_INF
    support_max: int | None = None
    offset: int = field(default=0)

    @classmethod
    def from_probs(cls, probs: Sequence[float], **kw) -> "LatticePMF":
        return cls(log_of(np.asarray(probs, dtype=float)), **kw)

    def __len__(self) -> int:
        return self.log_masses.size

    @property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_masses)

    @property
    def truncation_bound(self) -> float:
        return math.exp(self.log_truncation_bound)

    def mass(self, k: int) -> LogReal:
        if 0 <= k < len(self):
            return LogReal(float(self.log_masses[k]))
        return LogReal()

    def log_tail(self, x: int) -> float:
        """log P(S >= x), counting the lumped overflow mass as part of the tail."""
        parts = [self.log_masses[max(x, 0) :]] if x < len(self) else []
        if self.truncated:
            parts.append(np.array([self.log_truncation_bound]))
        if not parts:
            return NEG_INF
        return log_sum_exp_array(np.concatenate(parts))

    def to_csv(self) -> str:
        lines = ["# schema=1", f"# truncated={int(self.truncated)}"]
        lines.append(f"# truncation_bound={self.truncation_bound:.17g}")
        if not self.truncated or self.truncation_bound < 1e-12:
            mean, var = pmf_moments(self)
            lines.append(f"# mean={mean:.17g}")
            lines.append(f"# variance={var:.17g}")
        lines.append("x,log_prob,prob")
        for x, lp in enumerate(self.log_masses):
            lines.append(f"{x},{_fmt(lp)},{math.exp(lp):.17g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "schema": 1,
            "offset": self.offset,
            "masses": [float(math.exp(v)) for v in self.log_masses],
            "log_masses": [None if v == NEG_INF else float(v) for v in self.log_masses],
            "truncated": self.truncated,
            "truncation_bound": self.truncation_bound,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "LatticePMF":
        doc = json.loads(text)
        logs = np.array([NEG_INF if v is None else v for v in doc["log_masses"]])
        bound = doc["truncation_bound"]
        return cls(
            logs,
            truncated=doc["truncated"],
            log_truncation_bound=math.log(bound) if bound > 0 else NEG_INF,
            offset=doc.get("offset", 0),
        )


def _fmt(v: float) -> str:
    return "-inf" if v == NEG_INF else f"{v:.17g}"


@dataclass(frozen=True)
class ExactPMF:
    """Law with exact rational masses on 0..len-1."""

    masses: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.masses)

    def to_lattice(self) -> LatticePMF:
        logs = np.array([_log_fraction(m) for m in self.masses])
        return LatticePMF(logs, support_max=len(self.masses) - 1)

    def mean(self) -> Fraction:
        return sum((k * m for k, m in enumerate(self.masses)), Fraction(0))


def _log_fraction(q: Fraction) -> float:
    if q == 0:
        return NEG_INF
    # Integer logs avoid overflow for huge numerators and denominators.
    return _log_int(q.numerator) - _log_int(q.denominator)


def _log_int(n: int) -> float:
    bits = n.bit_length()
    if bits < 1000:
        return math.log(n)
    shift = bits - 60
    return math.log(n >> shift) + shift * math.log(2.0)


def default_cap(mean: float) -> int:
    """Cap leaving a Poisson-like upper tail far below 1e-12."""
    return math.ceil(mean + 12.0 * math.sqrt(max(mean, 0.0)) + 30.0)


def _bit_weights(p: float) -> tuple[float, float]:
    return 1.0 - p, p


def _log_weight_excess(p: float) -> float:
    """log(fl(1-p) + p), computed exactly; usually a few 1e-17 but it compounds per bit.

    Dividing the result by (fl(1-p) + p)^L gives the exact law for p / (fl(1-p) + p),
    which is within one ulp of p, and keeps the total mass at 1 for very long chains.
    """
    q, p = _bit_weights(p)
    return math.log1p(float(Fraction(q) + Fraction(p) - 1))


def _initial_state_weights(stat: WindowStatistic, p: float) -> list[float]:
    k = stat.width - 1
    out = []
    for s in range(stat.n_states):
        ones = bin(s).count("1")
        out.append(p**ones * (1.0 - p) ** (k - ones))
    return out


def _transitions(stat: WindowStatistic):
    """(state, bit, next state, payoff) for every transition."""
    mask = stat.n_states - 1
    out = []
    for s in range(stat.n_states):
        for b in (0, 1):
            window = (s << 1) | b
            out.append((s, b, window & mask, stat.payoff[window]))
    return out


def _check_memory(nbytes: float, limit: float):
    if nbytes > limit:
        raise MemoryEstimateError(
            f"estimated memory {nbytes / 2**20:.1f} MiB exceeds limit {limit / 2**20:.1f} MiB"
        )


def _point_at_zero(size: int, weight: float) -> ExtArray:
    vals = np.zeros(size)
    vals[0] = weight
    return ExtArray.from_values(vals)


def _collapse(
    states: list[ExtArray], size: int, full_max: int, cap: int | None, log_scale: float = 0.0
) -> LatticePMF:
    total = ExtArray.zeros(size)
    for row in states:
        total = ext_add(total, row)
    logs = total.to_log() - log_scale
    truncated = cap is not None and cap < full_max
    return LatticePMF(
        logs[:-1].copy(),
        truncated=truncated,
        log_truncation_bound=float(logs[-1]) if truncated else NEG_INF,
        support_max=full_max,
    )


def pmf_dp(
    stat: WindowStatistic,
    chain: BernoulliChain,
    cap: int | None = None,
    memory_limit: float = DEFAULT_MEMORY_LIMIT,
) -> LatticePMF:
    """Forward DP over (last w-1 bits, accumulated count).

    With ``cap=K`` counts above K are lumped into a tracked overflow cell; the returned
    truncation bound is that cell's exact probability.
    """
    if cap is not None and cap < 1:
        raise ValueError("cap must be >= 1")
    n = chain.n_terms
    full_max = n * stat.max_payoff
    size = (full_max if cap is None or cap >= full_max else cap) + 2
    _check_memory(8.0 * stat.n_states * size * 16, memory_limit)
    weights = _bit_weights(chain.p)
    trans = _transitions(stat)

    cur = [_point_at_zero(size, w) for w in _initial_state_weights(stat, chain.p)]
    for _ in range(n):
        nxt = [ExtArray.zeros(size) for _ in range(stat.n_states)]
        for s, b, s2, f in trans:
            if weights[b] == 0.0 or cur[s].is_zero():
                continue
            nxt[s2] = ext_add(nxt[s2], ext_scale(ext_shift(cur[s], f), weights[b]))
        cur = nxt
    return _collapse(cur, size, full_max, cap, chain.chain_length(stat) * _log_weight_excess(chain.p))


def pmf_dp_exact(stat: WindowStatistic, n_terms: int, p: Fraction) -> ExactPMF:
    """The same DP carried out in exact rational arithmetic (small n only)."""
    p = Fraction(p)
    q = 1 - p
    bit = (q, p)
    k = stat.width - 1
    cur = []
    for s in range(stat.n_states):
        ones = bin(s).count("1")
        cur.append({0: p**ones * q ** (k - ones)})
    trans = _transitions(stat)
    for _ in range(n_terms):
        nxt = [dict() for _ in range(stat.n_states)]
        for s, b, s2, f in trans:
            w = bit[b]
            if w == 0:
                continue
            row = nxt[s2]
            for c, m in cur[s].items():
                row[c + f] = row.get(c + f, 0) + m * w
        cur = nxt
    top = n_terms * stat.max_payoff
    masses = [Fraction(0)] * (top + 1)
    for row in cur:
        for c, m in row.items():
            masses[c] += m
    return ExactPMF(tuple(masses))


def _transfer_polys(stat: WindowStatistic, p: float, size: int) -> list[list[ExtArray]]:
    weights = _bit_weights(p)
    vals = np.zeros((stat.n_states, stat.n_states, size))
    for s, b, s2, f in _transitions(stat):
        vals[s, s2, min(f, size - 1)] += weights[b]
    return [[ExtArray.from_values(vals[i, j]) for j in range(stat.n_states)] for i in range(stat.n_states)]


def _matmul(a, b, size: int):
    ns = len(a)
    out = []
    for i in range(ns):
        row = []
        for j in range(ns):
            acc = ExtArray.zeros(size)
            for k in range(ns):
                if a[i][k].is_zero() or b[k][j].is_zero():
                    continue
                acc = ext_add(acc, ext_convolve(a[i][k], b[k][j], size))
            row.append(acc)
        out.append(row)
    return out


def _vecmul(v, m, size: int):
    ns = len(v)
    out = []
    for j in range(ns):
        acc = ExtArray.zeros(size)
        for k in range(ns):
            if v[k].is_zero() or m[k][j].is_zero():
                continue
            acc = ext_add(acc, ext_convolve(v[k], m[k][j], size))
        out.append(acc)
    return out


def _rescale(rows, log_target: float):
    """Scale each row so its total mass (over states and counts) is exp(log_target).

    Row totals of a power of the transfer matrix are known exactly; squaring doubles
    the relative error of that total each time, so it is reset after every product.
    """
    out = []
    for row in rows:
        cells = [ext_sum(r) for r in row]
        logs = np.concatenate([c.to_log() for c in cells])
        have = log_sum_exp_array(logs)
        if have == NEG_INF:
            out.append(row)
            continue
        f = math.exp(log_target - have)
        out.append([ext_scale(r, f) for r in row])
    return out


def pmf_matpow(
    stat: WindowStatistic,
    chain: BernoulliChain,
    cap: int,
    memory_limit: float = DEFAULT_MEMORY_LIMIT,
) -> LatticePMF:
    """Transfer-matrix power by repeated squaring over count-capped polynomials.

    Polynomial degrees saturate at ``cap + 1``, which is the overflow cell, so the
    result matches :func:`pmf_dp` with the same cap.
    """
    if cap is None or cap < 1:
        raise ValueError("cap must be >= 1")
    n = chain.n_terms
    full_max = n * stat.max_payoff
    size = min(cap, full_max) + 2
    ns = stat.n_states
    _check_memory(8.0 * ns * ns * size * 16, memory_limit)

    excess = _log_weight_excess(chain.p)
    vec = [_point_at_zero(size, w) for w in _initial_state_weights(stat, chain.p)]
    power = _transfer_polys(stat, chain.p, size)
    span, done = 1, stat.width - 1
    e = n
    while True:
        if e & 1:
            vec = _vecmul(vec, power, size)
            done += span
            vec = _rescale([vec], done * excess)[0]
        e >>= 1
        if not e:
            break
        power = _matmul(power, power, size)
        span *= 2
        power = _rescale(power, span * excess)
    return _collapse(vec, size, full_max, cap, chain.chain_length(stat) * _log_weight_excess(chain.p))


def _enumerate_counts(stat: WindowStatistic, n_terms: int) -> np.ndarray:
    """counts[s, k] = number of chain strings with statistic s and k ones."""
    length = n_terms + stat.width - 1
    if length > BRUTEFORCE_MAX_BITS:
        raise ValueError(
            f"brute force limited to {BRUTEFORCE_MAX_BITS} chain bits, got {length}"
        )
    table = np.array(stat.payoff, dtype=np.int64)
    wmask = np.uint32(2**stat.width - 1)
    top = n_terms * stat.max_payoff
    counts = np.zeros((top + 1, length + 1), dtype=np.int64)
    step = 1 << 20
    for start in range(0, 1 << length, step):
        idx = np.arange(start, min(start + step, 1 << length), dtype=np.uint32)
        total = np.zeros(idx.size, dtype=np.int64)
        # Bit i of idx is chain position i; window j covers positions j..j+w-1 with
        # position j as the oldest (most significant) bit.
        for j in range(n_terms):
            window = np.zeros(idx.size, dtype=np.uint32)
            for i in range(stat.width):
                window = (window << np.uint32(1)) | ((idx >> np.uint32(j + i)) & np.uint32(1))
            total += table[window & wmask]
        ones = np.bitwise_count(idx).astype(np.int64)
        np.add.at(counts, (total, ones), 1)
    return counts


def pmf_bruteforce(stat: WindowStatistic, chain: BernoulliChain) -> ExactPMF:
    """Enumerate all chain strings; masses are exact rationals summing to one.

    A float ``p`` is taken at its exact binary value.
    """
    p = Fraction(chain.p)
    q = 1 - p
    counts = _enumerate_counts(stat, chain.n_terms)
    length = counts.shape[1] - 1
    weights = [p**k * q ** (length - k) for k in range(length + 1)]
    masses = []
    for row in counts:
        masses.append(sum((int(c) * w for c, w in zip(row, weights) if c), Fraction(0)))
    return ExactPMF(tuple(masses))


def cf_eval(pmf: LatticePMF, u: complex) -> complex:
    """E exp(u S) summed in log domain with the phase kept separately."""
    u = complex(u)
    ks = np.arange(len(pmf))
    logs = pmf.log_masses + u.real * ks
    top = float(np.max(logs)) if logs.size else NEG_INF
    if top == NEG_INF:
        return 0j
    if top > 700:
        raise OverflowError(f"exp(u * S) overflows (log magnitude {top:.1f})")
    terms = np.exp(logs - top) * np.exp(1j * u.imag * ks)
    return complex(np.sum(terms) * math.exp(top))


def pmf_moments(pmf: LatticePMF, tol: float = 1e-12) -> tuple[float, float]:
    """Mean and variance of the stored measure."""
    if pmf.truncated and pmf.truncation_bound > tol:
        raise ValueError(
            f"PMF truncated with lost mass {pmf.truncation_bound:.3e} > {tol:.1e}"
        )
    w = pmf.masses
    ks = np.arange(w.size, dtype=float)
    total = float(np.sum(w))
    mean = float(np.sum(ks * w)) / total
    var = float(np.sum((ks - mean) ** 2 * w)) / total
    return mean, var


def pmf_auto(
    stat: WindowStatistic,
    chain: BernoulliChain,
    cap: int | None = None,
    method: str = "auto",
    memory_limit: float = DEFAULT_MEMORY_LIMIT,
) -> LatticePMF:
    """Pick DP or matrix power by estimated cost; ``cap=None`` uses :func:`default_cap`."""
    if cap is None:
        cap = default_cap(chain.n_terms * stat.mean_payoff(chain.p))
    if method == "dp":
        return pmf_dp(stat, chain, cap, memory_limit)
    if method == "matpow":
        return pmf_matpow(stat, chain, cap, memory_limit)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    ns = stat.n_states
    dp_cost = chain.n_terms * 2 * ns * (cap + 2)
    mat_cost = 2 * max(1, math.log2(chain.n_terms)) * ns**3 * (cap + 2) ** 2 / 50.0
    if dp_cost <= mat_cost:
        return pmf_dp(stat, chain, cap, memory_limit)
    return pmf_matpow(stat, chain, cap, memory_limit)
