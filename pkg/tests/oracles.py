"""Independent reference computations used by the tests.

These deliberately avoid the package's own arithmetic: plain enumeration over
bit strings, and mpmath dynamic programming at 50 digits.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath

mpmath.mp.dps = 50


def enumerate_law(payoff, width: int, n_terms: int, p) -> list:
    """Exact law of sum_j payoff(bits[j:j+width]) by listing every chain."""
    p = Fraction(p)
    q = 1 - p
    length = n_terms + width - 1
    out: dict[int, Fraction] = {}
    for bits in itertools.product((0, 1), repeat=length):
        s = sum(payoff(*bits[j : j + width]) for j in range(n_terms))
        k = sum(bits)
        out[s] = out.get(s, Fraction(0)) + p**k * q ** (length - k)
    top = max(out)
    return [out.get(i, Fraction(0)) for i in range(top + 1)]


def mp_window_law(payoff, width: int, n_terms: int, p, cap: int | None = None) -> list:
    """mpmath DP over the last width-1 bits; counts above ``cap`` lumped into index cap+1."""
    p = mpmath.mpf(p)
    w = (1 - p, p)
    states = list(itertools.product((0, 1), repeat=width - 1))
    dist = {}
    for s in states:
        weight = mpmath.mpf(1)
        for b in s:
            weight *= w[b]
        dist[(s, 0)] = weight
    for _ in range(n_terms):
        nxt: dict = {}
        for (s, c), v in dist.items():
            for b in (0, 1):
                window = s + (b,)
                c2 = c + payoff(*window)
                if cap is not None and c2 > cap:
                    c2 = cap + 1
                key = (window[1:], c2)
                nxt[key] = nxt.get(key, 0) + v * w[b]
        dist = nxt
    top = max(c for _, c in dist)
    law = [mpmath.mpf(0)] * (top + 1)
    for (_, c), v in dist.items():
        law[c] += v
    return law


def mp_lambda(n, nu1, y):
    s = mpmath.mpf(nu1) * mpmath.mpf(y) / (1 - mpmath.mpf(nu1))
    return -mpmath.mpf(n) * (1 - mpmath.mpf(nu1)) * (s + (1 - s) * mpmath.log(1 - s))


def mp_lambda_star(n, nu1, y):
    t = mpmath.mpf(nu1) * mpmath.mpf(y) / (1 - mpmath.mpf(nu1))
    return -mpmath.mpf(n) * (mpmath.log(1 - t) + t)


def mp_identity_lhs(n, nu1, y):
    """-x h + n ln(1 + nu1(e^h - 1)) + z x - n nu1 (e^z - 1) at 50 digits."""
    n, nu1, y = mpmath.mpf(n), mpmath.mpf(nu1), mpmath.mpf(y)
    x = n * nu1 * (1 + y)
    eh = (1 + y) / (1 - nu1 * y / (1 - nu1))
    h = mpmath.log(eh)
    z = mpmath.log(1 + y)
    return -x * h + n * mpmath.log(1 + nu1 * (eh - 1)) + z * x - n * nu1 * (mpmath.e**z - 1)


def mp_poisson_tail(lam, x: int, terms: int = 400):
    lam = mpmath.mpf(lam)
    return mpmath.fsum(mpmath.exp(-lam) * lam**k / mpmath.factorial(k) for k in range(x, x + terms))
