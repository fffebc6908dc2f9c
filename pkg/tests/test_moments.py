import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mdepld.exact import BernoulliChain, n11_event, nk1k2_event, pmf_bruteforce, two_runs
from mdepld.moments import (
    MomentSet,
    Thresholds,
    block_moments,
    check_conditions,
    gamma_of,
    group_blocks,
    rel_dev_y,
)

from oracles import enumerate_law


def test_grouping_counts():
    g = group_blocks(nk1k2_event(2, 1), 3, n_terms=100)
    assert g.n_blocks == 33 and g.remainder == 1
    assert group_blocks(two_runs(), 1, n_terms=7).n_blocks == 7


def test_grouping_rejects_short_blocks():
    with pytest.raises(ValueError):
        group_blocks(nk1k2_event(2, 1), 1)


def test_n11_pairs_moments():
    p = Fraction(1, 10)
    ms = block_moments(n11_event(), p, 2)
    alpha = p * (1 - p)
    assert ms.nu1 == 2 * alpha == Fraction(18, 100)
    assert ms.nu2 == 0
    assert ms.ex1x2 == alpha**2 * 3
    assert ms.c0 == 1
    f = block_moments(n11_event(), 0.1, 2)
    assert f.ex1x2 == pytest.approx(0.0243, rel=1e-14)


def test_n11_block_is_indicator_up_to_pattern_width():
    for m in (1, 2):
        assert block_moments(n11_event(), Fraction(1, 3), m).nu2 == 0
    # A block of three windows spans four bits and can hold "1010".
    assert block_moments(n11_event(), Fraction(1, 3), 3).nu2 > 0


def test_two_runs_single_window():
    p = Fraction(2, 7)
    ms = block_moments(two_runs(), p, 1)
    assert (ms.nu1, ms.nu2, ms.ex1x2) == (p**2, 0, p**3)


def test_zero_probability_moments():
    for stat in (two_runs(), n11_event(), nk1k2_event(2, 1)):
        ms = block_moments(stat, Fraction(0), 3)
        assert ms.nu1 == ms.nu2 == ms.ex1x2 == 0


def test_enumeration_width_guard():
    with pytest.raises(ValueError):
        block_moments(two_runs(), 0.5, 15)


# Blocks are 1-dependent only when m >= width - 1.
ENUM_CASES = [
    (stat, m)
    for stat in (two_runs(), n11_event(), nk1k2_event(1, 2), nk1k2_event(2, 1))
    for m in (1, 2, 3)
    if m >= stat.width - 1
]


@pytest.mark.parametrize("stat,m", ENUM_CASES)
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2)])
def test_block_moments_against_enumeration(stat, m, p):
    payoff = stat.payoff
    w = stat.width

    def value(*bits):
        idx = 0
        for b in bits:
            idx = 2 * idx + b
        return payoff[idx]

    one = enumerate_law(value, w, m, p)
    nu1 = sum(k * v for k, v in enumerate(one))
    nu2 = sum(k * (k - 1) * v for k, v in enumerate(one))
    two = enumerate_law(value, w, 2 * m, p)
    second = sum(k * k * v for k, v in enumerate(two))
    # E(X1+X2)^2 = 2 E X1^2 + 2 E X1X2 by stationarity.
    ex1x2 = (second - 2 * (nu2 + nu1)) / 2
    ms = block_moments(stat, p, m)
    assert (ms.nu1, ms.nu2, ms.ex1x2) == (nu1, nu2, ex1x2)
    law = pmf_bruteforce(stat, BernoulliChain(m, p)).masses
    assert ms.c0 == max(1, max(k for k, v in enumerate(law) if v))


def test_gamma_examples():
    ms = MomentSet(0.18, 0.0, 0.0243, 1)
    assert gamma_of(ms) == pytest.approx(math.exp(1.5) * 0.0324, rel=1e-15)
    assert gamma_of(MomentSet(0, 0, 0, 1)) == 0
    assert gamma_of(MomentSet(0.3, 0.3, 0.3, 2)) == pytest.approx(math.exp(3) * 0.3, rel=1e-15)


@given(
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
    st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 0.5),
)
def test_gamma_monotone(a, b, c, da, db, dc):
    lo = gamma_of(MomentSet(a, b, c, 1))
    hi = gamma_of(MomentSet(min(1.0, a + da), b + db, c + dc, 1))
    assert hi >= lo


def test_rel_dev_y():
    assert rel_dev_y(100, 0.1, 10) == 0
    assert rel_dev_y(100, 0.1, 11) == pytest.approx(0.1, rel=1e-14)
    assert rel_dev_y(200, 0.05, 11) == pytest.approx(0.1, rel=1e-14)
    with pytest.raises(ValueError):
        rel_dev_y(100, 0.0, 3)


def test_conditions_all_pass():
    nu1 = 1.3e-5
    ms = MomentSet(nu1, 0.0, nu1 * math.exp(-1.5) / 20, 1)
    n = 10**6
    rep = check_conditions(ms, n, round(n * nu1 * 1.05))
    assert math.exp(5) * nu1 == pytest.approx(0.00193, rel=1e-2)
    assert rep.passed
    doc = json.loads(rep.to_json())
    assert {c["clause"] for c in doc["clauses"]} >= {"nu1_small", "abs_y", "nu2_small", "ex1x2_small"}
    assert all(set(c) == {"clause", "lhs", "rhs", "pass", "margin"} for c in doc["clauses"])


def test_conditions_nu1_clause_fails():
    rep = check_conditions(MomentSet(0.01, 0.0, 0.0, 1), 1000, 10)
    assert not rep["nu1_small"].passed
    assert rep["nu1_small"].lhs == pytest.approx(1.484, rel=1e-3)


def test_conditions_y_clause_fails():
    rep = check_conditions(MomentSet(1e-5, 0.0, 0.0, 1), 10**6, 12)
    assert rep["abs_y"].lhs == pytest.approx(0.2, rel=1e-12)
    assert not rep["abs_y"].passed


def test_strict_mode_ignores_thresholds():
    loose = Thresholds(1.0, 1.0, 1.0)
    rep = check_conditions(MomentSet(0.01, 0.0, 0.0, 1), 1000, 10, mode="strict", thresholds=loose)
    assert rep.thresholds == Thresholds()


@given(
    st.floats(1e-7, 0.05), st.floats(0, 1e-3), st.floats(0, 1e-3),
    st.integers(1, 10**6), st.floats(0.5, 1.5),
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
)
def test_strict_implies_relaxed(nu1, nu2, ex, n, scale, a, b, c):
    ms = MomentSet(nu1, nu2, ex, 1)
    x = max(1, round(n * nu1 * scale))
    loose = Thresholds(0.002 + a, 0.1 + b, 1 / 20 + c)
    if check_conditions(ms, n, x).passed:
        assert check_conditions(ms, n, x, mode="relaxed", thresholds=loose).passed
