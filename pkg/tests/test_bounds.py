import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdepld.bounds import (
    CheckResult,
    SignedLatticeMeasure,
    gamma_bounds_check,
    kolmogorov_norm,
    tv_norm,
    varijotas_parseval,
    varijotas_rhs,
)
from mdepld.exact import BernoulliChain, pmf_dp, two_runs
from mdepld.families import Poisson
from mdepld.ldcore import tilt_pmf

DIRAC_DIFF = SignedLatticeMeasure([1.0, -1.0])


def test_norm_examples():
    assert tv_norm(DIRAC_DIFF) == 2
    assert kolmogorov_norm(DIRAC_DIFF) == 1
    zero = SignedLatticeMeasure(np.zeros(5))
    assert tv_norm(zero) == kolmogorov_norm(zero) == 0
    point = SignedLatticeMeasure([0.0, 0.0, -2.5], offset=3)
    assert kolmogorov_norm(point) == 2.5 and tv_norm(point) == 2.5


masses = st.lists(st.floats(-1, 1), min_size=1, max_size=50)


@given(masses, st.floats(-10, 10))
def test_norm_order_and_homogeneity(vals, c):
    m = SignedLatticeMeasure(vals)
    assert kolmogorov_norm(m) <= tv_norm(m) * (1 + 1e-15)
    assert tv_norm(m.scaled(c)) == pytest.approx(abs(c) * tv_norm(m), rel=1e-12, abs=1e-300)
    assert kolmogorov_norm(m.scaled(c)) == pytest.approx(abs(c) * kolmogorov_norm(m), rel=1e-12, abs=1e-300)


def _tilted_difference():
    # Small 2-runs law tilted to its saddle against the Poisson law with the tilted mean.
    n, p = 40, 0.3
    pmf = pmf_dp(two_runs(), BernoulliChain(n, p))
    x = 5
    z = math.log(x / (n * p * p))
    tilted, _ = tilt_pmf(pmf, z)
    ks = np.arange(len(pmf))
    poi = np.exp(Poisson(float(x)).log_pmf(ks))
    return SignedLatticeMeasure.difference(np.exp(tilted.log_masses), poi), x, n * p * p


def test_tilted_difference_norms():
    m, _, _ = _tilted_difference()
    assert tv_norm(m) > 0
    assert tv_norm(m) >= kolmogorov_norm(m)


def test_inversion_rhs_point_mass():
    for b in (0.5, 1.0, 7.0):
        rhs = varijotas_rhs(SignedLatticeMeasure([1.0]), 0.0, b)
        assert rhs == pytest.approx(math.sqrt(1 + b * math.pi), rel=1e-14)
        assert rhs >= 1


def test_inversion_rhs_matches_parseval():
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = SignedLatticeMeasure(rng.uniform(-1, 1, 10), offset=int(rng.integers(-5, 5)))
        a = float(np.sum(m.support * np.abs(m.masses)) / np.sum(np.abs(m.masses)))
        for b in (1.0, 5.0):
            assert varijotas_rhs(m, a, b) == pytest.approx(varijotas_parseval(m, a, b), rel=1e-10)
            assert tv_norm(m) <= varijotas_rhs(m, a, b) + 1e-10


def test_inversion_bound_on_tilted_difference():
    m, x, mean = _tilted_difference()
    b = max(1.0, math.sqrt(mean))
    assert tv_norm(m) <= varijotas_rhs(m, float(x), b)


def test_inversion_rhs_rejects_bad_b():
    with pytest.raises(ValueError):
        varijotas_rhs(DIRAC_DIFF, 0.0, 0.0)


@settings(max_examples=200)
@given(masses, st.floats(-5, 55), st.floats(0.1, 20))
def test_inversion_bound_randomized(vals, a, b):
    m = SignedLatticeMeasure(vals)
    assert tv_norm(m) <= varijotas_rhs(m, a, b) * (1 + 1e-10) + 1e-12


def test_check_result_json():
    doc = json.loads(CheckResult("c", {"x": 1}, 1.0, 2.0, True, 1.0).to_json())
    assert set(doc) == {"check", "inputs", "lhs", "rhs", "pass", "margin"}


def test_gamma_bounds_at_one():
    r = gamma_bounds_check(1.0)
    assert r.lower_ok and r.upper_ok
    lower = math.exp(-1) * math.sqrt(2 * math.pi * 1.16)
    upper = math.exp(-1) * math.sqrt(2 * math.pi * 1.18)
    # Frozen from a 50-digit evaluation.
    assert lower == pytest.approx(0.99317195353237, rel=1e-13)
    assert upper == pytest.approx(1.00169719104469, rel=1e-13)
    assert r.lower_margin == pytest.approx(-math.log(lower), rel=1e-12)
    assert r.upper_margin == pytest.approx(math.log(upper), rel=1e-12)


def test_gamma_bounds_at_hundred_against_mpmath():
    r = gamma_bounds_check(100.0)
    assert r.lower_ok and r.upper_ok
    mpmath.mp.dps = 50
    x = mpmath.mpf(100)
    lg = mpmath.loggamma(x + 1)
    base = x * mpmath.log(x) - x + mpmath.log(2 * mpmath.pi) / 2
    assert r.lower_margin == pytest.approx(float(lg - base - mpmath.log(x + mpmath.mpf("0.16")) / 2), rel=1e-8)
    assert r.upper_margin == pytest.approx(float(base + mpmath.log(x + mpmath.mpf("0.18")) / 2 - lg), rel=1e-8)
    small = gamma_bounds_check(10.0)
    assert r.lower_margin < small.lower_margin and r.upper_margin < small.upper_margin


def test_gamma_bounds_grid():
    for x in np.arange(1.0, 1000.5, 0.5):
        r = gamma_bounds_check(float(x))
        assert r.lower_ok and r.upper_ok, x


def test_gamma_bounds_domain():
    with pytest.raises(ValueError):
        gamma_bounds_check(0.5)
