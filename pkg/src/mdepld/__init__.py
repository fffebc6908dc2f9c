"""Exact laws of window statistics over Bernoulli chains and their Poisson, negative
binomial and binomial large-deviation approximations."""

from .exact import (
    BernoulliChain,
    LatticePMF,
    WindowStatistic,
    cf_eval,
    n11_event,
    nk1k2_event,
    pmf_auto,
    pmf_bruteforce,
    pmf_dp,
    pmf_matpow,
    pmf_moments,
    two_runs,
)
from .families import Binomial, NegBinomial, Poisson, RegimeError, bi_params, nb_params
from .moments import block_moments, check_conditions, gamma_of, group_blocks
from .numerics import LogReal, log_sum_exp, periodic_quadrature, series_sum

__version__ = "0.1.0"
