"""Shared test helpers: near-independent chain draws, quadrature oracles."""

import math

import numpy as np
import pytest

from nnd.diagnostics import ess


def thin_to_independent(trace, stride_factor=3.0):
    """Thin a trace at a multiple of its integrated autocorrelation time."""
    trace = np.asarray(trace, dtype=float)
    e = ess(trace).ess
    stride = max(1, math.ceil(stride_factor * trace.size / max(e, 1.0)))
    return trace[::stride]


def quadrature_cdf(logpdf, lo, hi, n_grid=4001):
    """CDF of a 1-D density known up to a constant, on [lo, hi]."""
    xs = np.linspace(lo, hi, n_grid)
    logs = np.array([logpdf(x) for x in xs])
    pdf = np.exp(logs - logs.max())
    cum = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0 * np.diff(xs))])
    cum /= cum[-1]

    def cdf(q):
        return np.interp(q, xs, cum, left=0.0, right=1.0)

    return cdf


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
