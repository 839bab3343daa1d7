"""Posterior model definitions, point estimators, penalty fitting, metrics.

A model bundles the data and hyperparameters a chain needs; the chains
themselves live in :mod:`nnd.samplers`. The module also carries the
moment-matching fit of the penalty rate (the mean nuclear norm of the
matrix law is nm / lam) and the error metrics the experiments report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import NndParams
from .linalg import as_matrix, nuclear_norm
from .samplers import ChainConfig, ChainOutput, HyperState, run_chain


def _check_mask(mask, shape):
    mask = as_matrix(mask, "mask")
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match data {shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise ValueError("mask entries must be exactly 0 or 1")
    if not mask.any():
        raise ValueError("mask hides every entry; need at least one observation")
    return mask


@dataclass(frozen=True)
class PriorModel:
    """No-data model: the chain targets the matrix prior itself."""

    params: NndParams
    lambda_mode: str = "fixed"

    def __post_init__(self):
        if self.lambda_mode not in ("fixed", "adaptive"):
            raise ValueError("lambda_mode must be 'fixed' or 'adaptive'")


@dataclass(frozen=True)
class DenoisingModel:
    """Fully observed Gaussian likelihood Y = X + noise.

    The prior on X is conditionally scaled by the noise, rate
    lam / sqrt(gamma2), which keeps the joint posterior unimodal.
    """

    y: np.ndarray
    hyper: HyperState
    lambda_mode: str = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "y", as_matrix(self.y, "y"))
        if self.lambda_mode not in ("fixed", "adaptive"):
            raise ValueError("lambda_mode must be 'fixed' or 'adaptive'")


@dataclass(frozen=True)
class CompletionModel:
    """Masked Gaussian likelihood; mask entry 1 marks an observed cell."""

    y: np.ndarray
    mask: np.ndarray
    hyper: HyperState
    lambda_mode: str = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "y", as_matrix(self.y, "y"))
        object.__setattr__(self, "mask", _check_mask(self.mask, self.y.shape))
        if self.lambda_mode not in ("fixed", "adaptive"):
            raise ValueError("lambda_mode must be 'fixed' or 'adaptive'")


def log_posterior_denoise(x, model: DenoisingModel) -> float:
    """Joint log-density of the denoising model, up to one constant.

    -||Y - X||_F^2 / (2 g2) - (lam / sqrt(g2)) ||X||_* + nm log(lam / sqrt(g2));
    the last term is constant in X but carries the dependence the rate and
    noise-variance updates need. At lam = 0 the prior terms are absent.
    """
    x = as_matrix(x)
    if x.shape != model.y.shape:
        raise ValueError(f"shape mismatch: x is {x.shape}, y is {model.y.shape}")
    h = model.hyper
    val = -float(np.sum((model.y - x) ** 2)) / (2.0 * h.gamma2)
    if h.lam > 0:
        rate = h.lam / math.sqrt(h.gamma2)
        val += -rate * nuclear_norm(x) + x.size * math.log(rate)
    return val


def log_posterior_complete(x, model: CompletionModel) -> float:
    """As :func:`log_posterior_denoise` with the likelihood masked."""
    x = as_matrix(x)
    if x.shape != model.y.shape:
        raise ValueError(f"shape mismatch: x is {x.shape}, y is {model.y.shape}")
    h = model.hyper
    val = -float(np.sum((model.mask * (model.y - x)) ** 2)) / (2.0 * h.gamma2)
    if h.lam > 0:
        rate = h.lam / math.sqrt(h.gamma2)
        val += -rate * nuclear_norm(x) + x.size * math.log(rate)
    return val


def posterior_mean(output: ChainOutput) -> np.ndarray:
    """Entrywise mean of the retained draws."""
    if output.draws.shape[0] == 0:
        raise ValueError("chain produced no retained draws")
    return output.draws.mean(axis=0)


def fit_lambda_moment(dataset) -> float:
    """Moment-matching estimate of the penalty rate from a matrix sample.

    The nuclear norm of the matrix law has mean nm / lam, so matching the
    dataset's average nuclear norm gives lam = nm / mean ||X_i||_*.
    Requires a nonempty dataset of uniformly shaped matrices.
    """
    mats = [as_matrix(x, f"dataset[{i}]") for i, x in enumerate(dataset)]
    if not mats:
        raise ValueError("dataset is empty")
    shape = mats[0].shape
    if any(x.shape != shape for x in mats):
        raise ValueError("dataset matrices must share one shape")
    mean_norm = float(np.mean([nuclear_norm(x) for x in mats]))
    if mean_norm <= 0:
        raise ValueError("mean nuclear norm is zero; rate is undefined")
    return shape[0] * shape[1] / mean_norm


@dataclass(frozen=True)
class MetricSummary:
    sse: float
    mse_all: float
    mse_hidden: float | None = None

    def as_dict(self) -> dict:
        return {"sse": self.sse, "mse_all": self.mse_all, "mse_hidden": self.mse_hidden}


def metrics(truth, estimate, mask=None) -> MetricSummary:
    """Squared-error summaries; mse_hidden restricts to mask = 0 cells."""
    truth = as_matrix(truth, "truth")
    estimate = as_matrix(estimate, "estimate")
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch: truth {truth.shape} vs estimate {estimate.shape}")
    err2 = (truth - estimate) ** 2
    sse = float(err2.sum())
    mse_all = sse / truth.size
    mse_hidden = None
    if mask is not None:
        mask = _check_mask(mask, truth.shape)
        hidden = mask == 0.0
        if hidden.any():
            mse_hidden = float(err2[hidden].mean())
    return MetricSummary(sse=sse, mse_all=mse_all, mse_hidden=mse_hidden)


# ---------------------------------------------------------------------------
# Experiment helpers
# ---------------------------------------------------------------------------

# Benchmark protocol: hide entries independently with probability 0.5 and
# add Gaussian noise of standard deviation 0.1 to what remains observed.
DEFAULT_NOISE_SD = 0.1
DEFAULT_HIDE_PROB = 0.5


def lambda_grid(lo: float = 0.01, hi: float = 100.0, points: int = 10) -> np.ndarray:
    """Logarithmic grid of penalty rates for fixed-rate comparison runs."""
    if lo <= 0 or hi <= lo or points < 2:
        raise ValueError("need 0 < lo < hi and points >= 2")
    return np.geomspace(lo, hi, points)


def make_lowrank_problem(rows: int, cols: int, rank: int, rng,
                         noise_sd: float = DEFAULT_NOISE_SD,
                         hide_prob: float | None = None):
    """Synthetic benchmark instance: low-rank truth, noise, optional mask.

    The truth is a product of two iid standard normal factors through the
    given rank. Returns ``(truth, y, mask)``; mask is None when hide_prob
    is None, otherwise each entry is hidden independently with that
    probability (guaranteeing at least one observed cell).
    """
    if rank < 1 or rank > min(rows, cols):
        raise ValueError("rank must lie in [1, min(rows, cols)]")
    truth = rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
    y = truth + noise_sd * rng.standard_normal((rows, cols))
    mask = None
    if hide_prob is not None:
        if not 0.0 <= hide_prob < 1.0:
            raise ValueError("hide_prob must lie in [0, 1)")
        mask = (rng.uniform(size=(rows, cols)) >= hide_prob).astype(float)
        if not mask.any():
            mask.flat[int(rng.integers(mask.size))] = 1.0
        y = mask * y
    return truth, y, mask


@dataclass
class ExperimentResult:
    """Posterior-mean reconstruction with its error metrics and rate summary."""

    posterior_mean: np.ndarray
    sse: float
    mse_all: float
    mse_hidden: float | None
    lambda_median: float
    lambda_iqr: tuple[float, float]
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "sse": self.sse,
            "mse_all": self.mse_all,
            "mse_hidden": self.mse_hidden,
            "lambda_median": self.lambda_median,
            "lambda_iqr": list(self.lambda_iqr),
            "config": self.config,
        }


def run_experiment(model, config: ChainConfig, kernel: str = "prox",
                   truth=None, chain_index: int = 0):
    """Run one chain and summarize it as an :class:`ExperimentResult`.

    Returns ``(result, output)``; error metrics are filled only when the
    ground truth is supplied.
    """
    output = run_chain(model, config, kernel=kernel, chain_index=chain_index)
    est = posterior_mean(output)
    lam_tail = output.traces["lam"][config.burn_in:]
    med = float(np.median(lam_tail))
    iqr = (float(np.quantile(lam_tail, 0.25)), float(np.quantile(lam_tail, 0.75)))
    if truth is not None:
        mask = model.mask if isinstance(model, CompletionModel) else None
        ms = metrics(truth, est, mask)
        result = ExperimentResult(est, ms.sse, ms.mse_all, ms.mse_hidden, med, iqr)
    else:
        result = ExperimentResult(est, math.nan, math.nan, None, med, iqr)
    result.config = {
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thinning": config.thinning,
        "seed": config.seed,
        "kernel": kernel,
        "lambda_mode": model.lambda_mode,
    }
    return result, output
