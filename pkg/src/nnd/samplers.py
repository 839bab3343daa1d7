"""MCMC kernels and chain orchestration.

Kernels:

* proximal Langevin Metropolis-Hastings for the matrix prior, the
  denoising posterior, and the masked-completion posterior (Gaussian
  proposal centered at a proximal map, full asymmetric MH correction);
* a Gibbs sampler in SVD coordinates for the fully observed Gaussian
  likelihood: coordinate-wise MALA on log singular values, matrix
  von Mises-Fisher conditionals for the two frames (warm Gibbs sweeps
  plus an independence-MH exact refresh);
* conjugate hyperparameter updates: the inverse-Gamma hierarchy for the
  penalty rate and a random-walk move on log noise variance.

Step sizes adapt by Robbins-Monro toward 0.574 acceptance for matrix
kernels (0.44 for the scalar noise-variance walk), by default during
burn-in only so the sampling phase is a fixed kernel.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import (
    NndParams,
    sample_haar_orthogonal,
    sample_inverse_gamma,
    sample_uniform_stiefel,
    sv_coordinate_mala_sweep,
)
from .exceptions import ConfigurationError
from .linalg import nuclear_norm, prox_nuclear, svd
from .vmf import column_gibbs_sweep, matrix_vmf_refresh, pair_gibbs_sweep

TARGET_ACCEPT_MATRIX = 0.574
TARGET_ACCEPT_SCALAR = 0.44

# Independence refreshes whose burn-in acceptance falls below this are
# switched off for the sampling phase (they would only burn time).
_IMH_MIN_ACCEPT = 0.05

_FAULT_ENV = "NND_FAULT"


@dataclass
class ChainConfig:
    """Run-length, adaptation, and seeding knobs shared by all chains."""

    iterations: int = 10000
    burn_in: int = 1000
    thinning: int = 1
    initial_delta: float = 1.0
    target_acceptance: float = TARGET_ACCEPT_MATRIX
    rm_gain: float = 1.0
    rm_decay: float = 0.6
    seed: int = 0
    adapt_during_burn_in_only: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigurationError("need 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ConfigurationError("thinning must be a positive integer")
        if self.initial_delta <= 0:
            raise ConfigurationError("initial_delta must be positive")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ConfigurationError("target_acceptance must lie in (0, 1)")
        if self.rm_gain <= 0:
            raise ConfigurationError("rm_gain must be positive")
        if not 0.5 < self.rm_decay <= 1.0:
            raise ConfigurationError("rm_decay must lie in (0.5, 1]")


@dataclass
class HyperState:
    """Penalty rate, its augmentation variables, and the noise variance."""

    lam: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma2: float = 1.0
    gamma2_fixed: bool = True

    def __post_init__(self):
        if self.lam < 0 or self.alpha <= 0 or self.beta <= 0 or self.gamma2 <= 0:
            raise ValueError("hyperparameters must be positive (lam may be zero)")


@dataclass
class ChainState:
    """Evolving chain state: ambient matrix or SVD factors, plus step sizes.

    Exactly one representation is active: ``x`` for the proximal kernels,
    ``(u, log_sigma, v)`` for the SVD-Gibbs kernel.
    """

    delta: float
    iteration: int = 0
    x: np.ndarray | None = None
    u: np.ndarray | None = None
    log_sigma: np.ndarray | None = None
    v: np.ndarray | None = None
    sigma_steps: np.ndarray | None = None
    sigma_counts: np.ndarray | None = None
    accept_counts: dict = field(default_factory=dict)
    attempt_counts: dict = field(default_factory=dict)
    imh_enabled: dict = field(default_factory=lambda: {"u": True, "v": True})
    _cache_key: tuple | None = None
    _prop_mean: np.ndarray | None = None
    _nn: float | None = None
    _log_target: float | None = None
    last_accept_prob: float = 0.0
    skip_mh: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if (self.x is None) == (self.u is None):
            raise ValueError("exactly one of the ambient and SVD representations "
                             "must be active")

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def current_matrix(self) -> np.ndarray:
        if self.x is not None:
            return self.x
        return (self.u * self.sigma) @ self.v.T

    def tally(self, name: str, accepted) -> None:
        self.attempt_counts[name] = self.attempt_counts.get(name, 0) + 1
        self.accept_counts[name] = self.accept_counts.get(name, 0) + int(accepted)

    def invalidate(self) -> None:
        self._cache_key = None


@dataclass
class ChainOutput:
    """Recorded draws, scalar traces, and acceptance statistics of one run."""

    draws: np.ndarray
    traces: dict
    acceptance_rates: dict
    wall_time: float

    def trace(self, name: str) -> np.ndarray:
        return self.traces[name]


def robbins_monro_update(delta: float, accepted, t: int, cfg: ChainConfig) -> float:
    """One stochastic-approximation step of the proposal scale.

    delta' = delta * exp(eta_t (1[accepted] - target)) with
    eta_t = rm_gain / t^rm_decay, clamped to [1e-12, 1e12]. ``accepted``
    may also be the acceptance probability of the move, which targets the
    same fixed point with far less stochastic-approximation noise; the
    chains here feed the probability.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    eta = cfg.rm_gain / t ** cfg.rm_decay
    value = accepted if isinstance(accepted, float) else float(bool(accepted))
    new = delta * math.exp(eta * (value - cfg.target_acceptance))
    return min(max(new, 1e-12), 1e12)


# ---------------------------------------------------------------------------
# Proximal Langevin kernels
# ---------------------------------------------------------------------------
#
# Every kernel proposes X* ~ N(M(X^t), delta I) for a kernel-specific map M
# and applies the full Metropolis-Hastings correction
#     log a = [L(X*) - L(X^t)] + [log q(X^t | X*) - log q(X* | X^t)],
# with q(. | z) the Gaussian centered at M(z). The Gaussian normalizers
# cancel, so only the squared distances to the two means appear.


def _gauss_exp(a, mean, delta):
    return -float(np.sum((a - mean) ** 2)) / (2.0 * delta)


def _mh_log_ratio(lp_prop, lp_cur, x_cur, prop, mean_fwd, mean_rev, delta):
    return (lp_prop - lp_cur
            + _gauss_exp(x_cur, mean_rev, delta)
            - _gauss_exp(prop, mean_fwd, delta))


def _prior_mean_map(x, delta, params):
    return prox_nuclear(x, delta * params.lam / 2.0)


def _denoise_mean_map(x, delta, y, hyper):
    g2 = hyper.gamma2
    blend = (delta * y + 2.0 * g2 * x) / (delta + 2.0 * g2)
    thr = hyper.lam * delta * math.sqrt(g2) / (delta + 2.0 * g2)
    return prox_nuclear(blend, thr)


def _completion_mean_map(x, delta, y, mask, hyper):
    g2 = hyper.gamma2
    grad = mask * (x - y) / g2
    return prox_nuclear(x - delta * grad, delta * hyper.lam / math.sqrt(g2))


def _denoise_log_target(x, y, hyper):
    return (-float(np.sum((y - x) ** 2)) / (2.0 * hyper.gamma2)
            - hyper.lam / math.sqrt(hyper.gamma2) * nuclear_norm(x))


def _completion_log_target(x, y, mask, hyper):
    return (-float(np.sum((mask * (y - x)) ** 2)) / (2.0 * hyper.gamma2)
            - hyper.lam / math.sqrt(hyper.gamma2) * nuclear_norm(x))


def _prox_mh_step(state, rng, mean_map, log_target, cache_key):
    """Shared proposal/accept logic for the three proximal kernels."""
    delta = state.delta
    if state._cache_key != cache_key:
        state._prop_mean = mean_map(state.x, delta)
        state._log_target = log_target(state.x)
        state._nn = nuclear_norm(state.x)
        state._cache_key = cache_key
    prop = state._prop_mean + math.sqrt(delta) * rng.standard_normal(state.x.shape)
    lp_prop = log_target(prop)
    mean_rev = mean_map(prop, delta)
    log_ratio = _mh_log_ratio(lp_prop, state._log_target, state.x, prop,
                              state._prop_mean, mean_rev, delta)
    state.last_accept_prob = min(1.0, math.exp(min(log_ratio, 0.0)))
    accepted = state.skip_mh or math.log(rng.uniform()) < log_ratio
    if accepted:
        state.x = prop
        state._prop_mean = mean_rev
        state._log_target = lp_prop
        state._nn = nuclear_norm(prop)
    return accepted


def prox_langevin_prior_step(state: ChainState, params: NndParams, rng):
    """One MH step for the matrix prior: proposal mean prox(X, delta lam / 2)."""
    accepted = _prox_mh_step(
        state, rng,
        mean_map=lambda z, d: _prior_mean_map(z, d, params),
        log_target=lambda z: -params.lam * nuclear_norm(z),
        cache_key=("prior", state.delta, params.lam),
    )
    state.tally("x", accepted)
    return state, accepted


def prox_langevin_denoise_step(state: ChainState, y, hyper: HyperState, rng):
    """One MH step for the fully observed Gaussian-likelihood posterior.

    Proposal mean prox((delta Y + 2 g2 X)/(delta + 2 g2)) at threshold
    lam * delta * sqrt(g2) / (delta + 2 g2); the target uses the
    noise-scaled penalty rate lam / sqrt(g2).
    """
    if y.shape != state.x.shape:
        raise ValueError(f"shape mismatch: y is {y.shape}, state is {state.x.shape}")
    accepted = _prox_mh_step(
        state, rng,
        mean_map=lambda z, d: _denoise_mean_map(z, d, y, hyper),
        log_target=lambda z: _denoise_log_target(z, y, hyper),
        cache_key=("denoise", state.delta, hyper.lam, hyper.gamma2),
    )
    state.tally("x", accepted)
    return state, accepted


def prox_grad_completion_step(state: ChainState, y, mask, hyper: HyperState, rng):
    """One MH step for the masked likelihood, proximal-gradient proposal.

    The mask couples the singular values, so there is no closed proximal
    map of the whole negated log-posterior; the proposal instead centers on
    one proximal-gradient step prox(X - delta grad, delta lam / sqrt(g2)),
    with the map recomputed at the conditioning point for the reverse
    density.
    """
    if y.shape != state.x.shape or mask.shape != state.x.shape:
        raise ValueError("y, mask, and state must share one shape")
    accepted = _prox_mh_step(
        state, rng,
        mean_map=lambda z, d: _completion_mean_map(z, d, y, mask, hyper),
        log_target=lambda z: _completion_log_target(z, y, mask, hyper),
        cache_key=("complete", state.delta, hyper.lam, hyper.gamma2),
    )
    state.tally("x", accepted)
    return state, accepted


# ---------------------------------------------------------------------------
# SVD-Gibbs kernel (fully observed Gaussian likelihood only)
# ---------------------------------------------------------------------------


def svd_gibbs_step(state: ChainState, y, hyper: HyperState, rng,
                   cfg: ChainConfig | None = None, adapt: bool = False):
    """One fixed scan of the SVD-coordinate Gibbs sampler.

    In order: (1) coordinate-wise MALA on log singular values targeting
    the conditional with anchor diag(U^T Y V); (2) the left frame from its
    matrix vMF conditional, parameter Y V diag(sigma) / g2; (3) the right
    frame symmetrically, parameter Y^T U diag(sigma) / g2. Frame updates
    combine an independence-MH exact refresh with one warm Gibbs sweep,
    both leaving the conditional invariant. Returns the fraction of
    accepted singular-value moves.
    """
    cfg = cfg or ChainConfig()
    n, m = y.shape  # n <= m enforced by run_chain
    g2 = hyper.gamma2
    anchor = np.diag(state.u.T @ y @ state.v)
    accepted = sv_coordinate_mala_sweep(
        state.log_sigma, state.sigma_steps, state.sigma_counts,
        hyper.lam / math.sqrt(g2), rng, gamma2=g2, anchor=anchor, mn_gap=m - n,
        adapt=adapt, target=cfg.target_acceptance, rm_gain=cfg.rm_gain,
        rm_decay=cfg.rm_decay)
    sig = state.sigma

    f_u = y @ state.v * sig / g2
    if n == 1:
        log_odds = float(f_u[0, 0])
        state.u[0, 0] = 1.0 if rng.uniform() < 1.0 / (1.0 + math.exp(-2.0 * log_odds)) else -1.0
    else:
        _frame_update(state, "u", state.u, f_u, rng)

    f_v = y.T @ state.u * sig / g2  # recomputed after the U move
    _frame_update(state, "v", state.v, f_v, rng)

    k = state.log_sigma.size
    state.attempt_counts["sigma"] = state.attempt_counts.get("sigma", 0) + k
    state.accept_counts["sigma"] = state.accept_counts.get("sigma", 0) + accepted
    return state, accepted / k


def _frame_update(state, side, cur, f, rng):
    """Independence-MH refresh (when enabled) plus one warm Gibbs sweep."""
    if state.imh_enabled[side]:
        fresh, ok = matrix_vmf_refresh(f, cur, rng)
        state.tally(f"imh_{side}", ok)
        if ok:
            cur[...] = fresh
    if cur.shape[0] == cur.shape[1]:
        pair_gibbs_sweep(cur, f, rng)
    else:
        column_gibbs_sweep(cur, f, rng)


def canonicalize_svd_state(u, sigma, v):
    """Descending singular values; first nonzero entry of each left column positive.

    The SVD factors are defined only up to simultaneous column permutations
    and sign flips; emitted draws are put in this canonical form so traces
    of factor functionals are comparable across chains.
    """
    order = np.argsort(sigma)[::-1]
    u, sigma, v = u[:, order], sigma[order], v[:, order]
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return u, sigma, v


# ---------------------------------------------------------------------------
# Hyperparameter updates
# ---------------------------------------------------------------------------


def lambda_gibbs_update(hyper: HyperState, nuclear_norm_x: float, n: int, m: int, rng) -> HyperState:
    """Conjugate update of the penalty rate under its heavy-tailed hyperprior.

    The half-Cauchy prior on lam is represented by two nested inverse-Gamma
    draws on the inverse rate alpha = 1/lam:

        beta  ~ IG(1, 1 + 1/alpha)
        alpha ~ IG(nm + 1/2, ||X||_* / sqrt(g2) + 1/beta)
        lam   = 1/alpha.
    """
    if nuclear_norm_x < 0:
        raise ValueError("nuclear_norm_x must be non-negative")
    beta = float(sample_inverse_gamma(1.0, 1.0 + 1.0 / hyper.alpha, rng))
    scale = nuclear_norm_x / math.sqrt(hyper.gamma2) + 1.0 / beta
    alpha = float(sample_inverse_gamma(n * m + 0.5, scale, rng))
    return replace(hyper, lam=1.0 / alpha, alpha=alpha, beta=beta)


def gamma2_log_conditional(g2: float, hyper: HyperState, x, y, mask=None) -> float:
    """Log conditional of the noise variance (reference prior 1/g2).

    Likelihood over the observed entries plus, when lam > 0, the
    noise-scaled prior normalization (nm/2) log g2 and penalty term; at
    lam = 0 the matrix prior is absent and the conditional is the bare
    inverse-Gamma of the Gaussian model.
    """
    if g2 <= 0:
        return -math.inf
    resid = (y - x) if mask is None else mask * (y - x)
    n_obs = x.size if mask is None else int(mask.sum())
    val = -(n_obs / 2.0) * math.log(g2) - float(np.sum(resid ** 2)) / (2.0 * g2) \
        - math.log(g2)
    if hyper.lam > 0:
        val += -(x.size / 2.0) * math.log(g2) \
            - hyper.lam / math.sqrt(g2) * nuclear_norm(x)
    return val


def gamma2_update(hyper: HyperState, x, y, mask, rng, log_step: float = 0.5):
    """One random-walk MH move on log noise variance.

    Symmetric proposal in w = log g2; the (1/g2) reference prior cancels the
    transform Jacobian. Raises :class:`ConfigurationError` when the noise
    variance is declared fixed. Returns (new hyperstate, accepted).
    """
    if hyper.gamma2_fixed:
        raise ConfigurationError("gamma2_update called with gamma2_fixed set")
    w = math.log(hyper.gamma2)
    w_prop = w + log_step * rng.standard_normal()
    # target in w-space: conditional * g2 (Jacobian), the hyperprior's 1/g2
    # cancels the Jacobian exactly
    cur = gamma2_log_conditional(hyper.gamma2, hyper, x, y, mask) + w
    prop = gamma2_log_conditional(math.exp(w_prop), hyper, x, y, mask) + w_prop
    if math.log(rng.uniform()) < prop - cur:
        return replace(hyper, gamma2=math.exp(w_prop)), True
    return hyper, False


# ---------------------------------------------------------------------------
# Chain orchestration
# ---------------------------------------------------------------------------


def _chain_rng(cfg: ChainConfig, chain_index: int = 0):
    """Independent stream per (seed, chain index); index 0 is the default chain."""
    return np.random.default_rng([cfg.seed, chain_index])


def run_chain(model, config: ChainConfig | None = None, kernel: str = "prox",
              rng=None, chain_index: int = 0) -> ChainOutput:
    """Run one chain for a prior, denoising, or completion model.

    ``kernel`` is "prox" for the proximal Langevin family or "svd" for the
    SVD-coordinate Gibbs sampler (prior and denoising only; the masked
    likelihood breaks the frame conditionals). Adaptation runs during
    burn-in and freezes afterwards unless configured otherwise. Fully
    deterministic given the config seed.

    Setting the environment variable NND_FAULT=skip-mh disables the
    Metropolis-Hastings correction of the proximal kernels; this exists so
    the validation battery can demonstrate its own power and must never be
    set in production runs.
    """
    from . import models as _models

    cfg = config or ChainConfig()
    if kernel not in ("prox", "svd"):
        raise ConfigurationError(f"unknown kernel {kernel!r}")
    rng = rng if rng is not None else _chain_rng(cfg, chain_index)
    t_start = time.perf_counter()

    is_prior = isinstance(model, _models.PriorModel)
    is_denoise = isinstance(model, _models.DenoisingModel)
    is_complete = isinstance(model, _models.CompletionModel)
    if not (is_prior or is_denoise or is_complete):
        raise ConfigurationError(f"unknown model type {type(model).__name__}")
    if is_complete and kernel == "svd":
        raise ConfigurationError("the SVD-Gibbs kernel supports only the fully "
                                 "observed likelihood; use kernel='prox' for "
                                 "completion models")

    fault = os.environ.get(_FAULT_ENV, "")
    skip_mh = fault == "skip-mh"

    if is_prior:
        params = model.params
        hyper = HyperState(lam=params.lam, alpha=1.0 / params.lam)
        adaptive_lam = model.lambda_mode == "adaptive"
        sample_g2 = False
        shape = (params.rows, params.cols)
        y = mask = None
    else:
        hyper = replace(model.hyper)
        adaptive_lam = model.lambda_mode == "adaptive"
        sample_g2 = not hyper.gamma2_fixed
        y = model.y
        mask = model.mask if is_complete else None
        shape = y.shape

    # internal orientation: rows <= cols
    transposed = shape[0] > shape[1]
    if transposed:
        y = y.T if y is not None else None
        mask = mask.T if mask is not None else None
        shape = (shape[1], shape[0])
    n, m = shape

    state = _init_state(cfg, kernel, is_prior, y, mask, n, m, rng, hyper,
                        params if is_prior else None)
    state.skip_mh = skip_mh

    n_draws = (cfg.iterations - cfg.burn_in) // cfg.thinning
    draws = np.empty((n_draws, *((m, n) if transposed else (n, m))))
    names = ["nuclear_norm", "delta", "accepted", "log_post", "lam", "gamma2"]
    traces = {nm_: np.empty(cfg.iterations) for nm_ in names}
    kept = 0
    g2_step = 0.5
    g2_attempts = 0
    # the step size frozen at the end of burn-in is averaged (in log) over
    # the last half of burn-in, which removes the freeze-point noise of the
    # stochastic approximation
    avg_from = cfg.burn_in - cfg.burn_in // 2
    log_delta_sum, log_delta_n = 0.0, 0

    for t in range(1, cfg.iterations + 1):
        adapt = t <= cfg.burn_in or not cfg.adapt_during_burn_in_only
        state.iteration = t

        if kernel == "prox":
            if is_prior:
                lam_params = NndParams(hyper.lam, n, m) if adaptive_lam else \
                    NndParams(params.lam, n, m)
                _, accepted = prox_langevin_prior_step(state, lam_params, rng)
            elif is_denoise:
                _, accepted = prox_langevin_denoise_step(state, y, hyper, rng)
            else:
                _, accepted = prox_grad_completion_step(state, y, mask, hyper, rng)
            if adapt:
                state.delta = robbins_monro_update(state.delta,
                                                   state.last_accept_prob, t, cfg)
                if t > avg_from:
                    log_delta_sum += math.log(state.delta)
                    log_delta_n += 1
                if t == cfg.burn_in and cfg.adapt_during_burn_in_only and log_delta_n:
                    state.delta = math.exp(log_delta_sum / log_delta_n)
            acc_value = float(accepted)
            x_now = state.x
            nn_now = state._nn
        else:
            if is_prior:
                lam_s = hyper.lam if adaptive_lam else params.lam
                acc = sv_coordinate_mala_sweep(
                    state.log_sigma, state.sigma_steps, state.sigma_counts,
                    lam_s, rng, mn_gap=m - n, adapt=adapt,
                    target=cfg.target_acceptance, rm_gain=cfg.rm_gain,
                    rm_decay=cfg.rm_decay)
                state.accept_counts["sigma"] = state.accept_counts.get("sigma", 0) + acc
                state.attempt_counts["sigma"] = state.attempt_counts.get("sigma", 0) + n
                acc_value = acc / n
                x_now = None
                nn_now = float(state.sigma.sum())
            else:
                _, acc_value = svd_gibbs_step(state, y, hyper, rng, cfg, adapt)
                x_now = state.current_matrix()
                nn_now = float(state.sigma.sum())
            if t == cfg.burn_in and cfg.adapt_during_burn_in_only:
                _freeze_imh(state)

        if sample_g2:
            if x_now is None:
                x_now = state.current_matrix()
            hyper, g2_ok = gamma2_update(hyper, x_now, y, mask, rng, g2_step)
            g2_attempts += 1
            state.tally("gamma2", g2_ok)
            if adapt:
                eta = cfg.rm_gain / g2_attempts ** cfg.rm_decay
                g2_step = min(max(g2_step * math.exp(eta * (float(g2_ok) - TARGET_ACCEPT_SCALAR)),
                                  1e-6), 1e3)
            state.invalidate()

        if adaptive_lam:
            hyper = lambda_gibbs_update(hyper, nn_now, n, m, rng)
            state.invalidate()

        lam_now = hyper.lam if (adaptive_lam or not is_prior) else params.lam
        traces["nuclear_norm"][t - 1] = nn_now
        traces["delta"][t - 1] = state.delta if kernel == "prox" else \
            float(np.exp(np.mean(np.log(state.sigma_steps))))
        traces["accepted"][t - 1] = acc_value
        traces["lam"][t - 1] = lam_now
        traces["gamma2"][t - 1] = hyper.gamma2
        if is_prior:
            lp = n * m * math.log(lam_now) - lam_now * nn_now
        else:
            if x_now is None:
                x_now = state.current_matrix()
            lik = _denoise_log_target(x_now, y, hyper) if is_denoise else \
                _completion_log_target(x_now, y, mask, hyper)
            if hyper.lam > 0:
                lik += n * m * math.log(hyper.lam / math.sqrt(hyper.gamma2))
            lp = lik
        traces["log_post"][t - 1] = lp

        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thinning == 0 and kept < n_draws:
            draw = _emit_draw(state, kernel, is_prior, n, m, rng)
            draws[kept] = draw.T if transposed else draw
            kept += 1

    rates = {k: state.accept_counts[k] / state.attempt_counts[k]
             for k in state.attempt_counts if state.attempt_counts[k]}
    return ChainOutput(draws=draws[:kept], traces=traces, acceptance_rates=rates,
                       wall_time=time.perf_counter() - t_start)


def _init_state(cfg, kernel, is_prior, y, mask, n, m, rng, hyper, params):
    if kernel == "prox":
        if is_prior:
            x0 = rng.standard_normal((n, m)) / (params.lam * math.sqrt(n * m))
        elif mask is not None:
            # hidden entries start at the observed mean: the chain only has
            # to travel the structure, not the whole offset
            fill = float(y[mask == 1.0].mean())
            x0 = mask * y + (1.0 - mask) * fill
        else:
            x0 = y.copy()
        return ChainState(delta=cfg.initial_delta, x=x0)
    if is_prior:
        lam = params.lam
        ell0 = np.log((np.arange(1, n + 1) * (m / lam)) / (n + 1))
        u0 = np.eye(1)  # placeholder; frames are drawn fresh at emission
        state = ChainState(delta=cfg.initial_delta, u=u0, log_sigma=ell0,
                           v=np.eye(1))
    else:
        u0, s0, v0 = svd(y)
        state = ChainState(delta=cfg.initial_delta, u=u0,
                           log_sigma=np.log(np.maximum(s0, 1e-3)), v=v0)
    k = state.log_sigma.size
    state.sigma_steps = np.full(k, min(cfg.initial_delta, 0.25))
    state.sigma_counts = np.zeros(k)
    return state


def _freeze_imh(state):
    for side in ("u", "v"):
        key = f"imh_{side}"
        att = state.attempt_counts.get(key, 0)
        if att and state.accept_counts.get(key, 0) / att < _IMH_MIN_ACCEPT:
            state.imh_enabled[side] = False


def _emit_draw(state, kernel, is_prior, n, m, rng):
    if kernel == "prox":
        return state.x.copy()
    sig = np.sort(state.sigma)[::-1]
    if is_prior:
        u = sample_haar_orthogonal(n, rng)
        v = sample_uniform_stiefel(n, m, rng)
        return (u * sig) @ v.T
    u, sig, v = canonicalize_svd_state(state.u.copy(), state.sigma, state.v.copy())
    return (u * sig) @ v.T
