"""Distribution-law validation battery.

Four seeded checks against closed-form laws: the Gamma law of the nuclear
norm under both sampling routes, orthogonal invariance of a fixed linear
functional, the Laplace reduction of the 1-by-1 matrix law, and the Bessel
density of the 1-by-1 normal product. Each check reports a statistic and a
pass flag; the battery is deliberately sensitive enough to catch a missing
Metropolis-Hastings correction (see the fault-injection hook in
:mod:`nnd.samplers`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as _chi2

from .diagnostics import ess, ks_statistic, two_sample_ks
from .distributions import (
    NndParams,
    NpParams,
    gamma_cdf,
    laplace_cdf,
    np_1x1_density,
    sample_haar_orthogonal,
)
from .models import PriorModel
from .samplers import ChainConfig, run_chain

KS_LEVEL = 0.01
CHI2_LEVEL = 0.01
INVARIANCE_D_MAX = 0.02


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    statistic: float
    p_value: float | None
    detail: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        p = f" p={self.p_value:.4f}" if self.p_value is not None else ""
        return f"[{tag}] {self.name}: stat={self.statistic:.5f}{p} ({self.detail})"


def effective_prior_norms(params: NndParams, n_target: int, seed: int,
                          kernel: str = "prox", stride_factor: float = 3.0,
                          max_rounds: int = 4):
    """Nuclear norms of approximately independent prior draws.

    Runs the prior chain, estimates the integrated autocorrelation time of
    the nuclear-norm trace, and thins at ``stride_factor`` times it, growing
    the run until ``n_target`` thinned values are available. Returns the
    thinned norms; the count is the effective sample size claimed.
    """
    iterations = max(6 * n_target, 20000)
    for _ in range(max_rounds):
        cfg = ChainConfig(iterations=iterations + 2000, burn_in=2000, seed=seed)
        out = run_chain(PriorModel(params), cfg, kernel=kernel)
        nn = out.traces["nuclear_norm"][cfg.burn_in:]
        e = ess(nn).ess
        stride = max(1, math.ceil(stride_factor * nn.size / max(e, 1.0)))
        thinned = nn[::stride]
        if thinned.size >= n_target:
            return thinned[:max(n_target, 1)]
        iterations = int(iterations * max(1.5, 1.2 * n_target / max(thinned.size, 1)))
    return thinned


def check_gamma_law(rows: int, cols: int, lam: float, n_draws: int, seed: int,
                    kernel: str) -> CheckResult:
    norms = effective_prior_norms(NndParams(lam, rows, cols), n_draws, seed, kernel)
    d, p = ks_statistic(norms, lambda q: gamma_cdf(q, rows * cols, lam))
    return CheckResult(
        name=f"gamma-law-{kernel}", passed=p > KS_LEVEL, statistic=d, p_value=p,
        detail=f"nuclear norms of {norms.size} effective draws vs "
               f"Gamma({rows * cols}, {lam:g})")


def check_orthogonal_invariance(rows: int, cols: int, lam: float, n_draws: int,
                                seed: int) -> CheckResult:
    params = NndParams(lam, rows, cols)
    norms_needed = 2 * n_draws
    cfg = ChainConfig(iterations=6 * norms_needed + 2000, burn_in=2000,
                      thinning=3, seed=seed)
    draws = _svd_route_draws(params, cfg, norms_needed)
    rng = np.random.default_rng(seed + 1)
    p_mat = sample_haar_orthogonal(rows, rng)
    q_mat = sample_haar_orthogonal(cols, rng)
    probe = rng.standard_normal((rows, cols))
    half = draws.shape[0] // 2
    a = np.einsum("ij,kij->k", probe, draws[:half])
    b = np.einsum("ij,kij->k", probe, p_mat @ draws[half:2 * half] @ q_mat)
    d, p = two_sample_ks(a, b)
    return CheckResult(
        name="orthogonal-invariance", passed=d < INVARIANCE_D_MAX, statistic=d,
        p_value=p, detail=f"<A,X> vs <A,PXQ>, {half} draws per side, "
                          f"D threshold {INVARIANCE_D_MAX}")


def _svd_route_draws(params: NndParams, cfg: ChainConfig, count: int):
    from .distributions import sample_nnd_via_svd

    draws = sample_nnd_via_svd(params, cfg, np.random.default_rng(cfg.seed))
    return draws[:count] if draws.shape[0] >= count else draws


def check_laplace_1x1(lam: float, n_draws: int, seed: int) -> CheckResult:
    norms = effective_prior_norms(NndParams(lam, 1, 1), n_draws, seed, "prox")
    # the nuclear norm of a 1x1 matrix is |x|; under the matrix law |x| is
    # Exponential(lam), the folded form of the Laplace reduction
    d, p = ks_statistic(norms, lambda q: 1.0 - np.exp(-lam * np.maximum(q, 0.0)))
    return CheckResult(
        name="laplace-1x1", passed=p > KS_LEVEL, statistic=d, p_value=p,
        detail=f"|x| of {norms.size} effective draws vs Exponential({lam:g})")


def laplace_signed_check(lam: float, n_draws: int, seed: int) -> CheckResult:
    """Signed 1-by-1 draws against the two-sided Laplace CDF."""
    params = NndParams(lam, 1, 1)
    cfg = ChainConfig(iterations=8 * n_draws + 2000, burn_in=2000, thinning=4,
                      seed=seed)
    out = run_chain(PriorModel(params), cfg, kernel="prox")
    vals = out.draws[:, 0, 0]
    d, p = ks_statistic(vals, lambda q: laplace_cdf(q, lam))
    return CheckResult(
        name="laplace-1x1-signed", passed=p > KS_LEVEL, statistic=d, p_value=p,
        detail=f"{vals.size} thinned draws vs Laplace({lam:g})")


_K0_BIN_EDGES = np.array([-np.inf, -3.0, -2.0, -1.5, -1.0, -0.6, -0.3, -0.1,
                          0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0, np.inf])


def _k0_cell_masses(sigma2: float = 1.0):
    from scipy.integrate import quad

    def dens(z):
        return np_1x1_density(z, sigma2)

    masses = []
    for a, b in zip(_K0_BIN_EDGES[:-1], _K0_BIN_EDGES[1:]):
        lo = -40.0 * sigma2 if a == -np.inf else a
        hi = 40.0 * sigma2 if b == np.inf else b
        pts = [0.0] if lo < 0.0 < hi else None
        val, _ = quad(dens, lo, hi, points=pts, limit=300)
        masses.append(val)
    return np.array(masses)


def check_np_1x1_bessel(n_draws: int, seed: int, sigma2: float = 1.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    count = max(n_draws, 20000)
    z = (math.sqrt(sigma2) * rng.standard_normal(count)) * \
        (math.sqrt(sigma2) * rng.standard_normal(count))
    observed, _ = np.histogram(z, bins=_K0_BIN_EDGES)
    expected = _k0_cell_masses(sigma2) * count
    stat = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(observed) - 1
    p = float(_chi2.sf(stat, dof))
    return CheckResult(
        name="np-1x1-bessel", passed=p > CHI2_LEVEL, statistic=stat, p_value=p,
        detail=f"binned chi^2 vs K0 density, {count} products, dof={dof}")


def run_battery(rows: int, cols: int, lam: float, n_draws: int, seed: int):
    """All checks at the given size; returns the list of results."""
    results = [
        check_gamma_law(rows, cols, lam, n_draws, seed, "svd"),
        check_gamma_law(rows, cols, lam, n_draws, seed + 10, "prox"),
        check_orthogonal_invariance(rows, cols, lam, min(n_draws, 10000), seed + 20),
        check_laplace_1x1(lam, n_draws, seed + 30),
        check_np_1x1_bessel(n_draws, seed + 40),
    ]
    return results
