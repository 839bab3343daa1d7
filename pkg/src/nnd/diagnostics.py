"""Chain and distribution diagnostics: ESS, goodness of fit, spectral comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import gamma_cdf, np_limit_eigenvalue_radial_cdf
from .linalg import as_matrix


@dataclass(frozen=True)
class EssReport:
    """Effective sample size of one scalar trace."""

    ess: float
    n_samples: int
    autocorr_cutoff_lag: int
    method: str = "geyer-initial-monotone"

    def as_dict(self) -> dict:
        return {"ess": self.ess, "n_samples": self.n_samples,
                "autocorr_cutoff_lag": self.autocorr_cutoff_lag, "method": self.method}


def ess(trace) -> EssReport:
    """Effective sample size via Geyer's initial monotone positive sequence.

    ESS = N / (1 + 2 sum rho_k); consecutive autocorrelation pairs
    Gamma_k = rho_2k + rho_2k+1 are summed up to the first non-positive
    pair and forced non-increasing, which is consistent for reversible
    chains. The result is clamped to (0, N]. Traces shorter than 10 or
    exactly constant are rejected.
    """
    x = np.asarray(trace, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError(f"trace too short for an ESS estimate: {n} < 10")
    x = x - x.mean()
    var0 = float(np.dot(x, x)) / n
    if var0 == 0.0:
        raise ValueError("constant trace: autocorrelation is undefined")
    # autocovariance by FFT, biased normalization (divides by n)
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    npairs = n // 2
    gamma = rho[0:2 * npairs:2] + rho[1:2 * npairs:2]
    nonpos = np.nonzero(gamma <= 0.0)[0]
    cut = int(nonpos[0]) if nonpos.size else npairs
    head = np.minimum.accumulate(gamma[:cut]) if cut else gamma[:0]
    tau = max(2.0 * float(head.sum()) - 1.0, 1.0 / n)
    value = min(n / tau, float(n))
    return EssReport(ess=value, n_samples=n, autocorr_cutoff_lag=2 * cut)


def _kolmogorov_sf(t: float) -> float:
    """Survival function of the Kolmogorov statistic (asymptotic series)."""
    if t < 1.1e-16:
        return 1.0
    total, sign, k = 0.0, 1.0, 1
    while True:
        term = math.exp(-2.0 * k * k * t * t)
        total += sign * term
        if term < 1e-16 * max(total, 1e-300) or k > 200:
            break
        sign = -sign
        k += 1
    return max(min(2.0 * total, 1.0), 0.0)


def ks_statistic(sample, cdf):
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    ``cdf`` maps values to [0, 1]; the sample need not be pre-sorted.
    Returns ``(D, approx_p)`` with the usual small-sample correction
    sqrt(n) + 0.12 + 0.11/sqrt(n) in the p-value.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    u = np.asarray(cdf(x), dtype=float)
    d_plus = float(np.max(np.arange(1, n + 1) / n - u))
    d_minus = float(np.max(u - np.arange(0, n) / n))
    d = max(d_plus, d_minus)
    rn = math.sqrt(n)
    return d, _kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)


def two_sample_ks(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / na
    cdf_b = np.searchsorted(b, pooled, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(na * nb / (na + nb))
    return d, _kolmogorov_sf((en + 0.12 + 0.11 / en) * d)


def wasserstein_1d(a, b) -> float:
    """First Wasserstein distance between two one-dimensional samples.

    Mean absolute difference of matched order statistics; unequal lengths
    are matched through quantile interpolation.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    grid = (np.arange(1, 2 * max(a.size, b.size) + 1) - 0.5) / (2 * max(a.size, b.size))
    qa = np.quantile(a, grid)
    qb = np.quantile(b, grid)
    return float(np.mean(np.abs(qa - qb)))


@dataclass(frozen=True)
class SpectralReport:
    """Spectral comparison of two matrix samples (see :func:`spectral_compare`)."""

    sv_wasserstein: float
    nn_two_sample: tuple[float, float]
    nn_vs_gamma_a: tuple[float, float]
    nn_vs_gamma_b: tuple[float, float]
    eig_radial_ks_a: float | None
    eig_radial_ks_b: float | None
    n_draws: tuple[int, int]

    def as_dict(self) -> dict:
        return {
            "sv_wasserstein": self.sv_wasserstein,
            "nn_two_sample": list(self.nn_two_sample),
            "nn_vs_gamma_a": list(self.nn_vs_gamma_a),
            "nn_vs_gamma_b": list(self.nn_vs_gamma_b),
            "eig_radial_ks_a": self.eig_radial_ks_a,
            "eig_radial_ks_b": self.eig_radial_ks_b,
            "n_draws": list(self.n_draws),
        }


def _pooled_singular_values(draws, rescale):
    svals = [np.linalg.svd(x, compute_uv=False) for x in draws]
    return np.concatenate(svals) * rescale


def _eig_radial_ks(draws, rescale):
    mods = [np.abs(np.linalg.eigvals(x)) * rescale for x in draws]
    d, _ = ks_statistic(np.clip(np.concatenate(mods), 0.0, 1.0),
                        np.vectorize(np_limit_eigenvalue_radial_cdf))
    return d


def spectral_compare(draws_a, draws_b, lam: float = 1.0, rescale: bool = True,
                     eigenvalues: bool = False) -> SpectralReport:
    """Compare the spectra of two sequences of equally shaped matrix draws.

    Pools singular values from each source (rescaled by 1/n when
    ``rescale``), reports their Wasserstein distance, the two-sample KS of
    the nuclear norms, and each source's one-sample KS against the
    Gamma(nm, lam) law of the nuclear norm. With ``eigenvalues`` set (square
    draws only) also reports the KS distance of eigenvalue moduli of the
    1/n-scaled draws against the limiting radial law. Symmetric statistics
    are symmetric in the two arguments.
    """
    a0 = as_matrix(draws_a[0], "draws_a[0]")
    n, m = a0.shape
    for name, seq in (("draws_a", draws_a), ("draws_b", draws_b)):
        for x in seq:
            if x.shape != (n, m):
                raise ValueError(f"{name} contains a draw of shape {x.shape}, "
                                 f"expected {(n, m)}")
    scale = 1.0 / n if rescale else 1.0
    sv_a = _pooled_singular_values(draws_a, scale)
    sv_b = _pooled_singular_values(draws_b, scale)
    nn_a = np.array([float(np.linalg.svd(x, compute_uv=False).sum()) for x in draws_a])
    nn_b = np.array([float(np.linalg.svd(x, compute_uv=False).sum()) for x in draws_b])
    gamma_fit = lambda s: gamma_cdf(s, n * m, lam)  # noqa: E731
    report = SpectralReport(
        sv_wasserstein=wasserstein_1d(sv_a, sv_b),
        nn_two_sample=two_sample_ks(nn_a, nn_b),
        nn_vs_gamma_a=ks_statistic(nn_a, gamma_fit),
        nn_vs_gamma_b=ks_statistic(nn_b, gamma_fit),
        eig_radial_ks_a=_eig_radial_ks(draws_a, 1.0 / n) if eigenvalues and n == m else None,
        eig_radial_ks_b=_eig_radial_ks(draws_b, 1.0 / n) if eigenvalues and n == m else None,
        n_draws=(len(draws_a), len(draws_b)),
    )
    return report
