"""Densities, exact samplers, and limit laws for the nuclear norm family.

Covers the matrix density proportional to exp(-lambda ||X||_*), its
singular-value factorization (uniform singular vectors, coupled singular
values), the normal-product approximation NP(sigma^2) with its small-scale
asymptotic density and large-n spectral limits, plus the scalar
distribution utilities the hyperparameter updates rely on.

Conventions: matrices are n-by-m with k = min(n, m) singular values;
wide/tall inputs are transposed internally so the k-vector convention is
uniform. The normalizing constant of the matrix density is known only up
to a lambda-independent factor, so log-densities are "unnormalized": exact
up to one additive constant that cancels in every ratio computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import gammainc, gammaln

from .linalg import as_matrix, nuclear_norm


@dataclass(frozen=True)
class NndParams:
    """Parameters of the matrix density proportional to exp(-lam ||X||_*)."""

    lam: float
    rows: int
    cols: int

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive integers")

    @property
    def k(self) -> int:
        return min(self.rows, self.cols)

    @property
    def dim(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class NpParams:
    """Parameters of the normal product law X1 @ X2, iid N(0, sigma2) entries.

    Square shape only; sigma2 = 4/3 is the calibration under which the
    product approximates the nuclear norm law at unit rate.
    """

    sigma2: float
    n: int

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.n < 1:
            raise ValueError("n must be a positive integer")


NP_CALIBRATED_SIGMA2 = 4.0 / 3.0


def nnd_log_density_unnorm(x, params: NndParams) -> float:
    """nm * log(lam) - lam * ||x||_*, the log-density up to one constant.

    The omitted additive constant does not depend on lam or x, so ratios
    across states and across lam values are exact.
    """
    x = as_matrix(x)
    if x.shape != (params.rows, params.cols):
        raise ValueError(f"shape mismatch: x is {x.shape}, params say "
                         f"({params.rows}, {params.cols})")
    return params.dim * math.log(params.lam) - params.lam * nuclear_norm(x)


def singular_value_log_density_unnorm(s, params: NndParams) -> float:
    """Unnormalized log-density of the singular-value vector.

    With n <= m enforced internally, equals
    ``-lam * sum(s) + (m - n) * sum(log s) + sum_{i<j} log |s_i^2 - s_j^2|``.
    Returns -inf for negative entries, for zero entries when m > n, and for
    coincident entries; symmetric under permutation of ``s``.
    """
    s = np.asarray(s, dtype=float).ravel()
    n, m = sorted((params.rows, params.cols))
    if s.size != n:
        raise ValueError(f"expected {n} singular values, got {s.size}")
    if np.any(s < 0):
        return -math.inf
    gap = m - n
    if gap > 0 and np.any(s == 0):
        return -math.inf
    val = -params.lam * float(s.sum())
    if gap > 0:
        val += gap * float(np.log(s).sum())
    if n > 1:
        sq = s * s
        diff = np.abs(sq[:, None] - sq[None, :])[np.triu_indices(n, k=1)]
        if np.any(diff == 0.0):
            return -math.inf
        val += float(np.log(diff).sum())
    return val


# ---------------------------------------------------------------------------
# Uniform frames
# ---------------------------------------------------------------------------


def sample_haar_orthogonal(n: int, rng) -> np.ndarray:
    """Rotation-invariant random n-by-n orthogonal matrix.

    QR of an iid standard normal matrix with the sign of each diagonal entry
    of R folded into the corresponding column of Q; without the sign fix the
    QR output is not uniform. Sign zero maps to +1.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)


def sample_uniform_stiefel(n: int, m: int, rng) -> np.ndarray:
    """Uniform m-by-n frame with orthonormal columns, n <= m."""
    if n > m:
        raise ValueError(f"need n <= m for a Stiefel frame, got n={n}, m={m}")
    if n < 1:
        raise ValueError("n must be a positive integer")
    q, r = np.linalg.qr(rng.standard_normal((m, n)))
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)


# ---------------------------------------------------------------------------
# Singular-value chain and the SVD-route matrix sampler
# ---------------------------------------------------------------------------


def sv_coordinate_mala_sweep(ell, step, counts, lam, rng, *, gamma2=None, anchor=None,
                             mn_gap=0, adapt=False, target=0.574, rm_gain=1.0,
                             rm_decay=0.6, step_cap=25.0):
    """One random-scan sweep of per-coordinate MALA moves on log singular values.

    Targets the singular-value density (plus the Gaussian tying term
    ``-(sigma - anchor)^2 / (2 gamma2)`` when ``gamma2`` is given) in the
    coordinates ell = log sigma, with the log-transform Jacobian included.
    Per-coordinate step sizes in ``step`` are Robbins-Monro adapted toward
    ``target`` while ``adapt`` is set; ``counts`` holds per-coordinate
    update counters. Coordinate-wise moves keep acceptance healthy despite
    the repulsion walls between neighboring values, where a joint isotropic
    proposal would need a vanishing step. Returns the number of accepted
    moves; mutates ell, step, counts.
    """
    k = ell.size
    sig = np.exp(ell)
    sq = sig * sig
    idx = np.arange(k)
    accepted = 0

    def grad_and_logp(i, s_i, e_i):
        g = -lam
        lp = -lam * s_i + (mn_gap + 1) * e_i
        if gamma2 is not None:
            g += -(s_i - anchor[i]) / gamma2
            lp += -(s_i - anchor[i]) ** 2 / (2.0 * gamma2)
        if mn_gap:
            g += mn_gap / s_i
        if k > 1:
            d = s_i * s_i - sq
            d[i] = 1.0
            if np.any(d[idx != i] == 0.0):
                return None, -math.inf
            g += float(np.sum(np.where(idx != i, 2.0 * s_i / d, 0.0)))
            lp += float(np.sum(np.where(idx != i, np.log(np.abs(d)), 0.0)))
        return g * s_i + 1.0, lp

    for i in rng.permutation(k):
        counts[i] += 1
        e_i, s_i = float(ell[i]), float(sig[i])
        g_cur, lp_cur = grad_and_logp(i, s_i, e_i)
        mean_fwd = e_i + 0.5 * step[i] * g_cur
        e_prop = mean_fwd + math.sqrt(step[i]) * rng.standard_normal()
        s_prop = math.exp(e_prop)
        g_prop, lp_prop = grad_and_logp(i, s_prop, e_prop)
        if g_prop is None or not np.isfinite(lp_prop):
            ok, prob = False, 0.0
        else:
            mean_rev = e_prop + 0.5 * step[i] * g_prop
            log_ratio = (lp_prop - lp_cur
                         - (e_i - mean_rev) ** 2 / (2.0 * step[i])
                         + (e_prop - mean_fwd) ** 2 / (2.0 * step[i]))
            ok = math.log(rng.uniform()) < log_ratio
            prob = math.exp(min(log_ratio, 0.0))
        if ok:
            ell[i] = e_prop
            sig[i] = s_prop
            sq[i] = s_prop * s_prop
            accepted += 1
        if adapt:
            # the acceptance probability, not the indicator, drives the
            # stochastic approximation: same fixed point, far less noise
            eta = rm_gain / counts[i] ** rm_decay
            step[i] = min(max(step[i] * math.exp(eta * (prob - target)), 1e-10), step_cap)
    return accepted


def sample_nnd_singular_values(params: NndParams, config, rng=None):
    """MCMC draws of the singular-value vector of the matrix law.

    Runs coordinate-wise MALA in log coordinates (see
    :func:`sv_coordinate_mala_sweep`); after burn-in the sum of each draw is
    Gamma(nm, lam) distributed. Returns an array of shape
    ``(n_draws, min(rows, cols))`` with each draw sorted in descending
    order; ordering is cosmetic, the density is permutation symmetric.
    """
    from .samplers import ChainConfig  # local to avoid an import cycle

    cfg = config if config is not None else ChainConfig()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n, m = sorted((params.rows, params.cols))
    k, gap = n, m - n
    # spread, strictly positive start; exact values are irrelevant
    ell = np.log((np.arange(1, k + 1) * (m / params.lam)) / (k + 1))
    step = np.full(k, cfg.initial_delta if cfg.initial_delta < 25.0 else 0.25)
    counts = np.zeros(k)
    n_draws = (cfg.iterations - cfg.burn_in) // cfg.thinning
    out = np.empty((max(n_draws, 0), k))
    kept = 0
    for t in range(1, cfg.iterations + 1):
        adapt = t <= cfg.burn_in or not cfg.adapt_during_burn_in_only
        sv_coordinate_mala_sweep(ell, step, counts, params.lam, rng, mn_gap=gap,
                                 adapt=adapt, target=cfg.target_acceptance,
                                 rm_gain=cfg.rm_gain, rm_decay=cfg.rm_decay)
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thinning == 0 and kept < n_draws:
            out[kept] = np.sort(np.exp(ell))[::-1]
            kept += 1
    return out[:kept]


def sample_nnd_via_svd(params: NndParams, config, rng=None):
    """Matrix draws assembled as U diag(s) V^T from independent factors.

    Singular values come from :func:`sample_nnd_singular_values`; every
    retained draw gets a fresh uniform orthogonal U and uniform Stiefel V.
    Returns an array of shape ``(n_draws, rows, cols)``.
    """
    from .samplers import ChainConfig

    cfg = config if config is not None else ChainConfig()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    svals = sample_nnd_singular_values(params, cfg, rng)
    n, m = sorted((params.rows, params.cols))
    out = np.empty((svals.shape[0], params.rows, params.cols))
    for i, s in enumerate(svals):
        u = sample_haar_orthogonal(n, rng)
        v = sample_uniform_stiefel(n, m, rng)
        x = (u * s) @ v.T
        out[i] = x if params.rows <= params.cols else x.T
    return out


# ---------------------------------------------------------------------------
# Normal product distribution
# ---------------------------------------------------------------------------


def sample_normal_product(params: NpParams, rng, size=None):
    """Draw X1 @ X2 with iid N(0, sigma2) entries; batched when size given."""
    n = params.n
    sd = math.sqrt(params.sigma2)
    if size is None:
        return (sd * rng.standard_normal((n, n))) @ (sd * rng.standard_normal((n, n)))
    out = np.empty((size, n, n))
    for i in range(size):
        out[i] = (sd * rng.standard_normal((n, n))) @ (sd * rng.standard_normal((n, n)))
    return out


def np_asymptotic_log_density(x, tau: float) -> float:
    """Small-tau log-density asymptotic of the normal product law at x / tau.

    For square x with n > 1 and distinct, strictly positive singular values
    d_i, returns the log of

        n!/(2 pi tau)^(3n^2/4 - n/4)
        * prod_{i<j} (sqrt(d_i/d_j) + sqrt(d_j/d_i))^(-1/2)
        * sqrt( ((1 + sum d_i^-1/2 * sum d_i^1/2)^2 - n^2 sum d_i * sum d_i^-1)
                / prod_{ij} (d_i + d_j) )
        * exp(-||x||_* / tau).

    The Laplace expansion behind the prefactor assumes distinct positive
    singular values; repeated or zero values (and n = 1) raise ValueError.
    The square-root factor is real only where its argument is positive,
    which holds for mildly spread spectra; a non-positive argument raises
    ValueError as well.
    """
    x = as_matrix(x)
    n, m = x.shape
    if n != m:
        raise ValueError(f"x must be square, got {x.shape}")
    if n == 1:
        raise ValueError("n = 1 is outside the expansion's domain; see the "
                         "one-dimensional analogue np_asymptotic_log_density_1x1")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    d = np.linalg.svd(x, compute_uv=False)
    if np.any(d <= 0.0) or np.unique(d).size != n:
        raise ValueError("singular values must be strictly positive and distinct")
    rt = np.sqrt(d)
    log_pref = gammaln(n + 1) - (0.75 * n * n - 0.25 * n) * math.log(2.0 * math.pi * tau)
    ratio = rt[:, None] / rt[None, :]
    pair = (ratio + 1.0 / ratio)[np.triu_indices(n, k=1)]
    log_pref -= 0.5 * float(np.log(pair).sum())
    vol_arg = (1.0 + float((1.0 / rt).sum()) * float(rt.sum())) ** 2 \
        - n * n * float(d.sum()) * float((1.0 / d).sum())
    if vol_arg <= 0.0:
        raise ValueError("spectrum too spread: the closed-form prefactor's "
                         "square-root argument is non-positive")
    log_pref += 0.5 * (math.log(vol_arg) - float(np.log(d[:, None] + d[None, :]).sum()))
    return log_pref - float(d.sum()) / tau


def np_asymptotic_log_density_1x1(z: float) -> float:
    """One-dimensional analogue: log of exp(-z)/sqrt(2 pi z) for z > 0."""
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    return -z - 0.5 * math.log(2.0 * math.pi * z)


def np_1x1_density(z: float, sigma2: float = 1.0) -> float:
    """Exact density of the scalar product of two centered normals.

    Equals K0(|z| / sigma2) / (pi sigma2), with the Bessel factor evaluated
    by quadrature (:func:`bessel_k0`); diverges logarithmically at z = 0.
    """
    if z == 0.0:
        return math.inf
    return bessel_k0(abs(z) / sigma2) / (math.pi * sigma2)


def bessel_k0(z: float) -> float:
    """K0(z) for z > 0 via adaptive quadrature of its integral representation.

    K0(z) = integral_0^inf exp(-z cosh t) dt; no special-function table is
    relied on, which keeps this usable as an independent oracle. The upper
    limit 45 is exact at double precision for z >= 1e-18 (the integrand has
    already underflowed to zero there).
    """
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")

    # factor out exp(-z) so the quadrature works on an O(1) integrand and
    # keeps relative accuracy for large z; cosh t - 1 = 2 sinh^2(t/2)
    def integrand(t):
        arg = 2.0 * z * math.sinh(0.5 * t) ** 2
        return math.exp(-arg) if arg < 745.0 else 0.0

    val, _ = quad(integrand, 0.0, 45.0, limit=200, epsabs=1e-14, epsrel=1e-12)
    return math.exp(-z) * val if z < 700.0 else 0.0


# ---------------------------------------------------------------------------
# Large-n spectral limits of the normal product
# ---------------------------------------------------------------------------


def np_limit_eigenvalue_density(z_modulus: float) -> float:
    """Limiting eigenvalue density shape 1/(pi |z|) on the unit disk.

    Density of the complex eigenvalues of X1 X2 / n in the large-n limit,
    as a function of |z|; zero outside the closed unit disk. Note the
    radial mass element is 2 pi r * rho = 2, so the normalized radial law
    of |z| is uniform on [0, 1] (see
    :func:`np_limit_eigenvalue_radial_cdf`). z = 0 is a non-integrable
    point of the shape function and raises ValueError; integrate in radial
    coordinates instead.
    """
    if z_modulus < 0:
        raise ValueError("modulus must be non-negative")
    if z_modulus == 0.0:
        raise ValueError("density diverges at z = 0; use radial coordinates")
    if z_modulus > 1.0:
        return 0.0
    return 1.0 / (math.pi * z_modulus)


def np_limit_eigenvalue_radial_cdf(r: float) -> float:
    """CDF of the eigenvalue modulus under the limiting law: r on [0, 1]."""
    return min(max(r, 0.0), 1.0)


#: Scale above which the squared-singular-value limit density vanishes.
_SV_EDGE_BRACKET = (1e-9, 100.0)


def np_limit_squared_sv_discriminant(lam: float) -> float:
    """Discriminant of the limit law's resolvent cubic at scale ``lam``.

    The Stieltjes transform G of the limiting squared-singular-value law of
    X1 X2 / n satisfies lam^2 G^3 - lam G + 1 = 0; its discriminant
    lam^4 (4 lam - 27) changes sign exactly at the spectral edge, where the
    complex-conjugate root pair (whose imaginary part carries the density)
    merges into the real axis.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    return -4.0 * lam ** 2 * (-lam) ** 3 - 27.0 * lam ** 4


def np_limit_squared_sv_edge() -> float:
    """Upper support edge of the squared-singular-value limit, by bisection."""
    return float(brentq(np_limit_squared_sv_discriminant, *_SV_EDGE_BRACKET,
                        xtol=1e-12, rtol=1e-15))


def np_limit_squared_sv_density(lam: float) -> float:
    """Limiting density of the squared singular values of X1 X2 / n.

    The density is pi^-1 times the imaginary part of the Stieltjes
    transform on the real axis; eliminating the real part from the
    resolvent cubic (see :func:`np_limit_squared_sv_discriminant`) leaves

        64 B^3 + 96 lam B^2 + 36 lam^2 B + lam^2 (4 lam - 27) = 0,

    with B = (lam pi rho)^2. Inside the support the positive root is
    unique and is found by a bracketed root-finder to 1e-12; outside the
    support (and at the edge, continuously) the density is zero. Diverges
    like lam^(-2/3) at zero, integrates to one over the support.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    const = lam * lam * (4.0 * lam - 27.0)
    if const >= 0.0:
        return 0.0

    def cubic(b):
        return 64.0 * b ** 3 + 96.0 * lam * b ** 2 + 36.0 * lam ** 2 * b + const

    hi = 27.0 / 64.0  # cubic(hi) >= 27/4 (27/4 + lam(...)) > 0 for lam in support
    while cubic(hi) <= 0.0:
        hi *= 2.0
    b = brentq(cubic, 0.0, hi, xtol=1e-12, rtol=1e-15)
    return math.sqrt(b) / (math.pi * lam)


# ---------------------------------------------------------------------------
# Scalar distribution bundle
# ---------------------------------------------------------------------------


def sample_gamma(shape: float, rate: float, rng, size=None):
    """Gamma draw(s) with shape/rate parameterization (mean shape/rate)."""
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_inverse_gamma(shape: float, scale: float, rng, size=None):
    """Inverse-Gamma draw(s) with density proportional to z^(-shape-1) e^(-scale/z)."""
    if shape <= 0 or scale <= 0:
        raise ValueError("shape and scale must be positive")
    return scale / rng.gamma(shape, 1.0, size=size)


def gamma_cdf(x, shape: float, rate: float):
    """CDF of the Gamma(shape, rate) distribution."""
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    return gammainc(shape, np.asarray(x, dtype=float) * rate)


def laplace_cdf(x, rate: float):
    """CDF of the symmetric Laplace law with density rate/2 * exp(-rate |x|)."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(rate * x), 1.0 - 0.5 * np.exp(-rate * x))
