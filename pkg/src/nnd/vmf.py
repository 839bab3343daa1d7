"""von Mises-Fisher sampling on spheres and orthonormal-frame manifolds.

Three layers:

* vector vMF on the unit sphere of R^p (Wood's envelope rejection for the
  cosine against the mean direction);
* Gibbs sweeps for the matrix vMF density exp(tr(F^T U)) on O(n) and on
  Stiefel frames, each column (or column pair, in the square case) drawn
  exactly from its conditional;
* a sequential column-by-column proposal whose importance weight is known
  in closed form, giving an independence Metropolis-Hastings refresh used
  inside posterior chains.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, hyp0f1, ive

from .exceptions import SamplingError
from .linalg import as_matrix

# Retry budget for the Wood envelope rejection scheme.
VMF_REJECTION_BUDGET = 10 ** 6

# Above this von Mises concentration a normal approximation is used for the
# O(2) angle draw (generator accuracy degrades for extreme kappa).
_VONMISES_KAPPA_MAX = 5.0e5


def sample_vmf_cosine(dim: int, kappa: float, rng, budget: int = VMF_REJECTION_BUDGET) -> float:
    """Cosine of the angle to the mean direction for a vMF draw on S^{dim-1}.

    ``dim`` is the ambient dimension p >= 2. Uses Wood's beta-envelope
    rejection scheme; raises :class:`SamplingError` if the retry budget is
    exhausted.
    """
    if dim < 2:
        raise ValueError("sample_vmf_cosine needs ambient dimension >= 2")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    pm1 = dim - 1
    if kappa == 0.0:
        return 2.0 * rng.beta(pm1 / 2.0, pm1 / 2.0) - 1.0
    b = pm1 / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + pm1 * pm1))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + pm1 * math.log(1.0 - x0 * x0)
    for _ in range(budget):
        z = rng.beta(pm1 / 2.0, pm1 / 2.0)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        if kappa * w + pm1 * math.log1p(-x0 * w) - c >= math.log(rng.uniform()):
            return float(w)
    raise SamplingError(
        f"vector vMF rejection budget ({budget}) exceeded at kappa={kappa:.3e}, dim={dim}"
    )


def _pm_one(log_odds_half: float, rng) -> float:
    """Draw from {+1, -1} with P(+1) proportional to exp(+log_odds_half)."""
    p_plus = 1.0 / (1.0 + math.exp(-2.0 * log_odds_half))
    return 1.0 if rng.uniform() < p_plus else -1.0


def sample_vmf_sphere(direction, rng, budget: int = VMF_REJECTION_BUDGET) -> np.ndarray:
    """Unit vector with density proportional to exp(direction . z) on the sphere.

    ``direction`` is the natural parameter kappa * mu; kappa = 0 yields a
    uniform sphere draw. The one-dimensional sphere {+1, -1} is handled
    exactly.
    """
    d = np.asarray(direction, dtype=float).ravel()
    p = d.size
    kappa = float(np.linalg.norm(d))
    if p == 1:
        return np.array([_pm_one(float(d[0]), rng)])
    if kappa == 0.0:
        g = rng.standard_normal(p)
        return g / np.linalg.norm(g)
    mu = d / kappa
    w = sample_vmf_cosine(p, kappa, rng, budget)
    g = rng.standard_normal(p)
    t = g - np.dot(mu, g) * mu
    nt = np.linalg.norm(t)
    if nt < 1e-300:
        return mu.copy()
    return w * mu + math.sqrt(max(0.0, 1.0 - w * w)) * (t / nt)


def log_vmf_normalizer(dim: int, kappa: float) -> float:
    """log of the mean of exp(kappa mu.z) over the uniform sphere S^{dim-1}.

    Equals log 0F1(dim/2; kappa^2/4); evaluated through the scaled Bessel
    function for large kappa to avoid overflow.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa == 0.0:
        return 0.0
    if kappa < 30.0:
        return math.log(hyp0f1(dim / 2.0, kappa * kappa / 4.0))
    nu = dim / 2.0 - 1.0
    return gammaln(dim / 2.0) + kappa + math.log(ive(nu, kappa)) - nu * math.log(kappa / 2.0)


# ---------------------------------------------------------------------------
# Gibbs sweeps
# ---------------------------------------------------------------------------


def _log_i0(r: float) -> float:
    return math.log(max(ive(0, r), 1e-300)) + r


def _o2_exact_draw(g, rng) -> np.ndarray:
    """Exact draw from density exp(tr(g^T Z)) on O(2).

    O(2) splits into rotations and reflections; on each component the trace
    is a cosine in the angle, giving a two-component von Mises mixture with
    Bessel-ratio weights.
    """
    a = g[0, 0] + g[1, 1]
    b = g[1, 0] - g[0, 1]
    r_rot = math.hypot(a, b)
    phi_rot = math.atan2(b, a)
    c = g[0, 0] - g[1, 1]
    d = g[0, 1] + g[1, 0]
    r_ref = math.hypot(c, d)
    phi_ref = math.atan2(d, c)
    lw_rot, lw_ref = _log_i0(r_rot), _log_i0(r_ref)
    mx = max(lw_rot, lw_ref)
    p_rot = math.exp(lw_rot - mx) / (math.exp(lw_rot - mx) + math.exp(lw_ref - mx))
    if rng.uniform() < p_rot:
        theta = _von_mises_angle(phi_rot, r_rot, rng)
        ct, st = math.cos(theta), math.sin(theta)
        return np.array([[ct, -st], [st, ct]])
    theta = _von_mises_angle(phi_ref, r_ref, rng)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([[ct, st], [st, -ct]])


def _von_mises_angle(mu: float, kappa: float, rng) -> float:
    if kappa == 0.0:
        return rng.uniform(-math.pi, math.pi)
    if kappa > _VONMISES_KAPPA_MAX:
        return mu + rng.standard_normal() / math.sqrt(kappa)
    return rng.vonmises(mu, kappa)


def pair_gibbs_sweep(u, f, rng) -> None:
    """One random-matching Gibbs sweep over column pairs of a square frame.

    For orthogonal ``u`` the complement of the remaining columns is exactly
    the span of the pair being updated, so each pair conditional is an exact
    O(2) vMF draw. Updates ``u`` in place. A single-column update would only
    flip signs in the square case, hence pairs.
    """
    n = u.shape[0]
    if n == 1:
        u[0, 0] = _pm_one(float(f[0, 0]), rng)
        return
    perm = rng.permutation(n)
    for a in range(0, n - 1, 2):
        cols = (perm[a], perm[a + 1])
        basis = u[:, cols]
        z = _o2_exact_draw(basis.T @ f[:, cols], rng)
        u[:, cols] = basis @ z


def column_gibbs_sweep(v, f, rng, budget: int = VMF_REJECTION_BUDGET) -> None:
    """One Gibbs sweep over the columns of an m-by-k Stiefel frame, m > k.

    Each column given the rest is a vector vMF on the unit sphere of the
    null space of the remaining columns; the draw is assembled without an
    explicit null-space basis by projecting Gaussian noise. In place.
    """
    m, k = v.shape
    for j in range(k):
        rest = np.delete(np.arange(k), j)
        b = v[:, rest]
        fj = f[:, j]
        proj = fj - b @ (b.T @ fj)
        kappa = float(np.linalg.norm(proj))
        pdim = m - k + 1
        g = rng.standard_normal(m)
        g -= b @ (b.T @ g)
        if kappa < 1e-12:
            v[:, j] = g / np.linalg.norm(g)
            continue
        mu = proj / kappa
        w = sample_vmf_cosine(pdim, kappa, rng, budget) if pdim > 1 else _pm_one(kappa, rng)
        if pdim == 1:
            v[:, j] = w * mu
            continue
        g -= np.dot(mu, g) * mu
        ng = np.linalg.norm(g)
        if ng < 1e-300:
            v[:, j] = mu
        else:
            v[:, j] = w * mu + math.sqrt(max(0.0, 1.0 - w * w)) * (g / ng)


# ---------------------------------------------------------------------------
# Sequential proposal and independence refresh
# ---------------------------------------------------------------------------


def _householder_deflate(b, z) -> np.ndarray:
    """Orthonormal basis of span(b) orthogonal to b @ z, for unit z."""
    v = z.copy()
    v[0] += 1.0 if z[0] >= 0 else -1.0
    w = b - (b @ v)[:, None] * (2.0 / np.dot(v, v)) * v[None, :]
    return w[:, 1:]


def sequential_vmf_draw(h, rng, budget: int = VMF_REJECTION_BUDGET):
    """Draw a frame column by column for the density exp(tr(h^T X)).

    ``h`` must be svd-aligned (h = w * d with orthonormal w and the
    concentrations d on the columns). Column j is a vector vMF draw on the
    sphere of the null space of the previous columns. Returns ``(x, logw)``
    where logw is the sum of the log sphere normalizers at the realized
    null-space concentrations; the ratio of the target to the proposal
    density equals exp(logw) up to a constant independent of x.
    """
    m, k = h.shape
    x = np.empty((m, k))
    basis = None  # None stands for the identity
    logw = 0.0
    for j in range(k):
        p = m - j
        g = h[:, j].copy() if basis is None else basis.T @ h[:, j]
        kappa = float(np.linalg.norm(g))
        z = sample_vmf_sphere(g, rng, budget)
        x[:, j] = z if basis is None else basis @ z
        logw += log_vmf_normalizer(p, kappa)
        if j < k - 1:
            basis = _householder_deflate(np.eye(m) if basis is None else basis, z)
    return x, logw


def sequential_vmf_logweight(h, x) -> float:
    """logw of an existing frame ``x`` under the sequential scheme for ``h``."""
    m, k = h.shape
    basis = None
    logw = 0.0
    for j in range(k):
        p = m - j
        g = h[:, j].copy() if basis is None else basis.T @ h[:, j]
        logw += log_vmf_normalizer(p, float(np.linalg.norm(g)))
        if j < k - 1:
            z = x[:, j].copy() if basis is None else basis.T @ x[:, j]
            z /= np.linalg.norm(z)
            basis = _householder_deflate(np.eye(m) if basis is None else basis, z)
    return logw


def matrix_vmf_refresh(f, current, rng):
    """One independence Metropolis-Hastings move for the density exp(tr(f^T U)).

    Proposes from the sequential scheme and accepts with the exact weight
    ratio, so the move leaves the matrix vMF distribution invariant no
    matter the concentration. Returns ``(frame, accepted)``.
    """
    w, d, rt = np.linalg.svd(f, full_matrices=False)
    h = w * d
    proposal, logw_prop = sequential_vmf_draw(h, rng)
    logw_cur = sequential_vmf_logweight(h, current @ rt.T)
    if math.log(rng.uniform()) < logw_prop - logw_cur:
        return proposal @ rt, True
    return current, False


def sample_matrix_vmf(f, rng, sweeps: int = 30, budget: int = VMF_REJECTION_BUDGET) -> np.ndarray:
    """Draw from the density exp(tr(f^T U)) on the orthogonal/Stiefel manifold.

    ``f`` is m-by-k with m >= k; the result is an m-by-k frame with
    orthonormal columns. Gibbs over columns (pairs of columns when the frame
    is square), started at the polar factor of ``f`` (at a uniform frame
    when f = 0), with ``sweeps`` full sweeps. For k = 1 and for zero
    concentration the draw is exact.
    """
    f = as_matrix(f, "concentration")
    m, k = f.shape
    if m < k:
        raise ValueError(f"concentration must have shape m >= k, got {f.shape}")
    if k == 1:
        return sample_vmf_sphere(f[:, 0], rng, budget).reshape(m, 1)
    fnorm = float(np.linalg.norm(f))
    if fnorm == 0.0:
        g = rng.standard_normal((m, k))
        q, r = np.linalg.qr(g)
        return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)
    w, _, rt = np.linalg.svd(f, full_matrices=False)
    u = w @ rt
    for _ in range(sweeps):
        if m == k:
            pair_gibbs_sweep(u, f, rng)
        else:
            column_gibbs_sweep(u, f, rng, budget)
    return u
