"""Dense matrix primitives: SVD, nuclear norm, singular-value soft thresholding.

Matrices are plain 2-D float64 numpy arrays throughout the package; use
:func:`as_matrix` to validate external input (finite entries, 2-D shape).
All functions here are pure and thread-safe.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import NumericalError

# Singular values below RANK_EPS * s_max are snapped to exact zero after
# thresholding so that rank statements stay crisp.
RANK_EPS = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array or raise ``ValueError``."""
    x = np.asarray(a, dtype=float)
    if x.ndim != 2 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return x


class SvdTriple(NamedTuple):
    """Thin singular value decomposition ``x = u @ diag(s) @ v.T``.

    ``u`` is n-by-k and ``v`` is m-by-k with orthonormal columns,
    ``s`` is length k, non-negative and non-increasing, k = min(n, m).
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def svd(x) -> SvdTriple:
    """Thin SVD of a dense matrix.

    Deterministic for fixed input; raises :class:`NumericalError` if the
    underlying LAPACK routine fails to converge.
    """
    x = as_matrix(x)
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge on a {x.shape} matrix") from exc
    return SvdTriple(u, s, vt.T)


def nuclear_norm(x) -> float:
    """Sum of the singular values of ``x``.

    Invariant under transposition and under multiplication by orthogonal
    matrices on either side.
    """
    x = as_matrix(x)
    try:
        s = np.linalg.svd(x, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge on a {x.shape} matrix") from exc
    return float(s.sum())


def prox_nuclear(x, threshold: float) -> np.ndarray:
    """Soft-threshold the singular values of ``x`` by ``threshold``.

    Returns the minimizer of ``||u - x||_F^2 / 2 + threshold * ||u||_*``,
    i.e. ``u @ diag(max(s_i - threshold, 0)) @ v.T``. A threshold of zero
    returns ``x`` up to SVD round-off, and the output nuclear norm never
    exceeds the input nuclear norm.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    u, s, v = svd(x)
    s = np.maximum(s - threshold, 0.0)
    if s[0] > 0.0:
        s[s < RANK_EPS * s[0]] = 0.0
    return (u * s) @ v.T
