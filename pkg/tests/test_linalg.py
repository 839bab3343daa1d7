import numpy as np
import pytest
from scipy.optimize import minimize

from nnd.linalg import as_matrix, nuclear_norm, prox_nuclear, svd


def nuclear_norm_2x2(a):
    # closed form, independent of the package's SVD path:
    # (s1 + s2)^2 = ||A||_F^2 + 2 |det A|
    return np.sqrt(np.sum(a * a) + 2.0 * abs(np.linalg.det(a)))


def brute_force_prox_2x2(x, threshold):
    """Grid search plus local refinement of the proximal objective."""

    def objective(flat):
        u = flat.reshape(2, 2)
        return 0.5 * np.sum((u - x) ** 2) + threshold * nuclear_norm_2x2(u)

    span = np.abs(x).max() + threshold + 0.5
    grid = np.linspace(-span, span, 9)
    best, best_val = None, np.inf
    for a in grid:
        for b in grid:
            for c in grid:
                for d in grid:
                    v = objective(np.array([a, b, c, d]))
                    if v < best_val:
                        best, best_val = np.array([a, b, c, d]), v
    starts = [best, x.ravel(), np.zeros(4)]
    vals = []
    for s in starts:
        res = minimize(objective, s, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000})
        vals.append(res.fun)
    return min(vals)


class TestSvd:
    def test_identity(self):
        t = svd(np.eye(2))
        assert np.allclose(t.s, [1.0, 1.0])
        assert np.allclose(t.reconstruct(), np.eye(2), atol=1e-12)

    def test_diagonal(self):
        t = svd(np.diag([3.0, 1.0]))
        assert np.allclose(t.s, [3.0, 1.0])

    def test_reconstruction_random(self, rng):
        x = rng.standard_normal((5, 3))
        t = svd(x)
        rel = np.linalg.norm(t.reconstruct() - x) / np.linalg.norm(x)
        assert rel < 1e-8

    def test_orthonormal_factors(self, rng):
        x = rng.standard_normal((4, 7))
        t = svd(x)
        assert np.linalg.norm(t.u.T @ t.u - np.eye(4)) < 1e-10
        assert np.linalg.norm(t.v.T @ t.v - np.eye(4)) < 1e-10
        assert np.all(np.diff(t.s) <= 1e-14)
        assert np.all(t.s >= 0)

    def test_deterministic(self, rng):
        x = rng.standard_normal((3, 3))
        a, b = svd(x), svd(x.copy())
        assert np.array_equal(a.u, b.u) and np.array_equal(a.s, b.s)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            svd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestNuclearNorm:
    def test_diagonal(self):
        assert nuclear_norm(np.diag([3.0, 1.0])) == pytest.approx(4.0)

    def test_zero(self):
        assert nuclear_norm(np.zeros((3, 2))) == 0.0

    def test_matches_svd_sum(self, rng):
        x = rng.standard_normal((4, 4))
        assert abs(nuclear_norm(x) - svd(x).s.sum()) < 1e-10

    def test_transpose_and_orthogonal_invariance(self, rng):
        x = rng.standard_normal((3, 5))
        p, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        base = nuclear_norm(x)
        assert abs(nuclear_norm(x.T) - base) < 1e-9
        assert abs(nuclear_norm(p @ x @ q) - base) < 1e-9


class TestProxNuclear:
    def test_diagonal_threshold(self):
        out = prox_nuclear(np.diag([3.0, 1.0]), 2.0)
        assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-12)

    def test_zero_threshold_is_identity(self, rng):
        x = rng.standard_normal((3, 4))
        assert np.abs(prox_nuclear(x, 0.0) - x).max() < 1e-10

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            prox_nuclear(np.eye(2), -0.1)

    def test_norm_never_grows(self, rng):
        for _ in range(10):
            x = rng.standard_normal((3, 3)) * rng.uniform(0.1, 5.0)
            t = rng.uniform(0.0, 2.0)
            assert nuclear_norm(prox_nuclear(x, t)) <= nuclear_norm(x) + 1e-12

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(6):
            x = rng.standard_normal((2, 2))
            t = rng.uniform(0.2, 1.5)
            out = prox_nuclear(x, t)
            obj_prox = 0.5 * np.sum((out - x) ** 2) + t * nuclear_norm_2x2(out)
            obj_oracle = brute_force_prox_2x2(x, t)
            assert obj_prox <= obj_oracle + 1e-6

    def test_firmly_nonexpansive(self, rng):
        for _ in range(20):
            a = rng.standard_normal((3, 3))
            b = rng.standard_normal((3, 3))
            t = rng.uniform(0.0, 2.0)
            da = np.linalg.norm(prox_nuclear(a, t) - prox_nuclear(b, t))
            assert da <= np.linalg.norm(a - b) + 1e-12

    def test_local_optimality(self, rng):
        x = rng.standard_normal((3, 3))
        t = 0.7
        out = prox_nuclear(x, t)
        base = 0.5 * np.sum((out - x) ** 2) + t * nuclear_norm(out)
        for _ in range(25):
            delta = 1e-4 * rng.standard_normal((3, 3))
            cand = out + delta
            val = 0.5 * np.sum((cand - x) ** 2) + t * nuclear_norm(cand)
            assert val >= base - 1e-12


def test_as_matrix_validations():
    with pytest.raises(ValueError):
        as_matrix(np.zeros(3))
    with pytest.raises(ValueError):
        as_matrix(np.array([[np.inf]]))
    out = as_matrix([[1, 2], [3, 4]])
    assert out.dtype == np.float64 and out.shape == (2, 2)
