import unittest

import numpy as np
from scipy import stats

from clecli import errors, numerics


class TestSvd(unittest.TestCase):

    def test_diagonal(self):
        res = numerics.svd(np.diag([3.0, 2.0]))
        np.testing.assert_allclose(res.S, [3, 2])
        np.testing.assert_allclose(res.U, np.eye(2))
        np.testing.assert_allclose(res.Vt, np.eye(2))

    def test_sign_convention(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((8, 5))
        res = numerics.svd(a)
        pivots = np.argmax(np.abs(res.U), axis=0)
        self.assertTrue(np.all(res.U[pivots, np.arange(5)] > 0))
        np.testing.assert_allclose((res.U * res.S).dot(res.Vt), a, atol=1e-12)
        flipped = numerics.svd(-a)
        np.testing.assert_allclose(np.abs(flipped.U), np.abs(res.U),
                                   atol=1e-10)

    def test_non_finite(self):
        with self.assertRaises(errors.NumericalError):
            numerics.svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestProcrustes(unittest.TestCase):

    def test_recovers_rotation(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((100, 10))
        r = stats.ortho_group.rvs(10, random_state=2)
        w = numerics.solve_procrustes(x, x.dot(r))
        np.testing.assert_allclose(w, r, atol=1e-10)
        self.assertTrue(numerics.is_orthogonal(w))

    def test_single_pair_is_orthogonal(self):
        w, s = numerics.solve_procrustes(
            np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), full=True)
        self.assertTrue(numerics.is_orthogonal(w))
        np.testing.assert_allclose(np.array([1.0, 0.0]).dot(w), [0, 1],
                                   atol=1e-12)
        self.assertEqual(numerics.numerical_rank(s, (1, 2)), 1)

    def test_shape_mismatch(self):
        with self.assertRaises(errors.NumericalError):
            numerics.solve_procrustes(np.eye(3), np.eye(2))


class TestCca(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(4)
        self.x = rng.standard_normal((500, 4))
        self.rng = rng

    def test_rotation_gives_perfect_correlation(self):
        r = stats.ortho_group.rvs(4, random_state=5)
        res = numerics.solve_cca(self.x, self.x.dot(r), epsilon=0.0)
        np.testing.assert_allclose(res.correlations, 1.0, atol=1e-8)

    def test_independent(self):
        res = numerics.solve_cca(self.x, self.rng.standard_normal((500, 4)))
        self.assertLess(res.correlations[0], 0.25)
        self.assertTrue(np.all(np.diff(res.correlations) <= 0))

    def test_keep_dims(self):
        res = numerics.solve_cca(self.x, self.x, keep_dims=2)
        self.assertEqual(res.A.shape, (4, 2))
        self.assertEqual(res.B.shape, (4, 2))
        with self.assertRaises(errors.NumericalError):
            numerics.solve_cca(self.x, self.x, keep_dims=5)

    def test_singular_covariance(self):
        x = np.hstack([self.x, self.x[:, :1]])
        res = numerics.solve_cca(x, x)
        self.assertTrue(np.all(np.isfinite(res.A)))


class TestPca(unittest.TestCase):

    def test_explained_variance(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((200, 6)) * [5, 4, 3, 2, 1, 0.5]
        res = numerics.pca_project(x, 3)
        eig = np.sort(np.linalg.eigvalsh(np.cov(x, rowvar=False)))[::-1]
        np.testing.assert_allclose(res.explained_variance, eig[:3],
                                   rtol=1e-10)
        self.assertEqual(res.projected.shape, (200, 3))
        np.testing.assert_allclose(res.basis.T.dot(res.basis), np.eye(3),
                                   atol=1e-12)

    def test_out_dim_bounds(self):
        with self.assertRaises(errors.NumericalError):
            numerics.pca_project(np.eye(3), 4)


class TestSinkhorn(unittest.TestCase):

    def test_marginals(self):
        rng = np.random.default_rng(7)
        kernel = rng.random((5, 7)) + 0.1
        p = np.full(5, 1 / 5.0)
        q = np.full(7, 1 / 7.0)
        res = numerics.sinkhorn_scale(kernel, p, q)
        self.assertTrue(res.converged)
        plan = res.a[:, None] * kernel * res.b[None, :]
        np.testing.assert_allclose(plan.sum(axis=1), p, atol=1e-9)
        np.testing.assert_allclose(plan.sum(axis=0), q, atol=1e-9)

    def test_diagonal_dominant(self):
        kernel = np.full((4, 4), 0.01) + np.eye(4)
        p = q = np.full(4, 0.25)
        res = numerics.sinkhorn_scale(kernel, p, q)
        plan = res.a[:, None] * kernel * res.b[None, :]
        np.testing.assert_array_equal(plan.argmax(axis=1), np.arange(4))

    def test_zero_column(self):
        kernel = np.ones((3, 3))
        kernel[:, 1] = 0.0
        p = q = np.full(3, 1 / 3.0)
        with self.assertRaises(errors.NumericalError) as ctx:
            numerics.sinkhorn_scale(kernel, p, q)
        self.assertIn('lambda', str(ctx.exception))


class TestSweeps(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(8)
        self.q = rng.standard_normal((13, 4))
        self.c = rng.standard_normal((9, 4))

    def test_top_k_and_mean(self):
        sims = self.q.dot(self.c.T)
        idx = numerics.top_k(self.q, self.c, 3, batch=5)
        expected = np.sort(sims, axis=1)[:, -3:]
        np.testing.assert_allclose(
            np.sort(np.take_along_axis(sims, idx, axis=1), axis=1), expected)
        np.testing.assert_allclose(
            numerics.mean_top_k(self.q, self.c, 3, batch=4),
            expected.mean(axis=1), atol=1e-12)

    def test_nearest(self):
        idx, best = numerics.nearest(self.q, self.c, batch=3)
        sims = self.q.dot(self.c.T)
        np.testing.assert_array_equal(idx, sims.argmax(axis=1))
        np.testing.assert_allclose(best, sims.max(axis=1))

    def test_ties_go_to_lowest_index(self):
        idx, _ = numerics.nearest(np.array([[1.0, 0.0]]),
                                  np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]))
        self.assertEqual(idx[0], 1)

    def test_dropout_is_seeded(self):
        a = numerics.nearest(self.q, self.c, keep_prob=0.5,
                             rng=np.random.default_rng(0))[0]
        b = numerics.nearest(self.q, self.c, keep_prob=0.5,
                             rng=np.random.default_rng(0))[0]
        np.testing.assert_array_equal(a, b)

    def test_unit_rows(self):
        out = numerics.unit_rows([[3.0, 4.0], [0.0, 0.0]])
        np.testing.assert_allclose(out, [[0.6, 0.8], [0.0, 0.0]])

    def test_clip_spectrum(self):
        w = np.diag([3.0, 0.5])
        np.testing.assert_allclose(numerics.clip_spectrum(w),
                                   np.diag([1.0, 0.5]), atol=1e-12)
