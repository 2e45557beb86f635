# pylint: disable=protected-access

import itertools
import unittest

import numpy as np
from scipy import stats
from six.moves import mock

from clecli import errors, evaluation, numerics, supervised, unsupervised
from clecli import lexicon as lex
from clecli.embeddings import WordVectorSpace

from tests import synthetic


class TestVecmapSeed(unittest.TestCase):

    def setUp(self):
        self.fx = synthetic.rotated_pair(n=200, dim=10)

    def test_identical(self):
        found = unsupervised.vecmap_seed(self.fx.src, self.fx.src, cap=200)
        self.assertEqual(found.pairs,
                         tuple(zip(self.fx.src.words, self.fx.src.words)))

    def test_permuted_copy(self):
        order = np.random.default_rng(5).permutation(200)
        copy = synthetic.renamed(self.fx.src, 't', order)
        found = unsupervised.vecmap_seed(self.fx.src, copy, cap=200)
        self.assertEqual(found, self.fx.gold)

    def test_rotated_copy(self):
        found = unsupervised.vecmap_seed(self.fx.src, self.fx.tgt, cap=200)
        self.assertEqual(found, self.fx.gold)


class TestSelfLearn(unittest.TestCase):

    def test_single_round_is_procrustes(self):
        fx = synthetic.rotated_pair(sigma=0.1)
        init = fx.train.head(30)
        config = unsupervised.SelfLearnConfig(keep_prob=1.0, max_rounds=1)
        pair = unsupervised.self_learn(fx.src, fx.tgt, init, config)
        proc = supervised.align_proc(
            lex.build_aligned_matrices(init, fx.src, fx.tgt))
        np.testing.assert_allclose(pair.w_src, proc.w_src, atol=1e-12)

    def test_recovers_from_induced_seed(self):
        fx = synthetic.rotated_pair(sigma=0.05)
        seed = unsupervised.vecmap_seed(fx.src, fx.tgt)
        pair = unsupervised.self_learn(
            fx.src, fx.tgt, seed, unsupervised.SelfLearnConfig(seed=0))
        result = evaluation.bli_evaluate(pair, fx.src, fx.tgt, fx.test)
        self.assertGreaterEqual(result.map, 0.9)

    def test_stochastic_rounds_keep_gold_alignment(self):
        fx = synthetic.rotated_pair(sigma=0.05)
        for metric in lex.METRICS:
            config = unsupervised.SelfLearnConfig(metric=metric, seed=1)
            pair = unsupervised.self_learn(fx.src, fx.tgt, fx.gold, config)
            self.assertGreater(min(pair.meta['trajectory']), 20)
            result = evaluation.bli_evaluate(pair, fx.src, fx.tgt, fx.test)
            self.assertGreaterEqual(result.map, 0.9, metric)

    def test_small_induction_keeps_previous_dictionary(self):
        fx = synthetic.rotated_pair(sigma=0.05, n=100)
        init = fx.gold.head(40)
        config = unsupervised.SelfLearnConfig(keep_prob=1.0, max_rounds=2)
        with mock.patch.object(lex, 'mutual_nn_indices',
                               return_value=([0], [0], 0.5)):
            with self.assertLogs('cle.unsupervised', 'WARNING'):
                pair = unsupervised.self_learn(fx.src, fx.tgt, init, config)
        self.assertEqual(pair.lexicon, init)
        self.assertEqual(pair.meta['trajectory'], [1, 1])

    def test_deterministic(self):
        fx = synthetic.rotated_pair(sigma=0.1, n=200)
        init = fx.train.head(20)
        runs = [
            unsupervised.self_learn(
                fx.src, fx.tgt, init,
                unsupervised.SelfLearnConfig(max_rounds=15, seed=4))
            for _ in range(2)]
        self.assertEqual(runs[0].meta['trajectory'], runs[1].meta['trajectory'])
        self.assertEqual(runs[0].lexicon, runs[1].lexicon)
        np.testing.assert_array_equal(runs[0].w_src, runs[1].w_src)

    def test_empty_seed(self):
        fx = synthetic.rotated_pair(n=50)
        with self.assertRaises(errors.LexiconError):
            unsupervised.self_learn(
                fx.src, fx.tgt, lex.TranslationLexicon([('nope', 'nada')]))

    def test_bad_keep_prob(self):
        with self.assertRaises(errors.ConfigError):
            unsupervised.SelfLearnConfig(keep_prob=0.0)


class TestPostprocess(unittest.TestCase):

    def setUp(self):
        fx = synthetic.rotated_pair(sigma=0.3)
        self.fx = fx
        self.aligned = lex.build_aligned_matrices(fx.train, fx.src, fx.tgt)
        self.pair = supervised.align_proc(self.aligned)

    def _ranks(self, pair):
        result = evaluation.bli_evaluate(pair, self.fx.src, self.fx.tgt,
                                         self.fx.test)
        return [r.rank for r in result.records]

    def test_all_off_is_identity(self):
        options = unsupervised.PostprocessOptions()
        self.assertIs(
            unsupervised.vecmap_postprocess(self.pair, self.aligned, options),
            self.pair)

    def test_zero_reweighting_keeps_rankings(self):
        options = unsupervised.PostprocessOptions(src_reweight=0.0)
        out = unsupervised.vecmap_postprocess(self.pair, self.aligned, options)
        self.assertEqual(self._ranks(out), self._ranks(self.pair))

    def test_whiten_dewhiten(self):
        options = unsupervised.PostprocessOptions(
            whiten=True, src_reweight=0.5, tgt_reweight=0.5,
            src_dewhiten='src', tgt_dewhiten='tgt', dim_reduction=10)
        out = unsupervised.vecmap_postprocess(self.pair, self.aligned, options)
        self.assertEqual(out.dim, 10)
        self.assertEqual(out.meta['postprocess']['dim_reduction'], 10)

    def test_bad_dewhiten(self):
        with self.assertRaises(errors.ConfigError):
            unsupervised.PostprocessOptions(src_dewhiten='both')


class TestIcp(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(12)
        self.a = rng.standard_normal((60, 4))

    def test_zero_loss_at_start(self):
        run = unsupervised.run_icp(self.a, self.a, np.eye(4), outer_iters=1)
        self.assertEqual(run.losses[0], 0.0)
        np.testing.assert_array_equal(run.f1, np.arange(60))

    def test_cycle_vanishes_for_orthogonal(self):
        w1 = stats.ortho_group.rvs(4, random_state=3)
        f1, f2 = unsupervised.icp_assign(self.a, self.a, w1, w1.T)
        loss = unsupervised.icp_loss(self.a, self.a, w1, w1.T, f1, f2, 1.0)
        self.assertAlmostEqual(loss.cycle, 0.0, places=10)

    def test_loss_nonincreasing(self):
        r = stats.ortho_group.rvs(4, random_state=4)
        rng = np.random.default_rng(5)
        b = self.a.dot(r) + 0.1 * rng.standard_normal(self.a.shape)
        w1 = numerics.random_orthogonal(4, rng)
        for lambda_cyc in (0.0, 1.0):
            run = unsupervised.run_icp(self.a, b, w1, lambda_cyc=lambda_cyc,
                                       inner_iters=20, outer_iters=30)
            steps = np.diff(run.losses)
            self.assertTrue(np.all(steps <= 1e-9 * run.losses[0]),
                            'lambda {}: {}'.format(lambda_cyc, run.losses))

    def test_recovers_rotation(self):
        fx = synthetic.rotated_pair(n=300, permute=True)
        config = unsupervised.IcpConfig(
            pca_dim=10, top_n_words=300, restarts=20, inner_iters=10,
            outer_iters=30, seed=7)
        pair = unsupervised.align_icp(fx.src, fx.tgt, config)
        test = fx.gold
        result = evaluation.bli_evaluate(pair, fx.src, fx.tgt, test)
        self.assertGreaterEqual(result.map, 0.8)
        self.assertEqual(pair.meta['restarts'], 20)

    def test_pca_dim_too_large(self):
        fx = synthetic.rotated_pair(n=50, dim=5)
        with self.assertRaises(errors.AlignmentError):
            unsupervised.align_icp(fx.src, fx.tgt,
                                   unsupervised.IcpConfig(pca_dim=6))


def _cosines(x):
    unit = numerics.unit_rows(x)
    return unit.dot(unit.T)


class TestGromovWasserstein(unittest.TestCase):

    def test_small_permutation_matches_enumeration(self):
        rng = np.random.default_rng(21)
        x = rng.standard_normal((6, 5))
        perm = rng.permutation(6)
        y = x.dot(stats.ortho_group.rvs(5, random_state=22))[perm]
        c1, c2 = _cosines(x), _cosines(y)

        def gw_cost(pi):
            return np.sum((c1 - c2[np.ix_(pi, pi)]) ** 2)

        best = min(itertools.permutations(range(6)), key=gw_cost)
        plan = unsupervised.gromov_wasserstein(c1, c2, lam=0.01)
        self.assertEqual(tuple(plan.row_argmax()), best)

    def test_identical_spaces(self):
        x = np.random.default_rng(23).standard_normal((20, 20))
        space = WordVectorSpace(['w{}'.format(i) for i in range(20)], x)
        pair = unsupervised.align_gwa(space, space, cap=20, lam=0.01)
        np.testing.assert_array_equal(pair.plan.row_argmax(), np.arange(20))
        np.testing.assert_allclose(pair.w_src, np.eye(20), atol=1e-8)

    def test_rotation_invariant(self):
        x = np.random.default_rng(24).standard_normal((20, 20))
        r = stats.ortho_group.rvs(20, random_state=25)
        a = unsupervised.gromov_wasserstein(_cosines(x), _cosines(x), 0.02)
        b = unsupervised.gromov_wasserstein(
            _cosines(x), _cosines(x.dot(r)), 0.02)
        np.testing.assert_allclose(a.gamma, b.gamma, atol=1e-9)

    def test_degenerate_space(self):
        c = np.ones((5, 5))
        plan = unsupervised.gromov_wasserstein(c, c)
        np.testing.assert_allclose(plan.gamma, np.full((5, 5), 1 / 25.0))

    def test_lambda_must_be_positive(self):
        with self.assertRaises(errors.AlignmentError):
            unsupervised.gromov_wasserstein(np.eye(3), np.eye(3), lam=0.0)

    def test_marginals(self):
        x = np.random.default_rng(26).standard_normal((10, 4))
        plan = unsupervised.gromov_wasserstein(_cosines(x), _cosines(x), 0.05)
        np.testing.assert_allclose(plan.gamma.sum(axis=1), 0.1, atol=1e-6)
        np.testing.assert_allclose(plan.gamma.sum(axis=0), 0.1, atol=1e-6)
