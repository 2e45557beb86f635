# pylint: disable=protected-access

import os
import shutil
import tempfile
import unittest

import numpy as np

from clecli import errors
from clecli import lexicon as lex
from clecli.embeddings import WordVectorSpace

THIS_DIR = os.path.abspath(os.path.dirname(__file__))
FIXTURE_DIR = os.path.join(THIS_DIR, 'fixtures')


class TestTranslationLexicon(unittest.TestCase):

    def test_dedupe_keeps_order(self):
        lexicon = lex.TranslationLexicon(
            [('a', 'x'), ('b', 'y'), ('a', 'x'), ('a', 'z')])
        self.assertEqual(lexicon.pairs, (('a', 'x'), ('b', 'y'), ('a', 'z')))
        self.assertEqual(lexicon.sources, ['a', 'b'])
        self.assertEqual(lexicon.grouped()['a'], ['x', 'z'])

    def test_union_and_reversed(self):
        a = lex.TranslationLexicon([('a', 'x')])
        b = lex.TranslationLexicon([('a', 'x'), ('b', 'y')])
        self.assertEqual(a.union(b).pairs, (('a', 'x'), ('b', 'y')))
        self.assertEqual(b.reversed().pairs, (('x', 'a'), ('y', 'b')))
        self.assertEqual(b.intersection(a), a)
        self.assertIn(('b', 'y'), b)

    def test_load(self):
        lexicon = lex.load_lexicon(os.path.join(FIXTURE_DIR, 'lexicon.txt'))
        self.assertEqual(lexicon.pairs, (
            ('cat', 'katze'), ('dog', 'hund'), ('cat', 'kater'),
            ('house', 'haus'), ('fish', 'fisch')))

    def test_load_malformed(self):
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 'bad.txt')
            with open(path, 'w') as fid:
                fid.write('cat\tkatze\ndog hund extra\n')
            with self.assertRaises(errors.ParseError) as ctx:
                lex.load_lexicon(path)
            self.assertEqual(ctx.exception.lineno, 2)
        finally:
            shutil.rmtree(tmp)

    def test_save_round_trip(self):
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 'out.txt')
            lexicon = lex.TranslationLexicon([('a', 'x'), ('b', 'y')])
            lex.save_lexicon(lexicon, path)
            self.assertEqual(lex.load_lexicon(path), lexicon)
        finally:
            shutil.rmtree(tmp)


class TestFrequencySplit(unittest.TestCase):

    def setUp(self):
        pairs = [('s{}'.format(i), 't{}'.format(i)) for i in range(8000)]
        # a test-range pair that reuses a training source word
        pairs[5100] = ('s10', 't5100')
        self.lexicon = lex.TranslationLexicon(pairs)

    def test_nested(self):
        trains, test = lex.frequency_split(
            self.lexicon, [1000, 3000, 5000], 2000)
        self.assertEqual([len(t) for t in trains], [1000, 3000, 5000])
        self.assertEqual(trains[1].pairs[:1000], trains[0].pairs)
        self.assertEqual(trains[2].pairs[:3000], trains[1].pairs)
        train_sources = set(trains[2].sources)
        self.assertFalse(train_sources & set(test.sources))
        self.assertEqual(len(test), 1999)

    def test_too_small(self):
        with self.assertRaises(errors.LexiconError):
            lex.frequency_split(self.lexicon.head(6000), [5000], 2000)


class TestAlignedMatrices(unittest.TestCase):

    def test_skips_oov(self):
        src = WordVectorSpace(['a', 'b'], np.eye(2))
        tgt = WordVectorSpace(['x', 'y'], 2 * np.eye(2))
        lexicon = lex.TranslationLexicon(
            [('a', 'x'), ('c', 'y'), ('b', 'q'), ('b', 'y')])
        aligned = lex.build_aligned_matrices(lexicon, src, tgt)
        self.assertEqual(len(aligned), 2)
        self.assertEqual(aligned.skipped, 2)
        self.assertEqual(aligned.coverage, 0.5)
        np.testing.assert_array_equal(aligned.src, np.eye(2))
        np.testing.assert_array_equal(aligned.tgt, 2 * np.eye(2))

    def test_nothing_in_vocabulary(self):
        src = WordVectorSpace(['a'], [[1.0]])
        with self.assertRaises(errors.LexiconError):
            lex.build_aligned_matrices(
                lex.TranslationLexicon([('z', 'z')]), src, src)


class TestNearestNeighbors(unittest.TestCase):

    def test_mutual_identity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((30, 5))
        words = ['w{}'.format(i) for i in range(30)]
        for metric in lex.METRICS:
            found = lex.mutual_nearest_neighbors(x, x, words, words, metric)
            self.assertEqual(found.pairs, tuple(zip(words, words)))

    def test_hub_is_not_mutual(self):
        # both queries prefer candidate 0, which prefers query 0
        queries = np.array([[1.0, 0.0], [0.9, 0.1]])
        candidates = np.array([[1.0, 0.05], [0.0, 1.0]])
        rows, cols, _ = lex.mutual_nn_indices(queries, candidates)
        self.assertEqual(list(rows), [0])
        self.assertEqual(list(cols), [0])

    def test_union_keeps_both_directions(self):
        queries = np.array([[1.0, 0.0], [0.9, 0.1]])
        candidates = np.array([[1.0, 0.05], [0.0, 1.0]])
        rows, cols, _ = lex.union_nn_indices(queries, candidates)
        self.assertEqual(list(zip(rows, cols)), [(0, 0), (1, 0), (1, 1)])

    def test_union_under_dropout_stays_large(self):
        x = np.random.default_rng(2).standard_normal((200, 10))
        rng = np.random.default_rng(0)
        rows, _, _ = lex.union_nn_indices(x, x, lex.CSLS, keep_prob=0.1,
                                          rng=rng)
        self.assertGreaterEqual(len(rows), 200)

    def test_search_cap(self):
        x = np.eye(4)
        words = list('abcd')
        found = lex.mutual_nearest_neighbors(x, x, words, words,
                                             search_cap=2)
        self.assertEqual(found.pairs, (('a', 'a'), ('b', 'b')))

    def test_unknown_metric(self):
        with self.assertRaises(errors.ConfigError):
            lex.nearest_indices(np.eye(2), np.eye(2), 'euclid')
