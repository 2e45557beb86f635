import os
import shutil
import tempfile
import unittest

from clecli import config, errors
from clecli.embeddings import MEAN_CENTER, UNIT_LENGTH


class TestExperimentConfig(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def _write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, 'w') as fid:
            fid.write(text)
        return path

    def test_defaults(self):
        cfg = config.ExperimentConfig.defaults()
        self.assertEqual(cfg.method, 'proc')
        self.assertIsNone(cfg.seed)
        self.assertEqual(cfg.get('gwa', 'lambda'), 0.05)
        self.assertEqual(cfg.get('dictionary', 'train_sizes'),
                         [1000, 3000, 5000])
        self.assertEqual(len(cfg.preprocess('source')), 0)

    def test_file_then_overrides(self):
        path = self._write('exp.ini', '\n'.join([
            '[method]',
            'name = proc-b',
            '[proc-b]',
            'iters = 3',
            '[embeddings]',
            'source_preprocess = unit-length,mean-center',
            '[rcsls]',
            'spectral = yes',
        ]))
        cfg = config.ExperimentConfig.load(
            path, {'proc-b.iters': '2', 'gwa.lambda': '0.1'})
        self.assertEqual(cfg.method, 'proc-b')
        self.assertEqual(cfg.method_params()['iters'], 2)
        self.assertEqual(cfg.get('gwa', 'lambda'), 0.1)
        self.assertIs(cfg.get('rcsls', 'spectral'), True)
        self.assertEqual(list(cfg.preprocess('source').steps),
                         [UNIT_LENGTH, MEAN_CENTER])

    def test_unknown_key(self):
        with self.assertRaises(errors.ConfigError):
            config.ExperimentConfig.load(overrides={'gwa.lamda': '0.1'})
        with self.assertRaises(errors.ConfigError):
            config.ExperimentConfig.load(overrides={'nope.key': '1'})

    def test_bad_value(self):
        with self.assertRaises(errors.ConfigError) as ctx:
            config.ExperimentConfig.load(overrides={'icp.restarts': 'many'})
        self.assertIn('icp.restarts', str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(errors.ConfigError):
            config.ExperimentConfig.load(os.path.join(self.tmp, 'none.ini'))

    def test_malformed_file(self):
        path = self._write('bad.ini', 'name = proc\n')
        with self.assertRaises(errors.ConfigError):
            config.ExperimentConfig.load(path)

    def test_optional_values(self):
        cfg = config.ExperimentConfig.load(overrides={
            'run.seed': '7', 'vecmap.dim_reduction': 'none',
            'cca.keep_dims': '5'})
        self.assertEqual(cfg.seed, 7)
        self.assertIsNone(cfg.get('vecmap', 'dim_reduction'))
        self.assertEqual(cfg.get('cca', 'keep_dims'), 5)


class TestValidate(unittest.TestCase):

    def _cfg(self, **overrides):
        return config.ExperimentConfig.load(overrides=dict(
            (key.replace('__', '.'), value) for key, value in overrides.items()))

    def test_valid_defaults(self):
        cfg = config.ExperimentConfig.defaults()
        self.assertIs(cfg.validate(), cfg)

    def test_unknown_method(self):
        with self.assertRaises(errors.ConfigError):
            self._cfg(method__name='muse').validate()

    def test_stochastic_needs_seed(self):
        with self.assertRaises(errors.ConfigError) as ctx:
            self._cfg(method__name='icp').validate()
        self.assertIn('--seed', str(ctx.exception))
        self._cfg(method__name='icp', run__seed='1').validate()

    def test_missing_path(self):
        cfg = self._cfg(embeddings__source='/no/such/file.vec')
        with self.assertRaises(errors.ConfigError) as ctx:
            cfg.validate(['embeddings.source'])
        self.assertEqual(str(ctx.exception),
                         'embeddings.source: no such file: /no/such/file.vec')
        with self.assertRaises(errors.ConfigError):
            cfg.validate(['embeddings.target'])

    def test_ranges(self):
        for overrides in (
                {'gwa__lambda': '0'},
                {'vecmap__keep_prob': '1.5'},
                {'evaluation__metric': 'euclid'},
                {'evaluation__neighborhood': '0'},
                {'clir__weighting': 'bm25'},
                {'vecmap__src_dewhiten': 'both'},
                {'embeddings__target_preprocess': 'sparkle'}):
            with self.assertRaises(errors.ConfigError, msg=str(overrides)):
                self._cfg(**overrides).validate()

    def test_as_dict(self):
        data = self._cfg(method__name='gwa').as_dict()
        self.assertEqual(data['method']['name'], 'gwa')
        self.assertEqual(data['method']['lambda'], 0.05)
        self.assertNotIn('icp', data)
