'''Experiment configuration: INI file, flag and key=value overrides.

Example::

    [embeddings]
    source = wiki.en.vec
    target = wiki.de.vec
    source_preprocess = unit-length,mean-center

    [dictionary]
    train = en-de.train.txt
    test = en-de.test.txt

    [method]
    name = proc-b

    [proc-b]
    iters = 2

Any key can be overridden on the command line as ``section.key=value``,
e.g. ``gwa.lambda=0.1``.
'''

from collections import OrderedDict
import logging
import os

from six.moves import configparser

from clecli import errors, lexicon as lex
from clecli.embeddings import PreprocessChain

logger = logging.getLogger('cle.config')

METHODS = (
    'proc', 'proc-b', 'cca', 'dlv', 'rcsls', 'refine', 'vecmap', 'icp', 'gwa')
SUPERVISED = ('proc', 'proc-b', 'cca', 'dlv', 'rcsls', 'refine')
STOCHASTIC = ('vecmap', 'icp')

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


def _bool(value):
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError('not a boolean: {!r}'.format(value))


def _optional(convert):
    def helper(value):
        if value is None or str(value).strip().lower() in ('', 'none'):
            return None
        return convert(value)
    return helper


def _int_list(value):
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(',') if v.strip()]


def _keep_dims(value):
    text = str(value).strip().lower()
    return 'all' if text == 'all' else int(text)


_str = _optional(str)
_opt_int = _optional(int)
_opt_float = _optional(float)

# section -> key -> (converter, default)
SCHEMA = OrderedDict([
    ('embeddings', OrderedDict([
        ('source', (_str, None)),
        ('target', (_str, None)),
        ('source_lang', (str, 'src')),
        ('target_lang', (str, 'tgt')),
        ('max_vocab', (_opt_int, 200000)),
        ('source_preprocess', (str, '')),
        ('target_preprocess', (str, '')),
        ('whiten_epsilon', (float, 1e-12)),
    ])),
    ('dictionary', OrderedDict([
        ('train', (_str, None)),
        ('test', (_str, None)),
        ('train_size', (_opt_int, None)),
        ('train_sizes', (_int_list, [1000, 3000, 5000])),
        ('test_size', (int, 2000)),
    ])),
    ('method', OrderedDict([
        ('name', (str, 'proc')),
    ])),
    ('evaluation', OrderedDict([
        ('metric', (str, lex.COSINE)),
        ('neighborhood', (int, 10)),
    ])),
    ('clir', OrderedDict([
        ('documents', (_str, None)),
        ('queries', (_str, None)),
        ('qrels', (_str, None)),
        ('weighting', (str, 'idf')),
    ])),
    ('run', OrderedDict([
        ('seed', (_opt_int, None)),
        ('output', (str, 'out')),
    ])),
    ('proc', OrderedDict()),
    ('proc-b', OrderedDict([
        ('iters', (int, 1)),
        ('search_cap', (int, lex.SEARCH_CAP)),
        ('metric', (str, lex.COSINE)),
        ('csls_k', (int, lex.CSLS_K)),
    ])),
    ('cca', OrderedDict([
        ('keep_dims', (_keep_dims, 'all')),
        ('epsilon', (float, 1e-8)),
    ])),
    ('dlv', OrderedDict([
        ('em_iters', (int, 3)),
        ('cand_per_node', (int, 10)),
        ('match_cap', (int, 2500)),
    ])),
    ('rcsls', OrderedDict([
        ('neighborhood', (int, 10)),
        ('learning_rate', (float, 1.0)),
        ('epochs', (int, 10)),
        ('spectral', (_bool, False)),
        ('neighbor_cap', (int, lex.SEARCH_CAP)),
    ])),
    ('refine', OrderedDict([
        ('vocab_cap', (int, lex.SEARCH_CAP)),
        ('metric', (str, lex.CSLS)),
        ('csls_k', (int, lex.CSLS_K)),
        ('max_rounds', (int, 10)),
        ('window', (int, 1)),
    ])),
    ('vecmap', OrderedDict([
        ('seed_cap', (int, 4000)),
        ('vocab_cap', (int, lex.SEARCH_CAP)),
        ('metric', (str, lex.CSLS)),
        ('csls_k', (int, lex.CSLS_K)),
        ('max_rounds', (int, 100)),
        ('keep_prob', (float, 0.1)),
        ('growth', (float, 2.0)),
        ('window', (int, 3)),
        ('threshold', (float, 1e-6)),
        ('whiten', (_bool, False)),
        ('src_reweight', (_opt_float, None)),
        ('tgt_reweight', (_opt_float, None)),
        ('src_dewhiten', (_str, None)),
        ('tgt_dewhiten', (_str, None)),
        ('dim_reduction', (_opt_int, None)),
    ])),
    ('icp', OrderedDict([
        ('pca_dim', (int, 50)),
        ('top_n_words', (int, 2500)),
        ('lambda_cyc', (float, 1.0)),
        ('restarts', (int, 20)),
        ('inner_iters', (int, 50)),
        ('outer_iters', (int, 100)),
        ('refine_rounds', (int, 3)),
    ])),
    ('gwa', OrderedDict([
        ('cap', (int, 2000)),
        ('lambda', (float, 0.05)),
        ('outer_iters', (int, 30)),
        ('sinkhorn_iters', (int, 1000)),
        ('sinkhorn_tol', (float, 1e-9)),
    ])),
])


def _convert(section, key, value):
    convert, _default = SCHEMA[section][key]
    try:
        return convert(value)
    except (TypeError, ValueError) as exc:
        raise errors.ConfigError('{}.{}: {}'.format(section, key, exc))


class ExperimentConfig(object):

    def __init__(self, values):
        self._values = values

    @classmethod
    def defaults(cls):
        return cls(OrderedDict(
            (section, OrderedDict(
                (key, default) for key, (_, default) in keys.items()))
            for section, keys in SCHEMA.items()))

    @classmethod
    def load(cls, path=None, overrides=None):
        '''Defaults, then the INI file at path, then overrides.

        overrides maps "section.key" to a value.
        '''
        cfg = cls.defaults()
        if path is not None:
            if not os.path.exists(path):
                raise errors.ConfigError('no such config file: {}'.format(path))
            cp = configparser.ConfigParser()
            try:
                cp.read(path)
            except configparser.Error as exc:
                raise errors.ConfigError('{}: {}'.format(path, exc))
            for section in cp.sections():
                for key, value in cp.items(section):
                    cfg.set(section, key, value)
        for name, value in (overrides or {}).items():
            section, _, key = name.rpartition('.')
            cfg.set(section, key, value)
        return cfg

    def set(self, section, key, value):
        if section not in SCHEMA:
            raise errors.ConfigError('unknown config section {!r}'.format(
                section))
        if key not in SCHEMA[section]:
            raise errors.ConfigError('unknown config key {}.{}'.format(
                section, key))
        self._values[section][key] = _convert(section, key, value)

    def get(self, section, key):
        return self._values[section][key]

    def section(self, name):
        return dict(self._values[name])

    @property
    def method(self):
        return self.get('method', 'name')

    @property
    def seed(self):
        return self.get('run', 'seed')

    @property
    def output(self):
        return self.get('run', 'output')

    @property
    def metric(self):
        return self.get('evaluation', 'metric')

    @property
    def neighborhood(self):
        return self.get('evaluation', 'neighborhood')

    def method_params(self):
        return self.section(self.method)

    def preprocess(self, side):
        return PreprocessChain.parse(
            self.get('embeddings', '{}_preprocess'.format(side)),
            self.get('embeddings', 'whiten_epsilon'))

    def validate(self, paths=()):
        '''Check everything a command needs before it touches its outputs.

        paths lists the "section.key" file entries the command reads.
        '''
        if self.method not in METHODS:
            raise errors.ConfigError(
                'unknown method {!r}; choose from {}'.format(
                    self.method, ', '.join(METHODS)))
        for section in ('evaluation', 'proc-b', 'refine', 'vecmap'):
            if self.get(section, 'metric') not in lex.METRICS:
                raise errors.ConfigError('{}.metric must be one of {}'.format(
                    section, ', '.join(lex.METRICS)))
        if self.neighborhood < 1:
            raise errors.ConfigError('evaluation.neighborhood must be >= 1')
        for side in ('source', 'target'):
            try:
                self.preprocess(side)
            except errors.CLEError as exc:
                raise errors.ConfigError(
                    'embeddings.{}_preprocess: {}'.format(side, exc))
        for name in paths:
            section, _, key = name.partition('.')
            path = self.get(section, key)
            if path is None:
                raise errors.ConfigError('{} is not set'.format(name))
            if not os.path.exists(path):
                raise errors.ConfigError(
                    '{}: no such file: {}'.format(name, path))
        if self.method in STOCHASTIC and self.seed is None:
            raise errors.ConfigError(
                'method {} is stochastic: set --seed'.format(self.method))
        if self.get('gwa', 'lambda') <= 0:
            raise errors.ConfigError('gwa.lambda must be > 0')
        if not 0 < self.get('vecmap', 'keep_prob') <= 1:
            raise errors.ConfigError('vecmap.keep_prob must be in (0, 1]')
        if self.get('icp', 'restarts') < 1:
            raise errors.ConfigError('icp.restarts must be >= 1')
        if self.get('proc-b', 'iters') < 1:
            raise errors.ConfigError('proc-b.iters must be >= 1')
        if self.get('clir', 'weighting') not in ('uniform', 'idf'):
            raise errors.ConfigError('clir.weighting must be uniform or idf')
        for key in ('src_dewhiten', 'tgt_dewhiten'):
            if self.get('vecmap', key) not in (None, 'src', 'tgt'):
                raise errors.ConfigError(
                    'vecmap.{} must be src or tgt'.format(key))
        return self

    def as_dict(self):
        '''The run-relevant settings, for the metadata record.'''
        data = OrderedDict()
        for section in ('embeddings', 'dictionary', 'evaluation', 'run'):
            data[section] = dict(self._values[section])
        data['method'] = {'name': self.method}
        data['method'].update(self.method_params())
        return dict(data)
