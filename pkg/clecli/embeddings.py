'''Word vector spaces: loading, preprocessing and saving.

The text format is the usual one: an optional ``count dim`` header line,
then one ``word v1 ... vd`` line per word, most frequent words first.
'''

import io
import logging

import numpy as np
from lazy_property import LazyProperty

from clecli import errors, numerics, output

logger = logging.getLogger('cle.embeddings')

UNIT_LENGTH = 'unit-length'
MEAN_CENTER = 'mean-center'
ZCA_WHITEN = 'zca-whiten'
STEPS = (UNIT_LENGTH, MEAN_CENTER, ZCA_WHITEN)

MAX_STEPS = 3
WHITEN_EPSILON = 1e-12
PRECISION = 6


class WordVectorSpace(object):
    '''An immutable vocabulary with one row vector per word.

    Rows are kept in frequency order, so ``head(n)`` is the n most
    frequent words.
    '''

    def __init__(self, words, matrix, lang_tag=''):
        words = tuple(words)
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise errors.EmbeddingError(
                'expected a 2-dimensional matrix, got shape {}'.format(
                    matrix.shape))
        if len(words) != matrix.shape[0]:
            raise errors.EmbeddingError(
                '{} words but {} vectors'.format(len(words), matrix.shape[0]))
        if matrix.shape[1] < 1:
            raise errors.EmbeddingError('vectors must have dimension >= 1')
        if len(set(words)) != len(words):
            raise errors.EmbeddingError('duplicate words in vocabulary')
        if not np.all(np.isfinite(matrix)):
            raise errors.EmbeddingError('non-finite values in vectors')
        matrix.setflags(write=False)
        self._words = words
        self._matrix = matrix
        self.lang_tag = lang_tag

    def __len__(self):
        return len(self._words)

    def __contains__(self, word):
        return word in self.index

    def __repr__(self):
        return '<WordVectorSpace {} |V|={} d={}>'.format(
            self.lang_tag or '?', len(self), self.dim)

    @property
    def words(self):
        return self._words

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self):
        return self._matrix.shape[1]

    @LazyProperty
    def index(self):
        return {word: i for i, word in enumerate(self._words)}

    def vector(self, word):
        try:
            return self._matrix[self.index[word]]
        except KeyError:
            raise errors.EmbeddingError(
                'word not in vocabulary: {!r}'.format(word))

    def head(self, n):
        if n >= len(self):
            return self
        return WordVectorSpace(self._words[:n], self._matrix[:n], self.lang_tag)

    def with_matrix(self, matrix):
        return WordVectorSpace(self._words, matrix, self.lang_tag)


class PreprocessChain(object):

    def __init__(self, steps=(), epsilon=WHITEN_EPSILON, max_steps=MAX_STEPS):
        steps = tuple(steps)
        for step in steps:
            if step not in STEPS:
                raise errors.EmbeddingError(
                    'unknown preprocessing step {!r}; choose from {}'.format(
                        step, ', '.join(STEPS)))
        if len(steps) > max_steps:
            raise errors.EmbeddingError(
                'at most {} preprocessing steps allowed, got {}'.format(
                    max_steps, len(steps)))
        if epsilon < 0:
            raise errors.EmbeddingError('whitening epsilon must be >= 0')
        self.steps = steps
        self.epsilon = epsilon

    @classmethod
    def parse(cls, text, epsilon=WHITEN_EPSILON):
        '''Build a chain from "unit-length,mean-center" style text.'''
        text = (text or '').strip()
        if text.lower() == 'none':
            return cls((), epsilon)
        steps = [step.strip() for step in text.split(',') if step.strip()]
        return cls(steps, epsilon)

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def __str__(self):
        return ','.join(self.steps) or 'none'


def _unit_length(matrix):
    zero = np.count_nonzero(np.linalg.norm(matrix, axis=1) == 0)
    if zero:
        logger.warning('%d zero vectors left unnormalized', zero)
    return numerics.unit_rows(matrix)


def normalize(space, chain):
    '''Apply the preprocessing steps of chain, in order, to a copy of space.'''
    matrix = np.array(space.matrix)
    for step in chain:
        if step == UNIT_LENGTH:
            matrix = _unit_length(matrix)
        elif step == MEAN_CENTER:
            matrix = matrix - matrix.mean(axis=0)
        elif step == ZCA_WHITEN:
            if len(matrix) < 2:
                raise errors.NumericalError(
                    'cannot whiten a space with fewer than 2 words')
            matrix = matrix.dot(numerics.whitening_matrix(matrix, chain.epsilon))
        if not np.all(np.isfinite(matrix)):
            raise errors.NumericalError(
                'non-finite values after {}'.format(step))
        logger.debug('%s: applied %s', space.lang_tag or 'space', step)
    return space.with_matrix(matrix)


def _is_header(fields):
    return len(fields) == 2 and all(f.isdigit() for f in fields)


def load_text_embeddings(path, max_vocab=None, lang_tag=''):
    '''Read a text embedding file, keeping the first max_vocab words.

    Duplicate words keep their first occurrence. Malformed lines raise
    ParseError carrying the line number.
    '''
    if max_vocab is not None and max_vocab < 1:
        raise errors.EmbeddingError('max_vocab must be positive')
    words, rows, seen = [], [], set()
    duplicates = 0
    dim = header_dim = None
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            fields = line.rstrip('\r\n').rstrip(' ').split(' ')
            if lineno == 1 and _is_header(fields):
                header_dim = int(fields[1])
                continue
            if fields == ['']:
                continue
            word = fields[0]
            if not word:
                raise errors.ParseError(path, lineno, 'empty word')
            if dim is None:
                dim = len(fields) - 1
                if dim < 1:
                    raise errors.ParseError(path, lineno, 'no vector values')
                if header_dim is not None and header_dim != dim:
                    raise errors.ParseError(
                        path, lineno,
                        'header says dimension {}, row has {}'.format(
                            header_dim, dim))
            elif len(fields) - 1 != dim:
                raise errors.ParseError(
                    path, lineno, 'inconsistent dimensions: expected {}, '
                    'got {}'.format(dim, len(fields) - 1))
            try:
                vector = np.array(fields[1:], dtype=np.float64)
            except ValueError:
                raise errors.ParseError(path, lineno, 'non-numeric value')
            if not np.all(np.isfinite(vector)):
                raise errors.ParseError(path, lineno, 'non-finite value')
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vector)
            if max_vocab is not None and len(words) >= max_vocab:
                break

    if not words:
        raise errors.EmbeddingError('{}: no vectors found'.format(path))
    if duplicates:
        logger.warning(
            '%s: dropped %d duplicate words (first occurrence kept)',
            path, duplicates)
    logger.info('Loaded %d vectors of dimension %d from %s',
                len(words), dim, path)
    return WordVectorSpace(words, np.vstack(rows), lang_tag)


def save_text_embeddings(space, path, precision=PRECISION):
    '''Write space with a header line, values with precision significant digits.'''
    if not len(space):
        raise errors.EmbeddingError('refusing to save an empty space')
    fmt = '%.{}g'.format(precision)
    with output.writing(path) as fid:
        fid.write('{} {}\n'.format(len(space), space.dim))
        for word, row in zip(space.words, space.matrix):
            fid.write(word + ' ' + ' '.join(fmt % x for x in row) + '\n')


def save_matrix(matrix, path):
    '''Write a headerless text matrix at full double precision.'''
    with output.writing(path) as fid:
        np.savetxt(fid, np.atleast_2d(matrix), fmt='%.17g')


def load_matrix(path):
    try:
        matrix = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise errors.EmbeddingError('{}: {}'.format(path, exc))
    if not matrix.size:
        raise errors.EmbeddingError('{}: empty matrix'.format(path))
    return matrix
