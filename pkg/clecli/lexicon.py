'''Translation dictionaries and their alignment with embedding spaces.'''

from collections import OrderedDict
import io
import logging

import numpy as np

from clecli import errors, numerics, output

logger = logging.getLogger('cle.lexicon')

COSINE = 'cosine'
CSLS = 'csls'
METRICS = (COSINE, CSLS)

SEARCH_CAP = 20000
CSLS_K = 10


class TranslationLexicon(object):
    '''An ordered list of distinct (source, target) word pairs.

    Order matters: dictionaries are sorted by source frequency, and
    ``frequency_split`` takes prefixes.
    '''

    def __init__(self, pairs=()):
        seen = set()
        kept = []
        for src, tgt in pairs:
            pair = (src, tgt)
            if pair in seen:
                continue
            seen.add(pair)
            kept.append(pair)
        self._pairs = tuple(kept)
        self._set = seen

    def __len__(self):
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def __getitem__(self, i):
        return self._pairs[i]

    def __contains__(self, pair):
        return tuple(pair) in self._set

    def __eq__(self, other):
        return (isinstance(other, TranslationLexicon)
                and self._pairs == other._pairs)

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def __repr__(self):
        return '<TranslationLexicon {} pairs>'.format(len(self))

    @property
    def pairs(self):
        return self._pairs

    @property
    def sources(self):
        return list(OrderedDict.fromkeys(src for src, _ in self._pairs))

    @property
    def targets(self):
        return list(OrderedDict.fromkeys(tgt for _, tgt in self._pairs))

    def grouped(self):
        '''Source word -> list of its translations, in first-seen order.'''
        groups = OrderedDict()
        for src, tgt in self._pairs:
            groups.setdefault(src, []).append(tgt)
        return groups

    def head(self, n):
        return TranslationLexicon(self._pairs[:n])

    def union(self, other):
        return TranslationLexicon(self._pairs + tuple(other))

    def intersection(self, other):
        other = other if isinstance(other, TranslationLexicon) else \
            TranslationLexicon(other)
        return TranslationLexicon(p for p in self._pairs if p in other)

    def reversed(self):
        return TranslationLexicon((tgt, src) for src, tgt in self._pairs)


def load_lexicon(path):
    '''Read "source<TAB>target" (or whitespace separated) lines.'''
    pairs = []
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            fields = line.split('\t') if '\t' in line else line.split()
            fields = [f.strip() for f in fields]
            if len(fields) != 2 or not all(fields):
                raise errors.ParseError(
                    path, lineno,
                    'expected 2 fields, got {}'.format(len(fields)))
            pairs.append(tuple(fields))
    lexicon = TranslationLexicon(pairs)
    if len(lexicon) < len(pairs):
        logger.info('%s: dropped %d duplicate pairs',
                    path, len(pairs) - len(lexicon))
    logger.info('Loaded %d pairs from %s', len(lexicon), path)
    return lexicon


def save_lexicon(lexicon, path):
    with output.writing(path) as fid:
        for src, tgt in lexicon:
            fid.write('{}\t{}\n'.format(src, tgt))


def frequency_split(lexicon, train_sizes, test_size):
    '''Nested training prefixes plus a disjoint test set.

    The test set is the test_size pairs following the largest training
    prefix, minus any pair whose source word appears in that prefix.
    '''
    sizes = [int(size) for size in train_sizes]
    if not sizes or min(sizes) < 1:
        raise errors.LexiconError('training sizes must be positive')
    if test_size < 1:
        raise errors.LexiconError('test size must be positive')
    largest = max(sizes)
    if largest + test_size > len(lexicon):
        raise errors.LexiconError(
            'need {} pairs for the split, dictionary has {}'.format(
                largest + test_size, len(lexicon)))
    pairs = lexicon.pairs
    trains = [TranslationLexicon(pairs[:size]) for size in sizes]
    seen = set(src for src, _ in pairs[:largest])
    candidates = pairs[largest:largest + test_size]
    test = TranslationLexicon(p for p in candidates if p[0] not in seen)
    if len(test) < len(candidates):
        logger.warning(
            'dropped %d test pairs whose source word is in the training set',
            len(candidates) - len(test))
    return trains, test


class AlignedMatrices(object):
    '''Row-aligned source and target matrices for the in-vocabulary pairs.'''

    def __init__(self, src, tgt, kept_pairs, src_indices, tgt_indices, total):
        self.src = src
        self.tgt = tgt
        self.kept_pairs = kept_pairs
        self.src_indices = src_indices
        self.tgt_indices = tgt_indices
        self.total = total

    def __len__(self):
        return len(self.kept_pairs)

    @property
    def skipped(self):
        return self.total - len(self.kept_pairs)

    @property
    def coverage(self):
        return len(self.kept_pairs) / float(self.total) if self.total else 0.0


def build_aligned_matrices(lexicon, src_space, tgt_space):
    src_idx, tgt_idx, kept = [], [], []
    for src, tgt in lexicon:
        i = src_space.index.get(src)
        j = tgt_space.index.get(tgt)
        if i is None or j is None:
            continue
        src_idx.append(i)
        tgt_idx.append(j)
        kept.append((src, tgt))
    if not kept:
        raise errors.LexiconError(
            'none of the {} dictionary pairs is in both vocabularies'.format(
                len(lexicon)))
    skipped = len(lexicon) - len(kept)
    if skipped:
        logger.info('%d of %d dictionary pairs are out of vocabulary',
                    skipped, len(lexicon))
    src_idx = np.array(src_idx, dtype=np.intp)
    tgt_idx = np.array(tgt_idx, dtype=np.intp)
    return AlignedMatrices(
        src_space.matrix[src_idx], tgt_space.matrix[tgt_idx],
        TranslationLexicon(kept), src_idx, tgt_idx, len(lexicon))


def _check_metric(metric):
    if metric not in METRICS:
        raise errors.ConfigError(
            'unknown metric {!r}; choose from {}'.format(
                metric, ', '.join(METRICS)))


def nearest_indices(queries, candidates, metric=COSINE, csls_k=CSLS_K,
                    keep_prob=1.0, rng=None):
    '''Index of the best candidate for every query row, and its score.

    With csls the candidate's mean similarity to its csls_k nearest queries
    is subtracted (half of it, which leaves the argmax unchanged).
    '''
    _check_metric(metric)
    queries = numerics.unit_rows(queries)
    candidates = numerics.unit_rows(candidates)
    penalty = None
    if metric == CSLS:
        penalty = 0.5 * numerics.mean_top_k(candidates, queries, csls_k)
    return numerics.nearest(queries, candidates, penalty, keep_prob, rng)


def mutual_nn_indices(a, b, metric=COSINE, csls_k=CSLS_K, keep_prob=1.0,
                      rng=None):
    '''Row pairs (i, j) that are each other's nearest neighbour.

    Returns source indices, target indices and the mean of the best
    forward and backward scores.
    '''
    if not len(a) or not len(b):
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, 0.0
    fwd, fwd_best = nearest_indices(a, b, metric, csls_k, keep_prob, rng)
    bwd, bwd_best = nearest_indices(b, a, metric, csls_k, keep_prob, rng)
    rows = np.flatnonzero(bwd[fwd] == np.arange(len(a)))
    objective = (fwd_best.mean() + bwd_best.mean()) / 2.0
    return rows, fwd[rows], float(objective)


def union_nn_indices(a, b, metric=COSINE, csls_k=CSLS_K, keep_prob=1.0,
                     rng=None):
    '''Forward pairs (i, nn(i)) together with backward pairs (nn(j), j).

    Pairs are ordered by source then target index, without duplicates.
    The objective is the same as for mutual_nn_indices.
    '''
    if not len(a) or not len(b):
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, 0.0
    fwd, fwd_best = nearest_indices(a, b, metric, csls_k, keep_prob, rng)
    bwd, bwd_best = nearest_indices(b, a, metric, csls_k, keep_prob, rng)
    rows = np.concatenate([np.arange(len(a)), bwd])
    cols = np.concatenate([fwd, np.arange(len(b))])
    keys = np.unique(rows * len(b) + cols)
    objective = (fwd_best.mean() + bwd_best.mean()) / 2.0
    return keys // len(b), keys % len(b), float(objective)


def mutual_nearest_neighbors(src_proj, tgt_proj, src_words, tgt_words,
                             metric=COSINE, search_cap=SEARCH_CAP,
                             csls_k=CSLS_K):
    '''Dictionary of mutual nearest neighbours among the top search_cap words.'''
    rows, cols, _ = mutual_nn_indices(
        src_proj[:search_cap], tgt_proj[:search_cap], metric, csls_k)
    return TranslationLexicon(
        (src_words[i], tgt_words[j]) for i, j in zip(rows, cols))
