'''Bilingual lexicon induction scoring and significance testing.'''

from collections import OrderedDict, namedtuple
import io
import logging

import numpy as np
from lazy_property import LazyProperty
from scipy import stats
from tornado.template import Template

from clecli import errors, lexicon as lex, numerics, output, ui

logger = logging.getLogger('cle.evaluation')

SUCCESS_THRESHOLD = 0.05
SHUFFLE_MIN_ITERATIONS = 100
PRECISION_CUTOFFS = (1, 5, 10)

QueryRecord = namedtuple('QueryRecord', 'word golds rank average_precision')
TableRow = namedtuple('TableRow', 'method all_pairs filtered successful')


def neighborhood_means(queries, candidates, n=10):
    '''Mean cosine of every query to its n nearest candidates.'''
    if n > len(candidates):
        logger.warning('neighborhood %d clamped to %d candidates',
                       n, len(candidates))
        n = len(candidates)
    if n < 1:
        raise errors.EvaluationError('neighborhood must be >= 1')
    return numerics.mean_top_k(
        numerics.unit_rows(queries), numerics.unit_rows(candidates), n)


def csls_scores(query, candidates, query_r, candidate_r):
    '''2 cos(q, c) - r_T(c) - r_S(q) for every candidate row c.'''
    q = numerics.unit_rows(np.atleast_2d(query))[0]
    cos = numerics.unit_rows(candidates).dot(q)
    return 2.0 * cos - np.asarray(candidate_r) - query_r


def rank_of(scores, j):
    '''1-based rank of candidate j; ties go to the lower index.'''
    s = scores[j]
    return 1 + int(np.count_nonzero(scores > s)) + \
        int(np.count_nonzero(scores[:j] == s))


def average_precision(ranks):
    ranks = np.sort(np.asarray(ranks, dtype=np.float64))
    if not ranks.size:
        return 0.0
    return float(np.mean(np.arange(1, len(ranks) + 1) / ranks))


class BliResult(ui.Renderable):

    TMPL = Template('''\
{% raw ui.title('BLI') %} {% raw obj.label %} ({% raw obj.metric %})
  queries     {% raw obj.queries %} (skipped {% raw obj.oov %})
  MAP         {% raw ui.score(obj.map) %}
{% for k in obj.cutoffs %}  P@{% raw str(k).ljust(9) %} {% raw ui.score(obj.precision_at(k)) %}
{% end %}  successful  {% raw ui.success(obj.successful) %}
''')

    cutoffs = PRECISION_CUTOFFS

    def __init__(self, records, oov=0, metric=lex.COSINE, label=''):
        self.records = list(records)
        self.oov = oov
        self.metric = metric
        self.label = label

    @property
    def queries(self):
        return len(self.records)

    @LazyProperty
    def map(self):
        if not self.records:
            return 0.0
        return float(np.mean([r.average_precision for r in self.records]))

    def precision_at(self, k):
        if not self.records:
            return 0.0
        return float(np.mean([r.rank <= k for r in self.records]))

    @property
    def successful(self):
        return self.map >= SUCCESS_THRESHOLD

    def summary(self):
        data = {
            'map': self.map,
            'queries': self.queries,
            'oov': self.oov,
            'metric': self.metric,
            'successful': self.successful,
        }
        for k in self.cutoffs:
            data['p_at_{}'.format(k)] = self.precision_at(k)
        return data


def bli_evaluate(pair, src_space, tgt_space, test, metric=lex.COSINE,
                 neighborhood=10, batch=1024):
    '''Rank the whole target vocabulary for every test source word.

    A query is skipped (counted as oov) when its source word or all of its
    gold translations are out of vocabulary.
    '''
    if metric not in lex.METRICS:
        raise errors.EvaluationError('unknown metric {!r}'.format(metric))
    queries = []
    oov = 0
    for word, golds in test.grouped().items():
        i = src_space.index.get(word)
        known = [g for g in golds if g in tgt_space.index]
        if i is None or not known:
            oov += 1
            continue
        queries.append((word, known, i, [tgt_space.index[g] for g in known]))
    if not queries:
        raise errors.EvaluationError(
            'no test query has its source word and a gold translation in '
            'the vocabularies')
    if oov:
        logger.info('%d of %d test queries are out of vocabulary',
                    oov, oov + len(queries))

    src_proj = numerics.unit_rows(pair.project_source(src_space.matrix))
    tgt_proj = numerics.unit_rows(pair.project_target(tgt_space.matrix))
    penalty = None
    if metric == lex.CSLS:
        penalty = neighborhood_means(tgt_proj, src_proj, neighborhood)

    rows = np.array([q[2] for q in queries], dtype=np.intp)
    records = []
    for start in range(0, len(rows), batch):
        block = src_proj[rows[start:start + batch]].dot(tgt_proj.T)
        if penalty is not None:
            block = 2.0 * block - penalty[None, :]
        for scores, (word, golds, _, gold_idx) in zip(
                block, queries[start:start + batch]):
            ranks = [rank_of(scores, j) for j in gold_idx]
            records.append(QueryRecord(
                word, tuple(golds), min(ranks), average_precision(ranks)))
    return BliResult(records, oov, metric)


def write_bli_report(result, path):
    '''One "word<TAB>golds<TAB>rank<TAB>ap" line per scored query.'''
    with output.writing(path) as fid:
        for r in result.records:
            fid.write('{}\t{}\t{}\t{!r}\n'.format(
                r.word, ','.join(r.golds), r.rank, r.average_precision))


def read_bli_report(path):
    records = []
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            line = line.rstrip('\r\n')
            if not line:
                continue
            fields = line.split('\t')
            if len(fields) != 4:
                raise errors.ParseError(path, lineno, 'expected 4 fields')
            try:
                records.append(QueryRecord(
                    fields[0], tuple(fields[1].split(',')), int(fields[2]),
                    float(fields[3])))
            except ValueError:
                raise errors.ParseError(path, lineno, 'bad rank or score')
    return records


def _paired(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise errors.EvaluationError(
            'paired samples must have equal lengths, got {} and {}'.format(
                a.shape, b.shape))
    if len(a) < 2:
        raise errors.EvaluationError('need at least 2 paired samples')
    return a, b


def paired_ttest(a, b):
    '''Two-sided p-value of a paired t-test on per-item scores.'''
    a, b = _paired(a, b)
    diff = a - b
    if np.all(diff == 0):
        return 1.0
    if np.all(diff == diff[0]):
        return 0.0
    return float(stats.ttest_rel(a, b).pvalue)


def bonferroni(alpha, comparisons):
    if not 0 < alpha < 1:
        raise errors.EvaluationError('alpha must be in (0, 1)')
    if comparisons < 1:
        raise errors.EvaluationError('number of comparisons must be >= 1')
    return alpha / comparisons


def shuffling_test(a, b, iterations=10000, seed=0, batch=1000):
    '''Approximate randomization: randomly swap the two systems' scores.

    Returns (count + 1) / (iterations + 1), count being the shuffles whose
    absolute mean difference reaches the observed one.
    '''
    a, b = _paired(a, b)
    if iterations < SHUFFLE_MIN_ITERATIONS:
        raise errors.EvaluationError(
            'shuffling test needs at least {} iterations'.format(
                SHUFFLE_MIN_ITERATIONS))
    diff = a - b
    n = len(diff)
    observed = abs(diff.mean())
    rng = np.random.default_rng(seed)
    count = done = 0
    while done < iterations:
        size = min(batch, iterations - done)
        signs = np.where(rng.random((size, n)) < 0.5, -1.0, 1.0)
        shuffled = np.abs(signs.dot(diff)) / n
        count += int(np.count_nonzero(shuffled >= observed - 1e-12))
        done += size
    return (count + 1.0) / (iterations + 1.0)


def rank_correlation(xs, ys, kind='spearman'):
    xs, ys = _paired(xs, ys)
    if len(xs) < 3:
        raise errors.EvaluationError('correlation needs at least 3 points')
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise errors.EvaluationError('correlation undefined: zero variance')
    if kind == 'pearson':
        return float(stats.pearsonr(xs, ys)[0])
    if kind == 'spearman':
        return float(stats.spearmanr(xs, ys)[0])
    raise errors.EvaluationError(
        'unknown correlation {!r}; choose pearson or spearman'.format(kind))


class SignificanceReport(ui.Renderable):

    TMPL = Template('''\
{% raw ui.title('Significance') %} {% raw obj.test %}, alpha {% raw obj.alpha %} / {% raw obj.comparisons %} comparisons = threshold {% raw ui.pvalue(obj.threshold) %}
{% for label, p in obj.p_values %}  {% raw ui.ltrunc(label, 40) %} p={% raw ui.pvalue(p) %}  {% raw ui.verdict(obj.significant(p)) %}
{% end %}''')

    def __init__(self, test, p_values, alpha=0.05, comparisons=1):
        self.test = test
        self.p_values = list(p_values)
        self.alpha = alpha
        self.comparisons = comparisons
        self.threshold = bonferroni(alpha, comparisons)

    def significant(self, p):
        return p < self.threshold

    def summary(self):
        return {
            'test': self.test,
            'alpha': self.alpha,
            'comparisons': self.comparisons,
            'threshold': self.threshold,
            'results': [
                {'label': label, 'p_value': float(p),
                 'significant': self.significant(p)}
                for label, p in self.p_values],
        }


class ResultTable(ui.Renderable):
    '''Mean MAP per method over all pairs and over the pairs every method
    solved (Filt), with the count of successful pairs.'''

    TMPL = Template('''\
{% raw ui.bold(ui.ltrunc('method', 16)) %} {% raw ui.bold('All'.rjust(8)) %} {% raw ui.bold('Filt'.rjust(8)) %} {% raw ui.bold('Succ'.rjust(8)) %}
{% for row in obj.rows %}{% raw ui.ltrunc(row.method, 16) %} {% raw ui.score(row.all_pairs).rjust(8) %} {% raw ui.score(row.filtered).rjust(8) %} {% raw row.successful.rjust(8) %}
{% end %}''')

    def __init__(self, rows, filtered_pairs=()):
        self.rows = list(rows)
        self.filtered_pairs = list(filtered_pairs)


def results_table(summaries):
    '''Aggregate summaries (dicts with method, pair, map, successful).'''
    methods = list(OrderedDict.fromkeys(s['method'] for s in summaries))
    pairs = list(OrderedDict.fromkeys(s['pair'] for s in summaries))
    by_key = {(s['method'], s['pair']): s for s in summaries}
    solved = [
        p for p in pairs
        if all((m, p) in by_key and by_key[(m, p)]['successful']
               for m in methods)]
    rows = []
    for method in methods:
        runs = [by_key[(method, p)] for p in pairs if (method, p) in by_key]
        filtered = [by_key[(method, p)]['map'] for p in solved]
        rows.append(TableRow(
            method,
            float(np.mean([r['map'] for r in runs])),
            float(np.mean(filtered)) if filtered else None,
            '{}/{}'.format(sum(bool(r['successful']) for r in runs), len(runs))))
    return ResultTable(rows, solved)
