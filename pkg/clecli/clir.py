'''Cross-lingual document retrieval through a shared embedding space.

Queries and documents are represented by the weighted average of their
word vectors, mapped into the shared space and ranked by cosine.
'''

from collections import Counter, OrderedDict, namedtuple
import io
import logging
import math
import unicodedata

import numpy as np
from lazy_property import LazyProperty
from tornado.template import Template

from clecli import errors, evaluation, numerics, output, ui

logger = logging.getLogger('cle.clir')

UNIFORM = 'uniform'
IDF = 'idf'
WEIGHTINGS = (UNIFORM, IDF)
RUN_TAG = 'clecli'

Aggregate = namedtuple('Aggregate', 'vector weight in_vocabulary oov')


def tokenize(text):
    '''Lowercased whitespace tokens, punctuation removed, length > 1.'''
    kept = ''.join(
        ch for ch in text if not unicodedata.category(ch).startswith('P'))
    return [tok for tok in kept.lower().split() if len(tok) > 1]


def _read_texts(path):
    texts = OrderedDict()
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            if '\t' not in line:
                raise errors.ParseError(path, lineno, 'expected "id<TAB>text"')
            ident, text = line.split('\t', 1)
            ident = ident.strip()
            if not ident:
                raise errors.ParseError(path, lineno, 'empty id')
            if ident in texts:
                raise errors.ParseError(
                    path, lineno, 'duplicate id {!r}'.format(ident))
            texts[ident] = tokenize(text)
    return texts


def _read_qrels(path, queries, docs):
    qrels = OrderedDict()
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 4:
                raise errors.ParseError(
                    path, lineno, 'expected "qid iter docid relevance"')
            qid, _, docid, rel = fields
            try:
                rel = int(rel)
            except ValueError:
                raise errors.ParseError(path, lineno, 'relevance must be int')
            if qid not in queries:
                raise errors.ParseError(
                    path, lineno, 'unknown query id {!r}'.format(qid))
            if docid not in docs:
                raise errors.ParseError(
                    path, lineno, 'unknown document id {!r}'.format(docid))
            if rel > 0:
                qrels.setdefault(qid, set()).add(docid)
    return qrels


class DocumentCollection(object):

    def __init__(self, docs, queries, qrels):
        self.docs = docs
        self.queries = queries
        self.qrels = qrels

    def relevant(self, qid):
        return self.qrels.get(qid, set())

    @LazyProperty
    def doc_ids(self):
        return sorted(self.docs)


def ingest_collection(docs_path, queries_path, qrels_path):
    docs = _read_texts(docs_path)
    queries = _read_texts(queries_path)
    if not docs or not queries:
        raise errors.EvaluationError('empty document or query collection')
    qrels = _read_qrels(qrels_path, queries, docs)
    logger.info('Loaded %d documents, %d queries, %d judged queries',
                len(docs), len(queries), len(qrels))
    return DocumentCollection(docs, queries, qrels)


class TermWeighting(object):
    '''Per-token weights: uniform, or idf = ln(N / df).

    Tokens never seen in the documents get ln(N), as if df were 1. Tokens
    found in every document weigh 0, so a text made only of them has no
    direction; runs report such texts as zero-weight, apart from the texts
    with no in-vocabulary words at all.
    '''

    def __init__(self, scheme=IDF, idf=None, default=0.0):
        if scheme not in WEIGHTINGS:
            raise errors.ConfigError(
                'unknown weighting {!r}; choose from {}'.format(
                    scheme, ', '.join(WEIGHTINGS)))
        self.scheme = scheme
        self.idf = idf or {}
        self.default = default

    @classmethod
    def from_collection(cls, collection, scheme=IDF):
        if scheme == UNIFORM:
            return cls(UNIFORM)
        n = float(len(collection.docs))
        df = Counter()
        for tokens in collection.docs.values():
            df.update(set(tokens))
        idf = {tok: math.log(n / max(count, 1)) for tok, count in df.items()}
        return cls(IDF, idf, math.log(n))

    def weight(self, token):
        if self.scheme == UNIFORM:
            return 1.0
        return self.idf.get(token, self.default)


def aggregate_text(tokens, space, weighting):
    '''Weighted mean of the in-vocabulary token vectors (zero if none).'''
    vector = np.zeros(space.dim)
    total = 0.0
    used = oov = 0
    for tok in tokens:
        i = space.index.get(tok)
        if i is None:
            oov += 1
            continue
        w = weighting.weight(tok)
        vector += w * space.matrix[i]
        total += w
        used += 1
    if total > 0:
        vector /= total
    else:
        vector[:] = 0.0
    return Aggregate(vector, total, used, oov)


class ClirRun(ui.Renderable):

    TMPL = Template('''\
{% raw ui.title('CLIR') %} {% raw obj.label %}
  queries     {% raw len(obj.rankings) %} (scored {% raw len(obj.average_precisions) %}, no relevant docs {% raw len(obj.excluded) %})
  empty       {% raw len(obj.empty) %} (zero weight {% raw len(obj.zero_weight) %})
  MAP         {% raw ui.score(obj.map) %}
''')

    def __init__(self, rankings, average_precisions, qrels, excluded=(),
                 empty=(), zero_weight=(), label=''):
        self.rankings = rankings
        self.average_precisions = average_precisions
        self.qrels = qrels
        self.excluded = list(excluded)
        self.empty = list(empty)
        self.zero_weight = list(zero_weight)
        self.label = label

    @property
    def map(self):
        if not self.average_precisions:
            return 0.0
        return float(np.mean(list(self.average_precisions.values())))

    def relevant_ranks(self):
        '''(qid, docid) -> rank of every relevant document.'''
        ranks = OrderedDict()
        for qid, ranking in self.rankings.items():
            relevant = self.qrels.get(qid, set())
            for pos, (docid, _) in enumerate(ranking, 1):
                if docid in relevant:
                    ranks[(qid, docid)] = pos
        return ranks

    def summary(self):
        return {
            'map': self.map,
            'queries': len(self.rankings),
            'scored_queries': len(self.average_precisions),
            'excluded_queries': len(self.excluded),
            'empty_queries': len(self.empty),
            'zero_weight_queries': len(self.zero_weight),
        }


def clir_run(collection, pair, query_space, doc_space, weighting=None):
    '''Rank every document for every query; ties go to the smaller doc id.'''
    weighting = weighting or TermWeighting.from_collection(collection)
    doc_ids = collection.doc_ids
    doc_vectors = []
    empty_docs = zero_docs = 0
    for docid in doc_ids:
        agg = aggregate_text(collection.docs[docid], doc_space, weighting)
        empty_docs += agg.in_vocabulary == 0
        zero_docs += agg.in_vocabulary > 0 and agg.weight == 0
        doc_vectors.append(agg.vector)
    if empty_docs:
        logger.warning('%d documents have no in-vocabulary words', empty_docs)
    if zero_docs:
        logger.warning('%d documents only have words of weight 0', zero_docs)
    docs = numerics.unit_rows(pair.project_target(np.vstack(doc_vectors)))
    order_key = np.arange(len(doc_ids))

    rankings = OrderedDict()
    aps = OrderedDict()
    excluded, empty, zero_weight = [], [], []
    for qid, tokens in collection.queries.items():
        agg = aggregate_text(tokens, query_space, weighting)
        if agg.in_vocabulary == 0:
            empty.append(qid)
        elif agg.weight == 0:
            zero_weight.append(qid)
        query = numerics.unit_rows(pair.project_source(agg.vector[None, :]))[0]
        scores = docs.dot(query)
        order = np.lexsort((order_key, -scores))
        ranking = [(doc_ids[k], float(scores[k])) for k in order]
        rankings[qid] = ranking
        relevant = collection.relevant(qid)
        if not relevant:
            excluded.append(qid)
            continue
        ranks = [pos for pos, (docid, _) in enumerate(ranking, 1)
                 if docid in relevant]
        aps[qid] = evaluation.average_precision(ranks)
    if empty:
        logger.warning('%d queries have no in-vocabulary words', len(empty))
    if zero_weight:
        logger.warning('%d queries only have words of weight 0',
                       len(zero_weight))
    if excluded:
        logger.info('%d queries have no relevant documents and are not '
                    'scored', len(excluded))
    return ClirRun(rankings, aps, collection.qrels, excluded, empty,
                   zero_weight)


def write_trec_run(run, path, tag=RUN_TAG):
    '''TREC format: "qid Q0 docid rank score tag".'''
    with output.writing(path) as fid:
        for qid, ranking in run.rankings.items():
            for pos, (docid, score) in enumerate(ranking, 1):
                fid.write('{} Q0 {} {} {:.6f} {}\n'.format(
                    qid, docid, pos, score, tag))


def read_trec_run(path):
    '''qid -> [(docid, rank, score)] in file order.'''
    runs = OrderedDict()
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 6:
                raise errors.ParseError(path, lineno, 'expected 6 fields')
            qid, _, docid, rank, score, _ = fields
            try:
                runs.setdefault(qid, []).append(
                    (docid, int(rank), float(score)))
            except ValueError:
                raise errors.ParseError(path, lineno, 'bad rank or score')
    return runs


def write_rank_report(run, path):
    with output.writing(path) as fid:
        for (qid, docid), rank in run.relevant_ranks().items():
            fid.write('{}\t{}\t{}\n'.format(qid, docid, rank))


def read_rank_report(path):
    ranks = OrderedDict()
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise errors.ParseError(path, lineno, 'expected 3 fields')
            try:
                ranks[(fields[0], fields[1])] = int(fields[2])
            except ValueError:
                raise errors.ParseError(path, lineno, 'rank must be int')
    return ranks


def paired_ranks(ranks_a, ranks_b):
    if set(ranks_a) != set(ranks_b):
        raise errors.EvaluationError(
            'runs were scored against different relevance judgements')
    keys = sorted(ranks_a)
    return [ranks_a[k] for k in keys], [ranks_b[k] for k in keys]


def rank_significance(ranks_a, ranks_b):
    '''Paired t-test on the ranks of the relevant documents.'''
    a, b = paired_ranks(ranks_a, ranks_b)
    return evaluation.paired_ttest(a, b)


def clir_significance(run_a, run_b):
    return rank_significance(run_a.relevant_ranks(), run_b.relevant_ranks())
