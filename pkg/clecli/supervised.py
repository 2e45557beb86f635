'''Projection-based aligners learned from a seed translation dictionary.'''

import logging
import os

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from clecli import embeddings, errors, lexicon as lex, numerics, output

logger = logging.getLogger('cle.supervised')

SRC_MATRIX = 'w_src.txt'
TGT_MATRIX = 'w_tgt.txt'
META = 'meta.yaml'
DICTIONARY = 'dictionary.txt'


class ProjectionPair(object):
    '''Maps both spaces into a shared space: X_S.w_src and X_T.w_tgt.

    For orthogonal methods w_tgt is the identity and w_src is orthogonal.
    '''

    def __init__(self, w_src, w_tgt=None, orthogonal_src=False, method='',
                 meta=None, lexicon=None, plan=None):
        w_src = np.array(w_src, dtype=np.float64, ndmin=2)
        if w_tgt is None:
            w_tgt = np.eye(w_src.shape[1])
        w_tgt = np.array(w_tgt, dtype=np.float64, ndmin=2)
        if w_src.shape[1] != w_tgt.shape[1]:
            raise errors.AlignmentError(
                'projections disagree on the shared dimension: {} vs {}'.format(
                    w_src.shape, w_tgt.shape))
        if orthogonal_src and not numerics.is_orthogonal(w_src):
            raise errors.AlignmentError('source projection is not orthogonal')
        self.w_src = w_src
        self.w_tgt = w_tgt
        self.orthogonal_src = bool(orthogonal_src)
        self.method = method
        self.meta = dict(meta or {})
        self.lexicon = lexicon
        self.plan = plan

    def __repr__(self):
        return '<ProjectionPair {} {}x{} -> {}>'.format(
            self.method, self.src_dim, self.tgt_dim, self.dim)

    @property
    def src_dim(self):
        return self.w_src.shape[0]

    @property
    def tgt_dim(self):
        return self.w_tgt.shape[0]

    @property
    def dim(self):
        return self.w_src.shape[1]

    def project_source(self, matrix):
        return np.dot(matrix, self.w_src)

    def project_target(self, matrix):
        return np.dot(matrix, self.w_tgt)

    def apply(self, src_space, tgt_space):
        '''Both spaces mapped into the shared space.'''
        return (src_space.with_matrix(self.project_source(src_space.matrix)),
                tgt_space.with_matrix(self.project_target(tgt_space.matrix)))

    def swapped(self):
        '''The same alignment used in the target -> source direction.'''
        return ProjectionPair(
            self.w_tgt, self.w_src,
            orthogonal_src=numerics.is_orthogonal(self.w_tgt),
            method=self.method, meta=self.meta,
            lexicon=self.lexicon.reversed() if self.lexicon else None)

    def metadata(self):
        meta = dict(self.meta)
        meta.update(
            method=self.method,
            orthogonal_src=self.orthogonal_src,
            src_dim=int(self.src_dim),
            tgt_dim=int(self.tgt_dim),
            shared_dim=int(self.dim),
        )
        return meta


def save_projection(pair, directory, meta=None):
    '''Write all projection files, or none of them.'''
    with output.staging(directory) as tmp:
        embeddings.save_matrix(pair.w_src, os.path.join(tmp, SRC_MATRIX))
        embeddings.save_matrix(pair.w_tgt, os.path.join(tmp, TGT_MATRIX))
        if pair.lexicon is not None:
            lex.save_lexicon(pair.lexicon, os.path.join(tmp, DICTIONARY))
        data = pair.metadata()
        data.update(meta or {})
        output.write_yaml(data, os.path.join(tmp, META))
    logger.info('Saved %s projection to %s', pair.method, directory)


def load_projection(directory):
    for name in (SRC_MATRIX, TGT_MATRIX):
        if not os.path.exists(os.path.join(directory, name)):
            raise errors.AlignmentError(
                '{}: not a projection directory (missing {})'.format(
                    directory, name))
    w_src = embeddings.load_matrix(os.path.join(directory, SRC_MATRIX))
    w_tgt = embeddings.load_matrix(os.path.join(directory, TGT_MATRIX))
    meta_path = os.path.join(directory, META)
    meta = output.read_yaml(meta_path) if os.path.exists(meta_path) else {}
    dictionary = os.path.join(directory, DICTIONARY)
    lexicon = lex.load_lexicon(dictionary) \
        if os.path.exists(dictionary) else None
    return ProjectionPair(
        w_src, w_tgt,
        orthogonal_src=numerics.is_orthogonal(w_src),
        method=meta.get('method', ''), meta=meta, lexicon=lexicon)


def _procrustes(aligned):
    w, s = numerics.solve_procrustes(aligned.src, aligned.tgt, full=True)
    deficient = numerics.numerical_rank(s, aligned.src.shape) < len(s)
    if deficient:
        logger.warning(
            'cross-covariance is rank deficient (%d pairs, d=%d); '
            'the orthogonal solution is not unique',
            len(aligned), aligned.src.shape[1])
    return w, deficient


def align_proc(aligned):
    '''Orthogonal Procrustes on the seed dictionary.'''
    w, deficient = _procrustes(aligned)
    meta = {
        'dictionary_size': len(aligned),
        'rank_deficient': deficient,
    }
    return ProjectionPair(w, orthogonal_src=True, method='proc', meta=meta,
                          lexicon=aligned.kept_pairs)


def align_proc_b(src_space, tgt_space, seed, iters=1,
                 search_cap=lex.SEARCH_CAP, metric=lex.COSINE,
                 csls_k=lex.CSLS_K):
    '''Procrustes bootstrapping.

    Every iteration solves Procrustes in both directions, then adds to the
    dictionary the pairs on which the two directions agree (each word is
    the other's nearest neighbour). The seed pairs are never dropped.
    iters=1 is plain Procrustes.
    '''
    if iters < 1:
        raise errors.AlignmentError('proc-b needs iters >= 1')
    aligned = lex.build_aligned_matrices(seed, src_space, tgt_space)
    if len(aligned) < 2:
        raise errors.AlignmentError(
            'proc-b needs at least 2 seed pairs in both vocabularies')
    dictionary = aligned.kept_pairs
    sizes = []
    empty_rounds = 0
    src_head = src_space.matrix[:search_cap]
    tgt_head = tgt_space.matrix[:search_cap]
    for it in range(iters):
        aligned = lex.build_aligned_matrices(dictionary, src_space, tgt_space)
        w12, deficient = _procrustes(aligned)
        sizes.append(len(dictionary))
        if it == iters - 1:
            break
        w21 = numerics.solve_procrustes(aligned.tgt, aligned.src)
        d12, _ = lex.nearest_indices(src_head.dot(w12), tgt_head, metric, csls_k)
        d21, _ = lex.nearest_indices(tgt_head.dot(w21), src_head, metric, csls_k)
        rows = np.flatnonzero(d21[d12] == np.arange(len(d12)))
        found = lex.TranslationLexicon(
            (src_space.words[i], tgt_space.words[d12[i]]) for i in rows)
        if not len(found):
            empty_rounds += 1
            logger.warning('proc-b iteration %d found no mutual pairs', it + 1)
        dictionary = dictionary.union(found)
        logger.info('proc-b iteration %d: %d mutual pairs, dictionary %d',
                    it + 1, len(found), len(dictionary))
    meta = {
        'iters': iters,
        'seed_size': sizes[0],
        'dictionary_size': len(dictionary),
        'dictionary_sizes': sizes,
        'augmentation_empty': empty_rounds > 0,
        'rank_deficient': deficient,
        'metric': metric,
        'search_cap': search_cap,
    }
    return ProjectionPair(w12, orthogonal_src=True, method='proc-b',
                          meta=meta, lexicon=dictionary)


def align_cca(aligned, keep_dims='all', epsilon=1e-8):
    if len(aligned) < 2:
        raise errors.AlignmentError('cca needs at least 2 dictionary pairs')
    res = numerics.solve_cca(aligned.src, aligned.tgt, keep_dims, epsilon)
    meta = {
        'dictionary_size': len(aligned),
        'epsilon': epsilon,
        'correlations': [float(c) for c in res.correlations],
    }
    return ProjectionPair(res.A, res.B, orthogonal_src=False, method='cca',
                          meta=meta, lexicon=aligned.kept_pairs)


def dlv_matching(a, b, cand_per_node=10):
    '''Maximum-similarity full matching of the rows of a to rows of b.

    Only the cand_per_node strongest edges of every row and every column
    are kept. Returns (rows, cols), or None when the sparsified graph has
    no full matching.
    '''
    sims = a.dot(b.T)
    n, m = sims.shape
    k_row = min(cand_per_node, m)
    k_col = min(cand_per_node, n)
    mask = np.zeros(sims.shape, dtype=bool)
    best_in_row = np.argpartition(-sims, k_row - 1, axis=1)[:, :k_row]
    mask[np.arange(n)[:, None], best_in_row] = True
    best_in_col = np.argpartition(-sims, k_col - 1, axis=0)[:k_col, :]
    mask[best_in_col, np.arange(m)[None, :]] = True
    r, c = np.nonzero(mask)
    # offset keeps every stored weight strictly positive
    graph = sparse.csr_matrix((2.0 - sims[r, c], (r, c)), shape=sims.shape)
    try:
        return csgraph.min_weight_full_bipartite_matching(graph)
    except ValueError:
        return None


def align_dlv(src_space, tgt_space, seed, em_iters=3, cand_per_node=10,
              match_cap=2500):
    '''Procrustes alternated with a one-to-one matching of frequent words.'''
    aligned = lex.build_aligned_matrices(seed, src_space, tgt_space)
    seed = aligned.kept_pairs
    w, _ = _procrustes(aligned)
    dictionary = seed
    cap = min(match_cap, len(src_space), len(tgt_space))
    tgt_unit = numerics.unit_rows(tgt_space.matrix[:cap])
    fallbacks = 0
    for it in range(em_iters):
        src_unit = numerics.unit_rows(src_space.matrix[:cap].dot(w))
        matching = dlv_matching(src_unit, tgt_unit, cand_per_node)
        if matching is None:
            fallbacks += 1
            logger.warning('dlv iteration %d: no full matching, using mutual '
                           'nearest neighbours', it + 1)
            rows, cols, _ = lex.mutual_nn_indices(src_unit, tgt_unit)
        else:
            rows, cols = matching
        matched = lex.TranslationLexicon(
            (src_space.words[i], tgt_space.words[j]) for i, j in zip(rows, cols))
        dictionary = seed.union(matched)
        aligned = lex.build_aligned_matrices(dictionary, src_space, tgt_space)
        w, _ = _procrustes(aligned)
        logger.info('dlv iteration %d: %d matched pairs', it + 1, len(matched))
    meta = {
        'em_iters': em_iters,
        'cand_per_node': cand_per_node,
        'match_cap': cap,
        'seed_size': len(seed),
        'dictionary_size': len(dictionary),
        'matching_fallbacks': fallbacks,
    }
    return ProjectionPair(w, orthogonal_src=True, method='dlv', meta=meta,
                          lexicon=dictionary)


class RcslsConfig(object):

    def __init__(self, neighborhood=10, learning_rate=1.0, epochs=10,
                 spectral=False, patience=10):
        if neighborhood < 1:
            raise errors.ConfigError('rcsls neighborhood must be >= 1')
        if learning_rate <= 0:
            raise errors.ConfigError('rcsls learning rate must be positive')
        self.neighborhood = neighborhood
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.spectral = spectral
        self.patience = patience


class RcslsObjective(object):
    '''Relaxed CSLS loss of a linear map W and its gradient.

    J(W) = mean over pairs of
        -2 cos(x W, z) + r_T(x W) + r_S(z)
    where r_T(u) is the mean cosine of u to its N nearest target vectors
    and r_S(z) the mean cosine of z to its N nearest mapped source vectors.
    Neighbour sets are computed by ``neighbors`` and held fixed by
    ``objective`` and ``gradient``.
    '''

    def __init__(self, xs, xt, src_full, tgt_full, neighborhood=10):
        self.xs = numerics.unit_rows(xs)
        self.xt = numerics.unit_rows(xt)
        self.src_full = numerics.unit_rows(src_full)
        self.tgt_full = numerics.unit_rows(tgt_full)
        self.n_tgt = min(neighborhood, len(tgt_full))
        self.n_src = min(neighborhood, len(src_full))
        if self.n_tgt < neighborhood or self.n_src < neighborhood:
            logger.warning('rcsls neighborhood clamped to vocabulary size')

    def neighbors(self, w):
        mapped = numerics.unit_rows(self.xs.dot(w))
        tgt_nn = numerics.top_k(mapped, self.tgt_full, self.n_tgt)
        mapped_full = numerics.unit_rows(self.src_full.dot(w))
        src_nn = numerics.top_k(self.xt, mapped_full, self.n_src)
        return tgt_nn, src_nn

    def objective(self, w, nbrs):
        tgt_nn, src_nn = nbrs
        u = numerics.unit_rows(self.xs.dot(w))
        v = numerics.unit_rows(self.src_full.dot(w))
        align = np.sum(u * self.xt, axis=1)
        r_tgt = np.einsum('kd,knd->kn', u, self.tgt_full[tgt_nn]).mean(axis=1)
        r_src = np.einsum('kd,knd->kn', self.xt, v[src_nn]).mean(axis=1)
        return float(np.mean(-2.0 * align + r_tgt + r_src))

    def gradient(self, w, nbrs):
        tgt_nn, src_nn = nbrs
        k = len(self.xs)
        # d cos(y, z) / dy = (z - cos(y, z) y/|y|) / |y|
        mapped = self.xs.dot(w)
        norms = np.maximum(np.linalg.norm(mapped, axis=1), 1e-12)[:, None]
        u = mapped / norms
        pull = self.tgt_full[tgt_nn].mean(axis=1) - 2.0 * self.xt
        d_mapped = (pull - np.sum(u * pull, axis=1)[:, None] * u) / norms
        grad = self.xs.T.dot(d_mapped)

        rows, inverse = np.unique(src_nn, return_inverse=True)
        acc = np.zeros((len(rows), w.shape[1]))
        np.add.at(acc, inverse.ravel(),
                  np.repeat(self.xt, src_nn.shape[1], axis=0))
        acc /= src_nn.shape[1]
        full = self.src_full[rows]
        mapped_full = full.dot(w)
        full_norms = np.maximum(
            np.linalg.norm(mapped_full, axis=1), 1e-12)[:, None]
        v = mapped_full / full_norms
        d_full = (acc - np.sum(v * acc, axis=1)[:, None] * v) / full_norms
        grad += full.T.dot(d_full)
        return grad / k


def align_rcsls(aligned, src_full, tgt_full, config=None, init=None):
    '''Minimize the relaxed CSLS loss by gradient descent from Procrustes.

    A step that increases the loss is undone and the learning rate halved;
    config.patience such steps in a row abort with AlignmentError.
    '''
    config = config or RcslsConfig()
    problem = RcslsObjective(
        aligned.src, aligned.tgt, src_full, tgt_full, config.neighborhood)
    w = init if init is not None else \
        numerics.solve_procrustes(problem.xs, problem.xt)
    lr = config.learning_rate
    nbrs = problem.neighbors(w)
    loss = problem.objective(w, nbrs)
    history = [loss]
    increases = 0
    for epoch in range(config.epochs):
        candidate = w - lr * problem.gradient(w, nbrs)
        if config.spectral:
            candidate = numerics.clip_spectrum(candidate, 1.0)
        cand_nbrs = problem.neighbors(candidate)
        cand_loss = problem.objective(candidate, cand_nbrs)
        if not np.isfinite(cand_loss) or cand_loss > loss:
            increases += 1
            lr /= 2.0
            logger.debug('rcsls epoch %d: loss increased, lr -> %g',
                         epoch + 1, lr)
            if increases >= config.patience:
                raise errors.AlignmentError(
                    'rcsls diverged: loss increased in {} consecutive epochs; '
                    'use a smaller learning rate'.format(increases))
            continue
        increases = 0
        w, nbrs, loss = candidate, cand_nbrs, cand_loss
        history.append(loss)
        logger.info('rcsls epoch %d: loss %.6f', epoch + 1, loss)
    meta = {
        'dictionary_size': len(aligned),
        'neighborhood': config.neighborhood,
        'epochs': config.epochs,
        'spectral': bool(config.spectral),
        'final_learning_rate': float(lr),
        'loss': float(loss),
        'loss_history': [float(x) for x in history],
    }
    return ProjectionPair(w, orthogonal_src=False, method='rcsls', meta=meta,
                          lexicon=aligned.kept_pairs)
