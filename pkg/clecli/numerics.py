'''Dense linear algebra and iterative scaling shared by the aligners.

All functions use the row-vector convention: a space is a matrix whose
rows are word vectors and a linear map is applied as ``X.dot(W)``.
'''

from collections import namedtuple
import logging

import numpy as np
from scipy import stats

from clecli import errors

logger = logging.getLogger('cle.numerics')

SvdResult = namedtuple('SvdResult', 'U S Vt')
CcaResult = namedtuple('CcaResult', 'A B correlations')
PcaResult = namedtuple(
    'PcaResult', 'projected basis mean explained_variance degenerate')
SinkhornResult = namedtuple(
    'SinkhornResult', 'a b violation iterations converged')

# Rows per block in similarity sweeps; bounds memory to BATCH x |V| floats.
BATCH = 2048

ORTHOGONALITY_TOL = 1e-6


def _as_matrix(a, name='matrix'):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise errors.NumericalError(
            '{} must be 2-dimensional, got shape {}'.format(name, a.shape))
    return a


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise errors.NumericalError('{}: non-finite input'.format(name))


def svd(a):
    '''Thin SVD with a deterministic sign convention.

    The largest-magnitude entry of every column of U is made positive
    (the matching row of Vt is flipped with it).
    '''
    a = _as_matrix(a)
    _check_finite(a, 'svd')
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise errors.NumericalError('svd did not converge: {}'.format(exc))
    if u.size:
        pivots = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[pivots, np.arange(u.shape[1])])
        signs[signs == 0] = 1.0
        u = u * signs
        vt = vt * signs[:, None]
    return SvdResult(u, s, vt)


def numerical_rank(singular_values, shape):
    s = np.asarray(singular_values)
    if not s.size or s[0] == 0:
        return 0
    tol = s[0] * max(shape) * np.finfo(np.float64).eps
    return int(np.count_nonzero(s > tol))


def solve_procrustes(xs, xt, full=False):
    '''Orthogonal W minimizing ||xs.W - xt||_F.

    W = U.Vt where U, S, Vt = svd(xs^T.xt). With ``full=True`` the
    singular values of the cross-covariance are returned as well, so
    callers can detect a rank-deficient (ambiguous) solution.
    '''
    xs = _as_matrix(xs, 'source matrix')
    xt = _as_matrix(xt, 'target matrix')
    if xs.shape != xt.shape:
        raise errors.NumericalError(
            'Procrustes needs equally shaped matrices, got {} and {}'.format(
                xs.shape, xt.shape))
    if xs.shape[0] < 1:
        raise errors.NumericalError('Procrustes needs at least one pair')
    res = svd(xs.T.dot(xt))
    w = res.U.dot(res.Vt)
    if full:
        return w, res.S
    return w


def is_orthogonal(w, tol=ORTHOGONALITY_TOL):
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return False
    return bool(np.abs(w.T.dot(w) - np.eye(w.shape[0])).max() < tol)


def psd_power(m, power, epsilon=0.0):
    '''m^power for a symmetric positive semi-definite m.

    epsilon is added to the eigenvalues first; directions whose
    (regularized) eigenvalue is numerically zero are dropped when power
    is negative.
    '''
    m = _as_matrix(m)
    _check_finite(m, 'psd_power')
    try:
        w, v = np.linalg.eigh((m + m.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise errors.NumericalError('eigh did not converge: {}'.format(exc))
    w = np.clip(w, 0.0, None) + epsilon
    if power < 0:
        tiny = w.max() * len(w) * np.finfo(np.float64).eps if w.size else 0
        keep = w > tiny
        if not keep.all():
            logger.warning(
                '%d of %d directions have zero variance and were dropped',
                np.count_nonzero(~keep), len(w))
        scaled = np.zeros_like(w)
        scaled[keep] = w[keep] ** power
    else:
        scaled = w ** power
    return (v * scaled).dot(v.T)


def inverse_sqrt(m, epsilon=0.0):
    return psd_power(m, -0.5, epsilon)


def covariance(x):
    x = _as_matrix(x)
    if x.shape[0] < 2:
        raise errors.NumericalError(
            'covariance needs at least 2 rows, got {}'.format(x.shape[0]))
    return np.atleast_2d(np.cov(x, rowvar=False))


def whitening_matrix(x, epsilon=1e-12):
    '''ZCA whitening transform C^(-1/2) of the column covariance of x.'''
    return inverse_sqrt(covariance(x), epsilon)


def solve_cca(xs, xt, keep_dims='all', epsilon=1e-8):
    '''Canonical correlation analysis of two aligned views.

    Each side is whitened with its (ridge-regularized) covariance, then the
    whitened cross-covariance is decomposed by SVD. Returns the projection
    matrices A (d_s x k) and B (d_t x k) and the k canonical correlations,
    sorted in decreasing order.
    '''
    xs = _as_matrix(xs, 'source matrix')
    xt = _as_matrix(xt, 'target matrix')
    if xs.shape[0] != xt.shape[0]:
        raise errors.NumericalError('CCA views must have equal row counts')
    n = xs.shape[0]
    if n < 2:
        raise errors.NumericalError('CCA needs more than one pair')
    available = min(xs.shape[1], xt.shape[1])
    if keep_dims in (None, 'all'):
        k = available
    else:
        k = int(keep_dims)
        if not 1 <= k <= available:
            raise errors.NumericalError(
                'keep_dims must be in [1, {}], got {}'.format(available, k))

    xs_c = xs - xs.mean(axis=0)
    xt_c = xt - xt.mean(axis=0)
    wx = inverse_sqrt(xs_c.T.dot(xs_c) / (n - 1), epsilon)
    wy = inverse_sqrt(xt_c.T.dot(xt_c) / (n - 1), epsilon)
    cxy = xs_c.T.dot(xt_c) / (n - 1)
    res = svd(wx.dot(cxy).dot(wy))
    a = wx.dot(res.U[:, :k])
    b = wy.dot(res.Vt[:k].T)
    return CcaResult(a, b, np.clip(res.S[:k], 0.0, 1.0))


def pca_project(x, out_dim):
    '''Project mean-centered rows of x onto the top out_dim components.'''
    x = _as_matrix(x)
    n, d = x.shape
    if not 1 <= out_dim <= d:
        raise errors.NumericalError(
            'out_dim must be in [1, {}], got {}'.format(d, out_dim))
    if out_dim > n:
        raise errors.NumericalError(
            'cannot extract {} components from {} rows'.format(out_dim, n))
    mean = x.mean(axis=0)
    centered = x - mean
    res = svd(centered)
    basis = res.Vt[:out_dim].T
    explained = res.S[:out_dim] ** 2 / max(n - 1, 1)
    top = explained[0] if explained.size else 0.0
    degenerate = explained <= top * 1e-12
    if degenerate.any():
        logger.warning(
            'PCA: %d trailing components have near-zero variance',
            np.count_nonzero(degenerate))
    return PcaResult(centered.dot(basis), basis, mean, explained, degenerate)


def sinkhorn_scale(kernel, p, q, max_iter=1000, tol=1e-9):
    '''Scaling vectors a, b such that diag(a).K.diag(b) has marginals p, q.

    Alternates a = p / K.b and b = q / K^T.a starting from b = 1 until the
    largest marginal violation drops below tol or max_iter is reached.
    '''
    kernel = _as_matrix(kernel, 'kernel')
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if kernel.shape != (len(p), len(q)):
        raise errors.NumericalError(
            'kernel shape {} does not match marginals ({}, {})'.format(
                kernel.shape, len(p), len(q)))
    if not np.all(np.isfinite(kernel)) or (kernel < 0).any():
        raise errors.NumericalError('kernel must be finite and nonnegative')
    if (kernel.sum(axis=1) <= 0).any() or (kernel.sum(axis=0) <= 0).any():
        raise errors.NumericalError(
            'kernel has an all-zero row or column (exp underflow); '
            'use a larger regularization lambda')

    b = np.ones(len(q))
    a = np.ones(len(p))
    kb = kernel.dot(b)
    violation = np.inf
    iteration = 0
    try:
        with np.errstate(over='raise', divide='raise', invalid='raise'):
            for iteration in range(1, max_iter + 1):
                a = p / kb
                b = q / kernel.T.dot(a)
                kb = kernel.dot(b)
                row_gap = np.abs(a * kb - p).max()
                col_gap = np.abs(b * kernel.T.dot(a) - q).max()
                violation = max(row_gap, col_gap)
                if violation < tol:
                    break
    except FloatingPointError as exc:
        raise errors.NumericalError(
            'Sinkhorn scaling failed ({}); use a larger regularization '
            'lambda'.format(exc))
    converged = violation < tol
    if not converged:
        logger.debug(
            'Sinkhorn stopped after %d iterations, violation %.3g',
            iteration, violation)
    return SinkhornResult(a, b, float(violation), iteration, converged)


def random_orthogonal(dim, rng):
    if dim == 1:
        return np.array([[1.0 if rng.random() < 0.5 else -1.0]])
    return stats.ortho_group.rvs(dim, random_state=rng)


def clip_spectrum(w, bound=1.0):
    '''Project w onto the set of matrices with singular values <= bound.'''
    res = svd(w)
    return (res.U * np.minimum(res.S, bound)).dot(res.Vt)


def unit_rows(x):
    '''Copy of x with every nonzero row scaled to unit Euclidean norm.'''
    x = np.array(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    nonzero = norms > 0
    x[nonzero] /= norms[nonzero, None]
    return x


def top_k(queries, candidates, k, batch=BATCH):
    '''Indices of the k largest dot products of every query row.'''
    k = min(k, len(candidates))
    idx = np.empty((len(queries), k), dtype=np.intp)
    for start in range(0, len(queries), batch):
        block = queries[start:start + batch].dot(candidates.T)
        idx[start:start + batch] = np.argpartition(
            -block, k - 1, axis=1)[:, :k]
    return idx


def mean_top_k(queries, candidates, k, batch=BATCH):
    '''Mean of the k largest dot products of every query row.'''
    m = len(candidates)
    k = min(k, m)
    out = np.empty(len(queries))
    for start in range(0, len(queries), batch):
        block = queries[start:start + batch].dot(candidates.T)
        out[start:start + batch] = np.partition(
            block, m - k, axis=1)[:, m - k:].mean(axis=1)
    return out


def nearest(queries, candidates, penalty=None, keep_prob=1.0, rng=None,
            batch=BATCH):
    '''Row-wise argmax of queries.candidates^T - penalty.

    With keep_prob < 1 every score is independently set to 0 with
    probability 1 - keep_prob before the argmax. Ties go to the lowest
    candidate index. Returns (indices, best scores).
    '''
    n = len(queries)
    idx = np.zeros(n, dtype=np.intp)
    best = np.zeros(n)
    if keep_prob < 1.0:
        assert rng is not None, 'a random generator is needed for dropout'
    for start in range(0, n, batch):
        block = queries[start:start + batch].dot(candidates.T)
        if penalty is not None:
            block -= penalty[None, :]
        if keep_prob < 1.0:
            block[rng.random(block.shape) >= keep_prob] = 0.0
        found = block.argmax(axis=1)
        idx[start:start + batch] = found
        best[start:start + batch] = block[np.arange(len(block)), found]
    return idx, best
