'''Aligners that need no (or almost no) seed dictionary.'''

from collections import namedtuple
import logging

import numpy as np
from scipy.spatial import distance

from clecli import errors, lexicon as lex, numerics
from clecli.supervised import ProjectionPair

logger = logging.getLogger('cle.unsupervised')


def vecmap_seed(src_space, tgt_space, cap=4000):
    '''Initial dictionary from similarity-distribution profiles.

    Every word of the top cap is described by its sorted similarities to
    the other top words; words with matching profiles are paired.
    '''
    n = min(cap, len(src_space))
    m = min(cap, len(tgt_space))
    if n < cap or m < cap:
        logger.info('vecmap seed cap clamped to %d x %d', n, m)
    width = min(n, m)
    profiles = []
    for matrix, size in ((src_space.matrix, n), (tgt_space.matrix, m)):
        unit = numerics.unit_rows(matrix[:size])
        sims = np.sort(unit.dot(unit.T), axis=1)[:, ::-1][:, :width]
        sims = numerics.unit_rows(sims)
        sims = numerics.unit_rows(sims - sims.mean(axis=0))
        profiles.append(sims)
    idx, _ = numerics.nearest(profiles[0], profiles[1])
    return lex.TranslationLexicon(
        (src_space.words[i], tgt_space.words[idx[i]]) for i in range(n))


class SelfLearnConfig(object):
    '''Knobs of the self-learning loop.

    keep_prob is the initial probability of keeping a similarity score in
    dictionary induction. Whenever the objective has not improved by more
    than threshold for window rounds it is multiplied by growth (up to 1).
    '''

    def __init__(self, vocab_cap=20000, metric=lex.CSLS, csls_k=10,
                 max_rounds=100, keep_prob=0.1, growth=2.0, window=3,
                 threshold=1e-6, seed=0):
        if not 0 < keep_prob <= 1:
            raise errors.ConfigError('keep_prob must be in (0, 1]')
        if growth <= 1 and keep_prob < 1:
            raise errors.ConfigError('keep_prob growth factor must be > 1')
        if window < 1 or max_rounds < 1:
            raise errors.ConfigError('window and max_rounds must be >= 1')
        self.vocab_cap = vocab_cap
        self.metric = metric
        self.csls_k = csls_k
        self.max_rounds = max_rounds
        self.keep_prob = keep_prob
        self.growth = growth
        self.window = window
        self.threshold = threshold
        self.seed = seed


def self_learn(src_space, tgt_space, init, config=None):
    '''Alternate Procrustes with nearest neighbour induction.

    While keep_prob < 1 the dictionary is the union of the forward and
    backward nearest neighbours under dropout; at keep_prob 1 it is the
    set of mutual nearest neighbours. A round that induces fewer pairs
    than the embedding dimension keeps the previous dictionary.

    Stops once the induced dictionary has been unchanged for window rounds
    at keep_prob 1, when the objective stalls at keep_prob 1, or after
    max_rounds. The returned map is the last Procrustes solution, together
    with the dictionary it was solved on.
    '''
    config = config or SelfLearnConfig()
    aligned = lex.build_aligned_matrices(init, src_space, tgt_space)
    dictionary = aligned.kept_pairs
    rng = np.random.default_rng(config.seed)
    xs = src_space.matrix[:config.vocab_cap]
    xt = tgt_space.matrix[:config.vocab_cap]
    keep_prob = min(1.0, config.keep_prob)
    best = -np.inf
    last_improvement = 0
    stable = 0
    trajectory = []
    objective = best
    min_pairs = max(1, src_space.matrix.shape[1])
    for rnd in range(config.max_rounds):
        aligned = lex.build_aligned_matrices(dictionary, src_space, tgt_space)
        w = numerics.solve_procrustes(aligned.src, aligned.tgt)
        solved_on = dictionary
        induce = (lex.mutual_nn_indices if keep_prob >= 1.0
                  else lex.union_nn_indices)
        rows, cols, objective = induce(
            xs.dot(w), xt, config.metric, config.csls_k, keep_prob, rng)
        found = lex.TranslationLexicon(
            (src_space.words[i], tgt_space.words[j]) for i, j in zip(rows, cols))
        trajectory.append(len(found))
        logger.info('round %d: keep_prob %.3g, objective %.6f, %d pairs',
                    rnd + 1, keep_prob, objective, len(found))
        if len(found) < min_pairs:
            logger.warning('round %d induced %d pairs (< %d); keeping the '
                           'previous dictionary', rnd + 1, len(found),
                           min_pairs)
            found = dictionary
        unchanged = found == dictionary
        dictionary = found
        if objective > best + config.threshold:
            best = objective
            last_improvement = rnd
        stable = stable + 1 if keep_prob >= 1.0 and unchanged else 0
        if stable >= config.window:
            break
        if rnd - last_improvement >= config.window:
            if keep_prob >= 1.0:
                break
            keep_prob = min(1.0, keep_prob * config.growth)
            last_improvement = rnd
            logger.info('objective stalled; keep_prob -> %.3g', keep_prob)
    meta = {
        'rounds': len(trajectory),
        'final_keep_prob': float(keep_prob),
        'objective': float(objective),
        'dictionary_size': len(solved_on),
        'trajectory': trajectory,
        'metric': config.metric,
        'vocab_cap': config.vocab_cap,
        'seed': config.seed,
    }
    return ProjectionPair(w, orthogonal_src=True, method='self-learning',
                          meta=meta, lexicon=solved_on)


class PostprocessOptions(object):
    '''Optional whitening/re-weighting/de-whitening steps; None means off.'''

    DEWHITEN = ('src', 'tgt')

    def __init__(self, whiten=False, src_reweight=None, tgt_reweight=None,
                 src_dewhiten=None, tgt_dewhiten=None, dim_reduction=None,
                 epsilon=1e-12):
        for value in (src_dewhiten, tgt_dewhiten):
            if value is not None and value not in self.DEWHITEN:
                raise errors.ConfigError(
                    'de-whitening must be "src" or "tgt", got {!r}'.format(value))
        if dim_reduction is not None and dim_reduction < 1:
            raise errors.ConfigError('dim_reduction must be >= 1')
        self.whiten = whiten
        self.src_reweight = src_reweight
        self.tgt_reweight = tgt_reweight
        self.src_dewhiten = src_dewhiten
        self.tgt_dewhiten = tgt_dewhiten
        self.dim_reduction = dim_reduction
        self.epsilon = epsilon

    @property
    def enabled(self):
        return bool(self.whiten) or any(
            value is not None for value in (
                self.src_reweight, self.tgt_reweight, self.src_dewhiten,
                self.tgt_dewhiten, self.dim_reduction))

    def as_dict(self):
        return {
            'whiten': bool(self.whiten),
            'src_reweight': self.src_reweight,
            'tgt_reweight': self.tgt_reweight,
            'src_dewhiten': self.src_dewhiten,
            'tgt_dewhiten': self.tgt_dewhiten,
            'dim_reduction': self.dim_reduction,
        }


def vecmap_postprocess(pair, aligned, options):
    '''Re-derive the projections from the final dictionary with options.'''
    if not options.enabled:
        return pair
    xs, xt = aligned.src, aligned.tgt
    if options.whiten:
        wx1 = numerics.inverse_sqrt(xs.T.dot(xs), options.epsilon)
        wz1 = numerics.inverse_sqrt(xt.T.dot(xt), options.epsilon)
    else:
        wx1 = np.eye(xs.shape[1])
        wz1 = np.eye(xt.shape[1])
    res = numerics.svd(xs.dot(wx1).T.dot(xt.dot(wz1)))
    wx2, wz2, s = res.U, res.Vt.T, res.S
    w_src = wx1.dot(wx2)
    w_tgt = wz1.dot(wz2)
    if options.src_reweight is not None:
        w_src = w_src * s ** options.src_reweight
    if options.tgt_reweight is not None:
        w_tgt = w_tgt * s ** options.tgt_reweight
    dewhiten = {
        'src': wx2.T.dot(numerics.psd_power(xs.T.dot(xs), 0.5)
                         if options.whiten else np.eye(len(wx1))).dot(wx2),
        'tgt': wz2.T.dot(numerics.psd_power(xt.T.dot(xt), 0.5)
                         if options.whiten else np.eye(len(wz1))).dot(wz2),
    }
    if options.src_dewhiten is not None:
        w_src = w_src.dot(dewhiten[options.src_dewhiten])
    if options.tgt_dewhiten is not None:
        w_tgt = w_tgt.dot(dewhiten[options.tgt_dewhiten])
    if options.dim_reduction is not None:
        w_src = w_src[:, :options.dim_reduction]
        w_tgt = w_tgt[:, :options.dim_reduction]
    meta = dict(pair.meta)
    meta['postprocess'] = options.as_dict()
    return ProjectionPair(
        w_src, w_tgt, orthogonal_src=numerics.is_orthogonal(w_src),
        method=pair.method, meta=meta, lexicon=pair.lexicon)


class IcpConfig(object):

    def __init__(self, pca_dim=50, top_n_words=2500, lambda_cyc=1.0,
                 restarts=20, inner_iters=50, outer_iters=100, refine_rounds=3,
                 seed=0):
        if restarts < 1 or pca_dim < 1 or top_n_words < 2:
            raise errors.ConfigError(
                'icp needs restarts >= 1, pca_dim >= 1, top_n_words >= 2')
        if lambda_cyc < 0:
            raise errors.ConfigError('lambda_cyc must be >= 0')
        self.pca_dim = pca_dim
        self.top_n_words = top_n_words
        self.lambda_cyc = lambda_cyc
        self.restarts = restarts
        self.inner_iters = inner_iters
        self.outer_iters = outer_iters
        self.refine_rounds = refine_rounds
        self.seed = seed


IcpLoss = namedtuple('IcpLoss', 'total forward backward cycle')
IcpRun = namedtuple('IcpRun', 'w1 w2 f1 f2 losses')


def icp_assign(a, b, w1, w2):
    '''Nearest point of b for every mapped row of a, and vice versa.'''
    f1 = distance.cdist(a.dot(w1), b, 'sqeuclidean').argmin(axis=1)
    f2 = distance.cdist(b.dot(w2), a, 'sqeuclidean').argmin(axis=1)
    return f1, f2


def icp_loss(a, b, w1, w2, f1, f2, lambda_cyc):
    forward = np.sum((a.dot(w1) - b[f1]) ** 2)
    backward = np.sum((b.dot(w2) - a[f2]) ** 2)
    cycle = lambda_cyc * (np.sum((a - a.dot(w1).dot(w2)) ** 2)
                          + np.sum((b - b.dot(w2).dot(w1)) ** 2))
    return IcpLoss(float(forward + backward + cycle), float(forward),
                   float(backward), float(cycle))


def _solve_block(a, t, b, w_other, lambda_cyc):
    '''Exact minimizer over W of
    |aW - t|^2 + l|aW.w_other - a|^2 + l|b.w_other.W - b|^2.
    '''
    c = b.dot(w_other)
    ata = a.T.dot(a)
    p = ata + lambda_cyc * c.T.dot(c)
    q = lambda_cyc * ata
    rhs = a.T.dot(t) + lambda_cyc * (ata.dot(w_other.T) + c.T.dot(b))
    s, v = np.linalg.eigh(w_other.dot(w_other.T))
    systems = p[None, :, :] + s[:, None, None] * q[None, :, :]
    cols = (rhs.dot(v)).T[:, :, None]
    try:
        solved = np.linalg.solve(systems, cols)[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise errors.NumericalError('icp update is singular: {}'.format(exc))
    return solved.T.dot(v.T)


def _icp_update(a, b, f1, f2, w1, w2, lambda_cyc, inner_iters, tol=1e-10):
    if lambda_cyc == 0:
        w1 = np.linalg.lstsq(a, b[f1], rcond=None)[0]
        w2 = np.linalg.lstsq(b, a[f2], rcond=None)[0]
        return w1, w2
    for _ in range(inner_iters):
        new_w1 = _solve_block(a, b[f1], b, w2, lambda_cyc)
        new_w2 = _solve_block(b, a[f2], a, new_w1, lambda_cyc)
        delta = max(np.abs(new_w1 - w1).max(), np.abs(new_w2 - w2).max())
        w1, w2 = new_w1, new_w2
        if delta < tol:
            break
    return w1, w2


def run_icp(a, b, w1, w2=None, lambda_cyc=1.0, inner_iters=50,
            outer_iters=100):
    '''Iterative closest point from one initialization.

    losses[0] is the loss of the initialization; the run stops early once
    both assignments are unchanged.
    '''
    w1 = np.array(w1, dtype=np.float64)
    w2 = w1.T.copy() if w2 is None else np.array(w2, dtype=np.float64)
    f1, f2 = icp_assign(a, b, w1, w2)
    losses = [icp_loss(a, b, w1, w2, f1, f2, lambda_cyc).total]
    for _ in range(outer_iters):
        w1, w2 = _icp_update(a, b, f1, f2, w1, w2, lambda_cyc, inner_iters)
        g1, g2 = icp_assign(a, b, w1, w2)
        losses.append(icp_loss(a, b, w1, w2, g1, g2, lambda_cyc).total)
        converged = np.array_equal(g1, f1) and np.array_equal(g2, f2)
        f1, f2 = g1, g2
        if converged or not np.isfinite(losses[-1]):
            break
    return IcpRun(w1, w2, f1, f2, losses)


def align_icp(src_space, tgt_space, config=None):
    '''ICP between the PCA-reduced clouds of frequent words.

    Restart 0 starts from the identity (the two PCA bases), the others from
    random orthogonal maps. The lowest-loss restart yields a dictionary of
    mutually assigned words, refined by mutual nearest neighbours with
    Procrustes in the original spaces.
    '''
    config = config or IcpConfig()
    n = min(config.top_n_words, len(src_space), len(tgt_space))
    k = config.pca_dim
    if k > min(src_space.dim, tgt_space.dim, n):
        raise errors.AlignmentError(
            'pca_dim {} exceeds the available dimensions'.format(k))
    a = numerics.pca_project(src_space.matrix[:n], k).projected
    b = numerics.pca_project(tgt_space.matrix[:n], k).projected

    best = best_restart = None
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    for restart, seq in enumerate(seeds):
        rng = np.random.default_rng(seq)
        w1 = np.eye(k) if restart == 0 else numerics.random_orthogonal(k, rng)
        try:
            run = run_icp(a, b, w1, None, config.lambda_cyc,
                          config.inner_iters, config.outer_iters)
        except errors.NumericalError as exc:
            logger.warning('icp restart %d failed: %s', restart, exc)
            continue
        final = run.losses[-1]
        logger.debug('icp restart %d: loss %.6g after %d iterations',
                     restart, final, len(run.losses) - 1)
        if not np.isfinite(final):
            continue
        if best is None or final < best.losses[-1]:
            best, best_restart = run, restart
    if best is None:
        raise errors.AlignmentError('every icp restart was degenerate')

    rows = np.flatnonzero(best.f2[best.f1] == np.arange(n))
    if not len(rows):
        rows = np.arange(n)
    dictionary = lex.TranslationLexicon(
        (src_space.words[i], tgt_space.words[best.f1[i]]) for i in rows)
    aligned = lex.build_aligned_matrices(dictionary, src_space, tgt_space)
    w = numerics.solve_procrustes(aligned.src, aligned.tgt)
    for _ in range(config.refine_rounds):
        found = lex.mutual_nearest_neighbors(
            src_space.matrix[:n].dot(w), tgt_space.matrix[:n],
            src_space.words, tgt_space.words, search_cap=n)
        if not len(found) or found == dictionary:
            break
        dictionary = found
        aligned = lex.build_aligned_matrices(dictionary, src_space, tgt_space)
        w = numerics.solve_procrustes(aligned.src, aligned.tgt)
    meta = {
        'pca_dim': k,
        'top_n_words': n,
        'lambda_cyc': config.lambda_cyc,
        'restarts': config.restarts,
        'best_restart': best_restart,
        'loss': float(best.losses[-1]),
        'mutual_pairs': int(len(rows)),
        'dictionary_size': len(dictionary),
        'seed': config.seed,
    }
    return ProjectionPair(w, orthogonal_src=True, method='icp', meta=meta,
                          lexicon=dictionary)


class TransportPlan(object):
    '''Entropic Gromov-Wasserstein coupling and its diagnostics.'''

    def __init__(self, gamma, a, b, lam, outer_iters, violation, converged):
        self.gamma = gamma
        self.a = a
        self.b = b
        self.lam = lam
        self.outer_iters = outer_iters
        self.violation = violation
        self.converged = converged

    def row_argmax(self):
        return self.gamma.argmax(axis=1)


def gromov_wasserstein(c1, c2, lam=0.05, outer_iters=30, max_iter=1000,
                       tol=1e-9):
    '''Entropic GW coupling of two similarity matrices, uniform marginals.

    Each outer step linearizes the square-loss GW cost around the current
    coupling, shifts every row to a zero minimum and scales to [0, 1], and
    solves the entropic problem with Sinkhorn.
    '''
    if lam <= 0:
        raise errors.AlignmentError('gwa lambda must be positive')
    if outer_iters < 1:
        raise errors.AlignmentError('gwa needs outer_iters >= 1')
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    n, m = len(c1), len(c2)
    p = np.full(n, 1.0 / n)
    q = np.full(m, 1.0 / m)
    c12 = ((c1 ** 2).dot(p)[:, None] + (c2 ** 2).dot(q)[None, :])
    gamma = np.outer(p, q)
    for it in range(outer_iters):
        cost = c12 - 2.0 * c1.dot(gamma).dot(c2.T)
        cost = cost - cost.min(axis=1, keepdims=True)
        top = cost.max()
        if top > 0:
            cost = cost / top
        kernel = np.exp(-cost / lam)
        res = numerics.sinkhorn_scale(kernel, p, q, max_iter, tol)
        gamma = res.a[:, None] * kernel * res.b[None, :]
        logger.debug('gw iteration %d: marginal violation %.3g',
                     it + 1, res.violation)
    return TransportPlan(gamma, res.a, res.b, lam, outer_iters,
                         res.violation, res.converged)


def align_gwa(src_space, tgt_space, cap=2000, lam=0.05, outer_iters=30,
              max_iter=1000, tol=1e-9):
    '''Gromov-Wasserstein alignment of the cap most frequent words.'''
    n = min(cap, len(src_space), len(tgt_space))
    if n < cap:
        logger.warning('gwa cap clamped to %d', n)
    xs = numerics.unit_rows(src_space.matrix[:n])
    xt = numerics.unit_rows(tgt_space.matrix[:n])
    plan = gromov_wasserstein(
        xs.dot(xs.T), xt.dot(xt.T), lam, outer_iters, max_iter, tol)
    cols = plan.row_argmax()
    dictionary = lex.TranslationLexicon(
        (src_space.words[i], tgt_space.words[j]) for i, j in enumerate(cols))
    aligned = lex.build_aligned_matrices(dictionary, src_space, tgt_space)
    w = numerics.solve_procrustes(aligned.src, aligned.tgt)
    meta = {
        'cap': n,
        'lambda': lam,
        'outer_iters': outer_iters,
        'marginal_violation': plan.violation,
        'sinkhorn_converged': bool(plan.converged),
        'dictionary_size': len(dictionary),
    }
    return ProjectionPair(w, orthogonal_src=True, method='gwa', meta=meta,
                          lexicon=dictionary, plan=plan)
