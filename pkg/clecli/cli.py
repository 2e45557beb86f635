'''The ``cle`` command line.

Usage: cle <command> [--option=value ...] [argument ...] [section.key=value ...]

Options must follow the command name; experiment settings come from
``--config`` and can be overridden with ``section.key=value`` arguments.
'''

from __future__ import print_function

from collections import OrderedDict
from functools import wraps
import contextlib
import datetime
import io
import logging
import os
import re
import sys
import time

from tornado.log import define_logging_options
from tornado.options import Error as OptionsError, OptionParser

from clecli import __version__
from clecli import clir, config, embeddings, errors, evaluation, output, ui
from clecli import lexicon as lex
from clecli import supervised, unsupervised

COMMANDS = {}

KWARG_RE = r'[\w.-]+'

REPORT = 'report.tsv'
SUMMARY = 'summary.yaml'
TREC_RUN = 'run.trec'
RANKS = 'ranks.tsv'
CLIR_SUMMARY = 'clir_summary.yaml'

VECMAP_PREPROCESS = (
    embeddings.UNIT_LENGTH, embeddings.MEAN_CENTER, embeddings.UNIT_LENGTH)

logger = logging.getLogger('cle.cli')


def command(name):
    cmdlogger = logging.getLogger('cle.cmd')

    def wrapper(f):

        @wraps(f)
        def helper(*args, **kwargs):
            cmdlogger.debug(f.__name__)
            return f(*args, **kwargs)

        COMMANDS[name] = Command(helper)
        return helper

    return wrapper


class Command(object):

    def __init__(self, f):
        self.f = f

    def __call__(self, *args, **kwargs):
        return self.f(*args, **kwargs)

    def desc(self):
        if self.f.__doc__ is None:
            return '?'
        return self.f.__doc__.splitlines()[0]

    def help(self):
        return self.f.__doc__


class Context(object):
    '''Parsed options and key=value overrides of one invocation.'''

    def __init__(self, options, overrides=None):
        self.options = options
        self.overrides = overrides or OrderedDict()

    def experiment(self):
        opts = self.options
        flags = OrderedDict([
            ('method.name', opts.method),
            ('run.seed', opts.seed),
            ('run.output', opts.output),
            ('evaluation.metric', opts.metric),
            ('evaluation.neighborhood', opts.neighborhood),
        ])
        overrides = OrderedDict(
            (k, v) for k, v in flags.items() if v is not None)
        overrides.update(self.overrides)
        return config.ExperimentConfig.load(opts.config, overrides)

    def output_dir(self, fallback):
        return self.options.output or fallback


def _parse_kwargs(args_, sep='='):
    kwargs = OrderedDict()
    if not args_:
        return kwargs
    line = ' '.join(args_)
    matches = list(re.finditer(KWARG_RE + sep, line))
    if not matches:
        return kwargs

    m0 = matches[0]
    for m1 in matches[1:]:
        k = m0.group().replace(sep, '')
        _s0, e0 = m0.span()
        s1, _e1 = m1.span()
        v = line[e0: s1]
        kwargs[k.strip()] = v.strip()
        m0 = m1

    # Last token
    k = m0.group().replace(sep, '')
    _s0, e0 = m0.span()
    s1 = len(line)
    v = line[e0: s1]
    kwargs[k.strip()] = v.strip()

    return kwargs


def _split_args(args):
    '''Separate positional arguments from section.key=value overrides.'''
    positional, pairs = [], []
    for arg in args:
        if re.match(KWARG_RE + r'\.' + KWARG_RE + '=', arg):
            pairs.append(arg)
        else:
            positional.append(arg)
    return positional, _parse_kwargs(pairs)


def _option_parser():
    parser = OptionParser()
    define_logging_options(parser)
    parser.define('config', type=str, help='experiment INI file')
    parser.define('method', type=str, help='alignment method')
    parser.define('seed', type=int, help='random seed')
    parser.define('output', type=str, help='output directory')
    parser.define('metric', type=str, help='retrieval metric: cosine|csls')
    parser.define('neighborhood', type=int, help='CSLS neighbourhood size')
    parser.define('reverse', type=bool, default=False,
                  help='evaluate in the target -> source direction')
    parser.define('test', type=str, default='ttest',
                  help='significance test: ttest|shuffle')
    parser.define('kind', type=str, default='bli',
                  help='what compare reads: bli|clir')
    parser.define('alpha', type=float, default=0.05,
                  help='family-wise significance level')
    parser.define('comparisons', type=int, default=1,
                  help='number of comparisons for the Bonferroni correction')
    parser.define('iterations', type=int, default=10000,
                  help='shuffling test iterations')
    parser.define('train_sizes', type=str, help='e.g. 1000,3000,5000')
    parser.define('test_size', type=int, help='test dictionary size')
    parser.define('preprocess', type=str, default='',
                  help='e.g. unit-length,mean-center')
    parser.define('max_vocab', type=int, help='keep the most frequent words')
    parser.define('correlation', type=str, default='spearman',
                  help='pearson|spearman')
    return parser


def _load_spaces(cfg, method=None):
    method = method or cfg.method
    spaces = []
    for side in ('source', 'target'):
        space = embeddings.load_text_embeddings(
            cfg.get('embeddings', side),
            cfg.get('embeddings', 'max_vocab'),
            cfg.get('embeddings', '{}_lang'.format(side)))
        chain = cfg.preprocess(side)
        if not len(chain) and method == 'vecmap':
            chain = embeddings.PreprocessChain(
                VECMAP_PREPROCESS, cfg.get('embeddings', 'whiten_epsilon'))
        spaces.append(embeddings.normalize(space, chain))
    return spaces


def _train_lexicon(cfg):
    lexicon = lex.load_lexicon(cfg.get('dictionary', 'train'))
    size = cfg.get('dictionary', 'train_size')
    return lexicon.head(size) if size else lexicon


def _align_proc(cfg, src, tgt, params):
    aligned = lex.build_aligned_matrices(_train_lexicon(cfg), src, tgt)
    return supervised.align_proc(aligned)


def _align_proc_b(cfg, src, tgt, params):
    return supervised.align_proc_b(
        src, tgt, _train_lexicon(cfg), params['iters'], params['search_cap'],
        params['metric'], params['csls_k'])


def _align_cca(cfg, src, tgt, params):
    aligned = lex.build_aligned_matrices(_train_lexicon(cfg), src, tgt)
    return supervised.align_cca(aligned, params['keep_dims'], params['epsilon'])


def _align_dlv(cfg, src, tgt, params):
    return supervised.align_dlv(
        src, tgt, _train_lexicon(cfg), params['em_iters'],
        params['cand_per_node'], params['match_cap'])


def _align_rcsls(cfg, src, tgt, params):
    aligned = lex.build_aligned_matrices(_train_lexicon(cfg), src, tgt)
    rcsls = supervised.RcslsConfig(
        params['neighborhood'], params['learning_rate'], params['epochs'],
        params['spectral'])
    cap = params['neighbor_cap']
    return supervised.align_rcsls(
        aligned, src.matrix[:cap], tgt.matrix[:cap], rcsls)


def _align_refine(cfg, src, tgt, params):
    learn = unsupervised.SelfLearnConfig(
        vocab_cap=params['vocab_cap'], metric=params['metric'],
        csls_k=params['csls_k'], max_rounds=params['max_rounds'],
        keep_prob=1.0, window=params['window'], seed=cfg.seed or 0)
    pair = unsupervised.self_learn(src, tgt, _train_lexicon(cfg), learn)
    pair.method = 'refine'
    return pair


def _align_vecmap(cfg, src, tgt, params):
    seed = unsupervised.vecmap_seed(src, tgt, params['seed_cap'])
    learn = unsupervised.SelfLearnConfig(
        vocab_cap=params['vocab_cap'], metric=params['metric'],
        csls_k=params['csls_k'], max_rounds=params['max_rounds'],
        keep_prob=params['keep_prob'], growth=params['growth'],
        window=params['window'], threshold=params['threshold'],
        seed=cfg.seed)
    pair = unsupervised.self_learn(src, tgt, seed, learn)
    options = unsupervised.PostprocessOptions(
        params['whiten'], params['src_reweight'], params['tgt_reweight'],
        params['src_dewhiten'], params['tgt_dewhiten'],
        params['dim_reduction'])
    if options.enabled:
        aligned = lex.build_aligned_matrices(pair.lexicon, src, tgt)
        pair = unsupervised.vecmap_postprocess(pair, aligned, options)
    pair.method = 'vecmap'
    return pair


def _align_icp(cfg, src, tgt, params):
    icp = unsupervised.IcpConfig(seed=cfg.seed, **params)
    return unsupervised.align_icp(src, tgt, icp)


def _align_gwa(cfg, src, tgt, params):
    return unsupervised.align_gwa(
        src, tgt, params['cap'], params['lambda'], params['outer_iters'],
        params['sinkhorn_iters'], params['sinkhorn_tol'])


ALIGNERS = {
    'proc': _align_proc,
    'proc-b': _align_proc_b,
    'cca': _align_cca,
    'dlv': _align_dlv,
    'rcsls': _align_rcsls,
    'refine': _align_refine,
    'vecmap': _align_vecmap,
    'icp': _align_icp,
    'gwa': _align_gwa,
}


def _pair_label(cfg, reverse=False):
    langs = [cfg.get('embeddings', 'source_lang'),
             cfg.get('embeddings', 'target_lang')]
    if reverse:
        langs.reverse()
    return '-'.join(langs)


def _check_projection(path):
    if not os.path.isdir(path):
        raise errors.ConfigError('no such projection directory: {}'.format(
            path))


@command('align')
def cmd_align(ctx, *args):
    '''Learn a projection and write it to the output directory.

    Usage:
    >>> cle align --config=exp.ini [--method=M] [--seed=N] [--output=DIR] \\
    ...     [section.key=value ...]

    Writes w_src.txt, w_tgt.txt, dictionary.txt and meta.yaml.
    '''
    cfg = ctx.experiment()
    paths = ['embeddings.source', 'embeddings.target']
    if cfg.method in config.SUPERVISED:
        paths.append('dictionary.train')
    cfg.validate(paths)

    src, tgt = _load_spaces(cfg)
    started = time.time()
    pair = ALIGNERS[cfg.method](cfg, src, tgt, cfg.method_params())
    elapsed = time.time() - started

    meta = {
        'config': cfg.as_dict(),
        'pair': _pair_label(cfg),
        'seed': cfg.seed,
        'version': __version__,
        'timing': {
            'seconds': round(elapsed, 3),
            'finished': datetime.datetime.utcnow().isoformat(),
        },
    }
    supervised.save_projection(pair, cfg.output, meta)
    print('{} {} projection ({} pairs) written to {}'.format(
        ui.bold(pair.method), _pair_label(cfg),
        len(pair.lexicon) if pair.lexicon is not None else 0, cfg.output))


@command('eval-bli')
def cmd_eval_bli(ctx, *args):
    '''Score a projection on bilingual lexicon induction.

    Usage:
    >>> cle eval-bli --config=exp.ini [--reverse] [--metric=csls] \\
    ...     PROJECTION_DIR [TEST_DICTIONARY]

    Writes report.tsv (one line per query) and summary.yaml into --output,
    or into PROJECTION_DIR.
    '''
    assert args, 'Usage: cle eval-bli PROJECTION_DIR [TEST_DICTIONARY]'
    projection = args[0]
    cfg = ctx.experiment()
    paths = ['embeddings.source', 'embeddings.target']
    if len(args) > 1:
        cfg.set('dictionary', 'test', args[1])
    paths.append('dictionary.test')
    cfg.validate(paths)
    _check_projection(projection)

    pair = supervised.load_projection(projection)
    src, tgt = _load_spaces(cfg, pair.method)
    test = lex.load_lexicon(cfg.get('dictionary', 'test'))
    reverse = bool(ctx.options.reverse)
    if reverse:
        pair, src, tgt, test = pair.swapped(), tgt, src, test.reversed()

    result = evaluation.bli_evaluate(
        pair, src, tgt, test, cfg.metric, cfg.neighborhood)
    result.label = _pair_label(cfg, reverse)

    out = ctx.output_dir(projection)
    evaluation.write_bli_report(result, os.path.join(out, REPORT))
    summary = result.summary()
    summary.update(method=pair.method or 'unknown', pair=result.label)
    output.write_yaml(summary, os.path.join(out, SUMMARY))
    print(result)


def _report_path(path, name):
    return os.path.join(path, name) if os.path.isdir(path) else path


def _paired_scores(kind, path_a, path_b):
    if kind == 'bli':
        a = evaluation.read_bli_report(_report_path(path_a, REPORT))
        b = evaluation.read_bli_report(_report_path(path_b, REPORT))
        if [r.word for r in a] != [r.word for r in b]:
            raise errors.EvaluationError(
                'the two reports cover different queries')
        return ([r.average_precision for r in a],
                [r.average_precision for r in b])
    if kind == 'clir':
        return clir.paired_ranks(
            clir.read_rank_report(_report_path(path_a, RANKS)),
            clir.read_rank_report(_report_path(path_b, RANKS)))
    raise errors.ConfigError('--kind must be bli or clir')


@command('compare')
def cmd_compare(ctx, *args):
    '''Test whether two runs differ significantly.

    Usage:
    >>> cle compare [--kind=bli|clir] [--test=ttest|shuffle] [--alpha=0.05] \\
    ...     [--comparisons=M] RUN_A RUN_B

    RUN_A and RUN_B are report.tsv (bli) or ranks.tsv (clir) files, or the
    directories holding them. The threshold is alpha / M (Bonferroni).
    '''
    assert len(args) == 2, 'Usage: cle compare RUN_A RUN_B'
    opts = ctx.options
    a, b = _paired_scores(opts.kind, args[0], args[1])
    if opts.test == 'ttest':
        p = evaluation.paired_ttest(a, b)
    elif opts.test == 'shuffle':
        p = evaluation.shuffling_test(
            a, b, opts.iterations, opts.seed if opts.seed is not None else 0)
    else:
        raise errors.ConfigError('--test must be ttest or shuffle')
    report = evaluation.SignificanceReport(
        opts.test, [('{} vs {}'.format(args[0], args[1]), p)],
        opts.alpha, opts.comparisons)
    print(report)


@command('eval-clir')
def cmd_eval_clir(ctx, *args):
    '''Run cross-lingual document retrieval with a projection.

    Usage:
    >>> cle eval-clir --config=exp.ini PROJECTION_DIR

    Queries are in the source language, documents in the target language;
    paths come from the [clir] section. Writes run.trec, ranks.tsv and
    clir_summary.yaml.
    '''
    assert args, 'Usage: cle eval-clir PROJECTION_DIR'
    projection = args[0]
    cfg = ctx.experiment()
    cfg.validate(['embeddings.source', 'embeddings.target', 'clir.documents',
                  'clir.queries', 'clir.qrels'])
    _check_projection(projection)

    pair = supervised.load_projection(projection)
    src, tgt = _load_spaces(cfg, pair.method)
    collection = clir.ingest_collection(
        cfg.get('clir', 'documents'), cfg.get('clir', 'queries'),
        cfg.get('clir', 'qrels'))
    weighting = clir.TermWeighting.from_collection(
        collection, cfg.get('clir', 'weighting'))
    run = clir.clir_run(collection, pair, src, tgt, weighting)
    run.label = _pair_label(cfg)

    out = ctx.output_dir(projection)
    clir.write_trec_run(run, os.path.join(out, TREC_RUN))
    clir.write_rank_report(run, os.path.join(out, RANKS))
    summary = run.summary()
    summary.update(method=pair.method or 'unknown', pair=run.label)
    output.write_yaml(summary, os.path.join(out, CLIR_SUMMARY))
    print(run)


@command('dict-split')
def cmd_dict_split(ctx, *args):
    '''Split a frequency-sorted dictionary into nested train sets and a test set.

    Usage:
    >>> cle dict-split [--train-sizes=1000,3000,5000] [--test-size=2000] \\
    ...     [--output=DIR] DICTIONARY
    '''
    assert len(args) == 1, 'Usage: cle dict-split DICTIONARY'
    cfg = ctx.experiment()
    if ctx.options.train_sizes:
        cfg.set('dictionary', 'train_sizes', ctx.options.train_sizes)
    if ctx.options.test_size:
        cfg.set('dictionary', 'test_size', ctx.options.test_size)
    cfg.validate()
    lexicon = lex.load_lexicon(args[0])
    sizes = cfg.get('dictionary', 'train_sizes')
    trains, test = lex.frequency_split(
        lexicon, sizes, cfg.get('dictionary', 'test_size'))
    for size, train in zip(sizes, trains):
        lex.save_lexicon(
            train, os.path.join(cfg.output, 'train_{}.txt'.format(size)))
    lex.save_lexicon(test, os.path.join(cfg.output, 'test.txt'))
    print('{} training sets and {} test pairs written to {}'.format(
        len(trains), len(test), cfg.output))


@command('preprocess')
def cmd_preprocess(ctx, *args):
    '''Normalize an embedding file.

    Usage:
    >>> cle preprocess --preprocess=unit-length,mean-center [--max-vocab=N] \\
    ...     INPUT OUTPUT
    '''
    assert len(args) == 2, 'Usage: cle preprocess INPUT OUTPUT'
    chain = embeddings.PreprocessChain.parse(ctx.options.preprocess)
    space = embeddings.load_text_embeddings(args[0], ctx.options.max_vocab)
    embeddings.save_text_embeddings(embeddings.normalize(space, chain), args[1])
    print('{} vectors ({}) written to {}'.format(len(space), chain, args[1]))


@command('project')
def cmd_project(ctx, *args):
    '''Write both vocabularies mapped into the shared space.

    Usage:
    >>> cle project --config=exp.ini [--output=DIR] PROJECTION_DIR
    '''
    assert len(args) == 1, 'Usage: cle project PROJECTION_DIR'
    projection = args[0]
    cfg = ctx.experiment()
    cfg.validate(['embeddings.source', 'embeddings.target'])
    _check_projection(projection)
    pair = supervised.load_projection(projection)
    src, tgt = _load_spaces(cfg, pair.method)
    src, tgt = pair.apply(src, tgt)
    out = ctx.output_dir(projection)
    for space, side in ((src, 'source'), (tgt, 'target')):
        path = os.path.join(
            out, '{}.vec'.format(cfg.get('embeddings', side + '_lang')))
        embeddings.save_text_embeddings(space, path)
        print('{} vectors written to {}'.format(len(space), path))


@command('table')
def cmd_table(ctx, *args):
    '''Aggregate evaluation summaries into a results table.

    Usage:
    >>> cle table SUMMARY.yaml ...

    All is the mean MAP over every language pair, Filt the mean over the
    pairs on which every method succeeded (MAP >= 0.05), Succ the number of
    successful pairs.
    '''
    assert args, 'Usage: cle table SUMMARY.yaml ...'
    summaries = []
    for path in args:
        summary = output.read_yaml(path)
        missing = [k for k in ('method', 'pair', 'map', 'successful')
                   if k not in summary]
        if missing:
            raise errors.EvaluationError('{}: missing {}'.format(
                path, ', '.join(missing)))
        summaries.append(summary)
    print(evaluation.results_table(summaries))


def _read_columns(path):
    xs, ys = [], []
    with io.open(path, encoding='utf-8') as fid:
        for lineno, line in enumerate(fid, 1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            if len(fields) < 2:
                raise errors.ParseError(path, lineno, 'expected 2 numbers')
            try:
                xs.append(float(fields[-2]))
                ys.append(float(fields[-1]))
            except ValueError:
                raise errors.ParseError(path, lineno, 'non-numeric value')
    return xs, ys


@command('correlate')
def cmd_correlate(ctx, *args):
    '''Correlate two score columns (e.g. BLI MAP against a downstream score).

    Usage:
    >>> cle correlate [--correlation=pearson|spearman] SCORES

    SCORES has one "[label] x y" line per system.
    '''
    assert len(args) == 1, 'Usage: cle correlate SCORES'
    xs, ys = _read_columns(args[0])
    kind = ctx.options.correlation
    r = evaluation.rank_correlation(xs, ys, kind)
    print('{} r = {:.4f} over {} systems'.format(kind, r, len(xs)))


@command('help')
def help_(ctx, *args):
    '''Show help.

    Example:
    >>> cle help
    >>> cle help align
    '''

    if len(args) == 0:

        width = max(len(n) for n in COMMANDS)
        print()
        print('cle {} - cross-lingual embedding alignment'.format(__version__))
        print()
        print('Available commands:')
        for name, cmd in sorted(COMMANDS.items()):
            print('{} - {}'.format(name.rjust(width), cmd.desc()))
        print()
        print('Type "cle help <cmd>" for more.')
        print()

    else:
        name = args[0]
        assert name in COMMANDS, 'Unknown command {}'.format(name)
        print(COMMANDS[name].help())


def exec_(cmd, ctx, args):
    f = COMMANDS.get(cmd)
    assert f is not None, 'Unknown command {}'.format(cmd)
    return f(ctx, *args)


def _format_exception(exc):
    if isinstance(exc, (errors.CLEError, AssertionError, EnvironmentError,
                        OptionsError)):
        logger.error('ERROR: %s', exc)
        logger.debug('Traceback', exc_info=True)
    else:
        logger.exception('ERROR')


class ExitStatus(object):

    def __init__(self):
        self.code = 0


@contextlib.contextmanager
def exec_ctx(status):
    try:
        yield status
    except KeyboardInterrupt:
        print('Interrupted.', file=sys.stderr)
        status.code = 130
    except Exception as exc:  # pylint: disable=broad-except
        _format_exception(exc)
        status.code = 1


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    if len(argv) < 2 or argv[1].startswith('-'):
        name, rest = 'help', argv[1:]
    else:
        name, rest = argv[1], argv[2:]

    status = ExitStatus()
    with exec_ctx(status):
        parser = _option_parser()
        args = parser.parse_command_line([argv[0]] + rest)
        positional, overrides = _split_args(args)
        exec_(name, Context(parser, overrides), positional)
    return status.code


if __name__ == '__main__':
    sys.exit(main())
