'''Atomic writing of result files.

Every file is first written to a hidden temporary sibling and renamed over
its final path only when the write completed, so an interrupted command
never leaves a half-written artifact behind.
'''

import contextlib
import io
import logging
import os
import shutil
import tempfile

import yaml

logger = logging.getLogger('cle.output')


def ensure_directory(path):
    if path and not os.path.isdir(path):
        os.makedirs(path)
    return path


def _clear(fname):
    if os.path.exists(fname):
        os.remove(fname)


@contextlib.contextmanager
def _clearing(fname):
    '''Remove the temporary file on any error, including KeyboardInterrupt.'''
    try:
        yield
    except BaseException:
        _clear(fname)
        raise


@contextlib.contextmanager
def writing(path):
    directory = ensure_directory(os.path.dirname(os.path.abspath(path)))
    fd, tmp = tempfile.mkstemp(
        prefix='.' + os.path.basename(path) + '.', dir=directory)
    with _clearing(tmp):
        with io.open(fd, 'w', encoding='utf-8', newline='\n') as fid:
            yield fid
        os.replace(tmp, path)
    logger.debug('Wrote %s', path)


@contextlib.contextmanager
def staging(directory):
    '''Yield a hidden sibling directory that becomes directory on success.

    When directory already exists the staged files are moved into it one
    by one; files it holds that were not staged are left alone.
    '''
    directory = os.path.abspath(directory)
    parent = ensure_directory(os.path.dirname(directory))
    tmp = tempfile.mkdtemp(
        prefix='.' + os.path.basename(directory) + '.', dir=parent)
    try:
        yield tmp
        if not os.path.isdir(directory):
            os.rename(tmp, directory)
        else:
            for name in sorted(os.listdir(tmp)):
                os.replace(os.path.join(tmp, name),
                           os.path.join(directory, name))
    finally:
        if os.path.isdir(tmp):
            shutil.rmtree(tmp)
    logger.debug('Wrote %s', directory)


def write_yaml(data, path):
    with writing(path) as fid:
        yaml.safe_dump(data, fid, default_flow_style=False, sort_keys=True)


def read_yaml(path):
    with io.open(path, encoding='utf-8') as fid:
        return yaml.safe_load(fid) or {}
