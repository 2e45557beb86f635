from __future__ import unicode_literals

from functools import partial
import sys

import six


def colorize(color, s):
    if _supports_color(sys.stdout):
        color_open = '\033[{}m'.format(color)
        color_close = '\033[0m'
    else:
        color_open = color_close = ''
    if not isinstance(s, six.string_types):
        s = six.text_type(s)
    return color_open + s + color_close


def _supports_color(stream):

    try:
        import curses
    except ImportError:
        curses = None

    color = False
    if curses and hasattr(stream, 'isatty') and stream.isatty():
        try:
            curses.setupterm()
            if curses.tigetnum(str("colors")) > 0:
                color = True
        except Exception:
            pass
    return color


def score(value, digits=4):
    if value is None:
        return darkgray('-'.center(digits + 2))
    return '{:.{}f}'.format(value, digits)


def success(flag):
    return green('yes') if flag else red('no')


def verdict(significant):
    return boldgreen('significant') if significant else \
        darkgray('not significant')


def pvalue(p):
    if p < 1e-4:
        return '{:.2e}'.format(p)
    return '{:.4f}'.format(p)


def ltrunc(s, n):
    return s[:n].ljust(n)


class Renderable(object):
    '''An object printed through its tornado TMPL template.'''

    TMPL = None

    def to_string(self, tmpl=None):
        if tmpl is None:
            tmpl = self.TMPL
        txt = tmpl.generate(
            obj=self,
            ui=sys.modules[__name__],
        ).decode('utf-8')
        # Compact trailing newlines
        if txt.endswith('\n\n'):
            txt = txt.strip() + '\n'
        return txt

    def __str__(self):
        return self.to_string()


# http://misc.flogisoft.com/bash/tip_colors_and_formatting
darkgray = partial(colorize, '0;90')
green = partial(colorize, '0;32')
red = partial(colorize, '0;31')

lightblue = partial(colorize, '0;94')

bold = partial(colorize, '1')
boldgreen = partial(colorize, '1;32')


def title(s):
    return lightblue(s)
