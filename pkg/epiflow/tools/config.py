# -*- coding: UTF-8 -*-
##############################################################################
#
#    EpiFlow
#    Copyright (C) 2021-2026 The EpiFlow Authors.
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU Lesser General Public License as published
#    by the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU Lesser General Public License for more details.
#
#    You should have received a copy of the GNU Lesser General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
#
##############################################################################
"""This module contains some helper functions used to read and write flat
``key=value`` configuration files::

    # loss weights
    w_sed = 1.0
    w_cyc = 0.5
    reduction = mean

Files have no section header; keys are case-sensitive.
"""
import configparser

from epiflow import error

SECTION = 'epiflow'


def _parser():
    conf = configparser.ConfigParser(
        delimiters=('=',), comment_prefixes=('#', ';'),
        inline_comment_prefixes=('#',), interpolation=None)
    conf.optionxform = str
    return conf


def loads(text):
    """Return the ``{key: value}`` dictionary (values as strings) described by
    `text`.

    >>> from epiflow.tools import config
    >>> config.loads('alpha = 2.5\\nreduction=sum\\n')
    {'alpha': '2.5', 'reduction': 'sum'}

    :raise: :class:`epiflow.error.ValidationError`
    """
    conf = _parser()
    try:
        conf.read_string(u'[{0}]\n{1}'.format(SECTION, text))
    except configparser.Error as exc:
        raise error.ValidationError(
            "Malformed configuration: {0}".format(exc))
    return dict(conf.items(SECTION))


def load(path):
    """Return the ``{key: value}`` dictionary read from the `path` file.

    :raise: :class:`epiflow.error.ValidationError`, :class:`OSError`
    """
    with open(path, 'r') as file_:
        return loads(file_.read())


def dumps(options):
    """Return `options` formatted as ``key = value`` lines, in the order of
    the mapping.
    """
    lines = []
    for key, value in options.items():
        if isinstance(value, (tuple, list)):
            value = ','.join(repr(item) for item in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(u'{0} = {1}'.format(key, value))
    return u'\n'.join(lines) + u'\n'


def save(path, options):
    """Write `options` to the `path` file."""
    with open(path, 'w') as file_:
        file_.write(dumps(options))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
