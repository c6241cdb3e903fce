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
"""This module contains the :class:`Config <epiflow.tools.Config>` class
which manages typed options (loss weights, optimizer settings, ...), and
some useful helper functions used internally in `EpiFlow`.
"""
import collections.abc
import os
import re

from epiflow import error

MATCH_SIZE = re.compile(r'^\s*(\d+)\s*[xX]\s*(\d+)\s*$')

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3


def to_bool(value):
    """Convert `value` to a boolean, accepting the usual textual forms.

        >>> from epiflow.tools import to_bool
        >>> to_bool('yes'), to_bool('0'), to_bool(True)
        (True, False, True)

    :raise: :class:`ValueError`
    """
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError("'{0}' is not a boolean".format(value))


def to_float_pair(value):
    """Convert `value` (``'0.75,1.33'`` or a sequence) to a pair of floats."""
    if isinstance(value, str):
        value = [item for item in value.replace(',', ' ').split() if item]
    low, high = [float(item) for item in value]
    return (low, high)


class Config(collections.abc.MutableMapping):
    """Class which manages a set of typed options.

    Subclasses declare their options in the ``OPTIONS`` dictionary as
    ``{name: (caster, default)}`` and may override :meth:`_check` to validate
    values. Options are available both as keys and as attributes:

    >>> from epiflow.supervision import LossConfig
    >>> cfg = LossConfig(alpha=2.0)
    >>> cfg['alpha'], cfg.alpha
    (2.0, 2.0)
    >>> cfg['unknown'] = 1
    Traceback (most recent call last):
    ...
    epiflow.error.ValidationError: 'unknown' is not an option of LossConfig
    """
    OPTIONS = {}

    def __init__(self, options=None, **kwargs):
        super(Config, self).__init__()
        self._options = dict(
            (key, default) for key, (_, default) in self.OPTIONS.items())
        values = dict(options or {})
        values.update(kwargs)
        for key, value in values.items():
            self[key] = value

    @classmethod
    def from_mapping(cls, mapping):
        """Build a configuration from the keys of `mapping` this class knows
        about; other keys are ignored.
        """
        return cls(dict((key, value) for key, value in mapping.items()
                        if key in cls.OPTIONS))

    def __getitem__(self, key):
        return self._options[key]

    def __setitem__(self, key, value):
        """Cast and check `value` before storing it."""
        if key not in self.OPTIONS:
            raise error.ValidationError(
                "'{0}' is not an option of {1}".format(
                    key, self.__class__.__name__))
        caster = self.OPTIONS[key][0]
        try:
            value = caster(value)
        except (TypeError, ValueError):
            raise error.ValidationError(
                "Invalid value '{0}' for the '{1}' option".format(value, key))
        self._check(key, value)
        self._options[key] = value

    def __delitem__(self, key):
        raise error.ValidationError(
            "The '{0}' option can not be removed".format(key))

    def __iter__(self):
        return iter(self.OPTIONS)

    def __len__(self):
        return len(self._options)

    def __getattr__(self, name):
        options = self.__dict__.get('_options')
        if options is not None and name in options:
            return options[name]
        raise AttributeError(name)

    def __str__(self):
        return self._options.__str__()

    def __repr__(self):
        return '{0}({1!r})'.format(self.__class__.__name__, self._options)

    def _check(self, key, value):
        """Hook to validate `value` for the `key` option."""
        pass


def parse_size(text):
    """Parse a ``WIDTHxHEIGHT`` string.

        >>> from epiflow.tools import parse_size
        >>> parse_size('64x48')
        (64, 48)

    :return: a ``(width, height)`` tuple
    :raise: :class:`epiflow.error.ValidationError`
    """
    match = MATCH_SIZE.match(text or '')
    if not match:
        raise error.ValidationError(
            "'{0}' is not a size (expected WIDTHxHEIGHT)".format(text))
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise error.ValidationError("Size '{0}' must be positive".format(text))
    return width, height


def fnv1a_64(data):
    """Return the 64-bit FNV-1a digest of `data` (bytes) as an integer.

        >>> from epiflow.tools import fnv1a_64
        >>> '{0:016x}'.format(fnv1a_64(b''))
        'cbf29ce484222325'
    """
    digest = FNV_OFFSET
    for byte in bytearray(data):
        digest ^= byte
        digest = (digest * FNV_PRIME) & 0xffffffffffffffff
    return digest


def resolve_threads(value=None):
    """Return the number of worker threads to use: `value` if given,
    else the ``EPIFLOW_THREADS`` environment variable, else ``1``.

    :raise: :class:`epiflow.error.ValidationError`
    """
    if value is None:
        value = os.environ.get('EPIFLOW_THREADS') or 1
    try:
        threads = int(value)
    except ValueError:
        raise error.ValidationError(
            "The thread count '{0}' is invalid. An integer is required.".format(
                value))
    if threads < 1:
        raise error.ValidationError(
            "The thread count must be at least 1 (got {0})".format(threads))
    return threads

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
