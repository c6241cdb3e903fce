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
"""This module contains the :class:`RunManifest` class and the helper
functions used to save and load it.

A manifest is written in every output directory of the command line
interface. It records what was run, with which resolved options and on which
inputs, so that two runs can be compared by their manifests::

    [run]
    subcommand = match
    version = 0.3.0
    seed = 0

    [config]
    radius = 5.0

    [inputs]
    kpts_a = 6a3c0b9a2d1e44f1
"""
import configparser
import os

import epiflow
from epiflow import error, tools

FILENAME = 'manifest.ini'


def digest_file(path):
    """Return the FNV-1a digest of the `path` file as 16 hexadecimal digits."""
    with open(path, 'rb') as file_:
        return '{0:016x}'.format(tools.fnv1a_64(file_.read()))


class RunManifest(object):
    """Describe a run of a subcommand.

    >>> from epiflow.tools.manifest import RunManifest
    >>> manifest = RunManifest('fit', {'model': 'homography'}, seed=3)
    >>> manifest.add_input('matches', 'matches.csv')  # doctest: +SKIP
    """
    def __init__(self, subcommand, config=None, inputs=None, seed=0,
                 version=None):
        self.subcommand = subcommand
        self.config = dict(config or {})
        self.inputs = dict(inputs or {})
        self.seed = seed
        self.version = version or epiflow.__version__

    def add_input(self, name, path):
        """Record the digest of the `path` input file under `name`."""
        self.inputs[name] = digest_file(path)

    def __eq__(self, other):
        return isinstance(other, RunManifest) and \
            self._sections() == other._sections()

    def __ne__(self, other):
        return not self == other

    def _sections(self):
        config = dict((key, str(value) if not isinstance(value, float)
                       else repr(value))
                      for key, value in self.config.items())
        return {
            'run': {'subcommand': self.subcommand,
                    'version': self.version,
                    'seed': str(self.seed)},
            'config': config,
            'inputs': dict((key, str(value))
                           for key, value in self.inputs.items()),
        }


def save(manifest, directory):
    """Save `manifest` in the `directory` folder and return the path of the
    file written.
    """
    conf = configparser.ConfigParser(interpolation=None)
    conf.optionxform = str
    for name, options in sorted(manifest._sections().items(),
                                key=lambda item: ['run', 'config',
                                                  'inputs'].index(item[0])):
        conf.add_section(name)
        for key in sorted(options):
            conf.set(name, key, options[key])
    path = os.path.join(directory, FILENAME)
    with open(path, 'w') as file_:
        conf.write(file_)
    return path


def load(path):
    """Load the manifest stored in the `path` file (or in the manifest file
    of the `path` directory).

    :raise: :class:`epiflow.error.FormatError`
    """
    if os.path.isdir(path):
        path = os.path.join(path, FILENAME)
    conf = configparser.ConfigParser(interpolation=None)
    conf.optionxform = str
    conf.read([path])
    if not conf.has_section('run'):
        raise error.FormatError(
            "'{0}' does not contain a run manifest".format(path))
    return RunManifest(
        conf.get('run', 'subcommand'),
        dict(conf.items('config')) if conf.has_section('config') else {},
        dict(conf.items('inputs')) if conf.has_section('inputs') else {},
        seed=conf.getint('run', 'seed'),
        version=conf.get('run', 'version'))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
