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
"""This package provides the codecs of the files read and written by
`EpiFlow`:

    - :mod:`epiflow.io.flo`: dense flows (``.flo``),
    - :mod:`epiflow.io.keypoints`: keypoints and descriptors (binary
      ``.epkp`` or ``.csv``),
    - :mod:`epiflow.io.text`: cameras, poses, matrices, matches, transform
      records and inlier masks,
    - :mod:`epiflow.io.pnm`: binary PGM/PPM images.

Codecs work on ``bytes`` or ``str``; the helpers below add the file access.
Readers raise a :class:`epiflow.error.FormatError` on malformed input and
never return partial data.
"""
import os

from epiflow import error
from epiflow.io import flo, keypoints, pnm, text

KEYPOINT_FORMATS = {
    '.epkp': (keypoints.read_binary, keypoints.write_binary, True),
    '.csv': (keypoints.read_csv, keypoints.write_csv, False),
}


def _format(path):
    extension = os.path.splitext(path)[1].lower()
    if extension not in KEYPOINT_FORMATS:
        txt = ("The keypoint format '{0}' is not supported. "
               "Please choose a format among these ones: {1}")
        txt = txt.format(extension, sorted(KEYPOINT_FORMATS))
        raise error.ValidationError(txt)
    return KEYPOINT_FORMATS[extension]


def load_keypoints(path, width=None, height=None):
    """Read the keypoints stored in `path`, the format being chosen from the
    file extension (``.epkp`` or ``.csv``).

        >>> from epiflow import io
        >>> kpts = io.load_keypoints('image_a.epkp')  # doctest: +SKIP

    :raise: :class:`epiflow.error.ValidationError`,
        :class:`epiflow.error.FormatError`, :class:`OSError`
    """
    reader, _, binary = _format(path)
    data = read_bytes(path) if binary else read_text(path)
    return reader(data, width, height)


def save_keypoints(kpts, path):
    _, writer, binary = _format(path)
    if binary:
        write_bytes(path, writer(kpts))
    else:
        write_text(path, writer(kpts))


def read_bytes(path):
    with open(path, 'rb') as file_:
        return file_.read()


def write_bytes(path, data):
    with open(path, 'wb') as file_:
        file_.write(data)


def read_text(path):
    """Read the `path` text file.

    :raise: :class:`epiflow.error.FormatError` if it is not UTF-8 text
    """
    try:
        with open(path, 'r', encoding='utf-8', newline='') as file_:
            return file_.read()
    except UnicodeDecodeError as exc:
        raise error.FormatError(
            "'{0}' is not a text file: {1}".format(path, exc))


def write_text(path, content):
    with open(path, 'w', encoding='utf-8', newline='') as file_:
        file_.write(content)


def load(path, reader):
    """Read the `path` text file with the `reader` codec of
    :mod:`epiflow.io.text`.
    """
    return reader(read_text(path))


__all__ = ['flo', 'keypoints', 'pnm', 'text', 'KEYPOINT_FORMATS',
           'load_keypoints', 'save_keypoints', 'read_bytes', 'write_bytes',
           'read_text', 'write_text', 'load']

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
