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
"""Text formats: cameras, poses, 3x3 matrices, matches, transform records
and inlier masks.

Numbers are whitespace-separated and written with :func:`repr`, so that
every writer/reader pair is exact. Empty lines and lines starting with
``#`` are ignored by the whitespace formats.

    >>> from epiflow.io import text
    >>> ka, kb = text.read_cameras('500 500 320 240\\n')
    >>> ka == kb
    True
"""
import csv
import io

import numpy as np

from epiflow import error, geometry, matcher, synth_transform
from epiflow.model_fit import Homography

MATCH_COLUMNS = ('xa', 'ya', 'xb', 'yb')
MATCH_SET_COLUMNS = ('idx_a', 'idx_b', 'stage', 'similarity') + MATCH_COLUMNS


def _records(text):
    """Return the non-empty, non-comment lines of `text` as float lists."""
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        try:
            records.append([float(value) for value in line.split()])
        except ValueError:
            raise error.FormatError(
                "'{0}' is not a list of numbers".format(line))
    return records


def _format(values):
    return ' '.join(repr(float(value)) for value in values)


# ------------- #
# -- Cameras -- #
# ------------- #

def read_cameras(text):
    """Read the intrinsics of cameras A and B, one ``fx fy cx cy [skew]``
    record per line. A single record is shared by both cameras.

    :return: a ``(ka, kb)`` tuple of
        :class:`epiflow.geometry.CameraIntrinsics`
    :raise: :class:`epiflow.error.FormatError`
    """
    records = _records(text)
    if len(records) not in (1, 2):
        raise error.FormatError(
            "Expected one or two camera records, got {0}".format(len(records)))
    cameras = []
    for record in records:
        if len(record) not in (4, 5):
            raise error.FormatError(
                "A camera record has 4 or 5 numbers, got {0}".format(
                    len(record)))
        try:
            cameras.append(geometry.CameraIntrinsics(*record))
        except error.ValidationError as exc:
            raise error.FormatError(str(exc))
    if len(cameras) == 1:
        cameras.append(cameras[0])
    return tuple(cameras)


def write_cameras(ka, kb):
    return '\n'.join(_format(k.as_tuple()) for k in (ka, kb)) + '\n'


# ---------- #
# -- Pose -- #
# ---------- #

def read_pose(text):
    """Read a ``r11 ... r33 tx ty tz`` record (rotation row-major).

    :raise: :class:`epiflow.error.FormatError`
    """
    values = sum(_records(text), [])
    if len(values) != 12:
        raise error.FormatError(
            "A pose has 12 numbers, got {0}".format(len(values)))
    try:
        return geometry.RelativePose(np.reshape(values[:9], (3, 3)),
                                     values[9:])
    except error.ValidationError as exc:
        raise error.FormatError(str(exc))


def write_pose(pose):
    return _format(list(pose.rotation.reshape(-1)) +
                   list(pose.translation)) + '\n'


# -------------- #
# -- Matrices -- #
# -------------- #

def read_matrix(text):
    """Read 9 numbers as a 3x3 matrix, row-major.

    :raise: :class:`epiflow.error.FormatError`
    """
    values = sum(_records(text), [])
    if len(values) != 9:
        raise error.FormatError(
            "A 3x3 matrix has 9 numbers, got {0}".format(len(values)))
    return np.reshape(values, (3, 3))


def write_matrix(m):
    m = np.asarray(getattr(m, 'm', m), dtype=float).reshape(3, 3)
    return '\n'.join(_format(row) for row in m) + '\n'


def read_fundamental(text):
    try:
        return geometry.FundamentalMatrix(read_matrix(text))
    except error.ValidationError as exc:
        raise error.FormatError(str(exc))


def read_homography(text):
    try:
        return Homography(read_matrix(text))
    except error.ValidationError as exc:
        raise error.FormatError(str(exc))


# ------------- #
# -- Matches -- #
# ------------- #

def _numeric(row):
    try:
        [float(value) for value in row]
    except ValueError:
        return False
    return True


def _table(text, columns, headerless=False):
    """Read the CSV `text` and return the `columns` as float arrays,
    looked up by header name. With `headerless`, a file whose first row is
    numeric has no header and holds the `columns` in order.
    """
    rows = [(number, row) for number, row in
            enumerate(csv.reader(io.StringIO(text)), 1) if row]
    if headerless and rows and _numeric(rows[0][1]):
        header = list(columns)
    else:
        header = [name.strip() for name in rows.pop(0)[1]] if rows else \
            list(columns)
    missing = set(columns) - set(header)
    if missing:
        raise error.FormatError(
            "Missing CSV columns: {0}".format(', '.join(sorted(missing))))
    index = dict((name, header.index(name)) for name in columns)
    out = dict((name, []) for name in columns)
    for number, row in rows:
        if len(row) != len(header):
            raise error.FormatError(
                "CSV row {0} has {1} fields, expected {2}".format(
                    number, len(row), len(header)))
        try:
            for name in columns:
                out[name].append(float(row[index[name]]))
        except ValueError:
            raise error.FormatError("Malformed CSV row {0}".format(number))
    return dict((name, np.array(values, dtype=float))
                for name, values in out.items())


def read_matches(text):
    """Read a ``xa,ya,xb,yb`` CSV file. The header line is optional; other
    columns (the match set ones, for instance) are ignored.

    :return: a ``(pa, pb)`` tuple of ``(N, 2)`` arrays
    :raise: :class:`epiflow.error.FormatError`
    """
    table = _table(text, MATCH_COLUMNS, headerless=True)
    pa = np.stack([table['xa'], table['ya']], axis=1)
    pb = np.stack([table['xb'], table['yb']], axis=1)
    return pa, pb


def write_matches(pa, pb):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(MATCH_COLUMNS)
    for a, b in zip(np.reshape(pa, (-1, 2)), np.reshape(pb, (-1, 2))):
        writer.writerow([repr(float(value)) for value in (a[0], a[1],
                                                          b[0], b[1])])
    return out.getvalue()


def read_match_set(text):
    """Read the CSV written by :func:`write_match_set`.

    :return: a ``(matches, pa, pb)`` tuple
    :raise: :class:`epiflow.error.FormatError`
    """
    table = _table(text, MATCH_SET_COLUMNS)
    try:
        matches = matcher.MatchSet(table['idx_a'].astype(int),
                                   table['idx_b'].astype(int),
                                   table['stage'].astype(int),
                                   table['similarity'])
    except error.ValidationError as exc:
        raise error.FormatError(str(exc))
    order = np.argsort(table['idx_a'], kind='stable')
    pa = np.stack([table['xa'], table['ya']], axis=1)[order]
    pb = np.stack([table['xb'], table['yb']], axis=1)[order]
    return matches, pa, pb


def write_match_set(matches, a, b):
    """Format `matches` between the keypoint sets `a` and `b`, with the
    matched coordinates so that the file can be fed to ``fit``.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(MATCH_SET_COLUMNS)
    for i, j, stage, sim in matches.pairs():
        writer.writerow([i, j, stage, repr(sim)] +
                        [repr(float(value)) for value in a.points[i]] +
                        [repr(float(value)) for value in b.points[j]])
    return out.getvalue()


# ---------------- #
# -- Transforms -- #
# ---------------- #

def read_transform(text):
    """Read the first record of `text` as a
    :class:`epiflow.synth_transform.TransformSpec`.

    :raise: :class:`epiflow.error.FormatError`
    """
    for line in text.splitlines():
        if line.strip() and not line.strip().startswith('#'):
            return synth_transform.TransformSpec.from_record(line)
    raise error.FormatError("No transform record found")


def write_transform(t):
    return t.to_record() + '\n'


# ----------- #
# -- Masks -- #
# ----------- #

def read_mask(text):
    """Read one ``0`` or ``1`` per line."""
    values = []
    for line in text.split():
        if line not in ('0', '1'):
            raise error.FormatError(
                "'{0}' is not a mask value (0 or 1)".format(line))
        values.append(line == '1')
    return np.array(values, dtype=bool)


def write_mask(mask):
    return ''.join('1\n' if value else '0\n' for value in mask)

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
