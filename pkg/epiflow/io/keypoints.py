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
"""Keypoint files.

The binary format starts with ``EPKP``, the keypoint count and the
descriptor dimension (unsigned 32-bit integers), followed for each keypoint
by ``x``, ``y`` and the descriptor, all 32-bit floats, little-endian.

The text format is a CSV file with a ``x,y,d0,...`` header line.
"""
import csv
import io

import numpy as np

from epiflow import error
from epiflow.matcher import KeypointSet

MAGIC = b'EPKP'
HEADER_SIZE = 12


def _record(dim):
    return np.dtype([('xy', '<f4', (2,)), ('descriptor', '<f4', (dim,))])


def read_binary(data, width=None, height=None):
    """Decode an ``EPKP`` stream.

    :raise: :class:`epiflow.error.FormatError`
    """
    data = bytes(data)
    if data[:4] != MAGIC:
        raise error.BadMagic("Not a keypoint stream (bad magic)")
    if len(data) < HEADER_SIZE:
        raise error.TruncatedPayload("The keypoint header is truncated")
    count, dim = np.frombuffer(data[4:HEADER_SIZE], '<u4')
    if dim == 0:
        raise error.NonPositiveDims("The descriptor dimension is zero")
    record = _record(int(dim))
    expected = HEADER_SIZE + int(count) * record.itemsize
    if len(data) != expected:
        raise error.TruncatedPayload(
            "{0} keypoints of dimension {1} need {2} bytes, got {3}".format(
                count, dim, expected, len(data)))
    records = np.frombuffer(data[HEADER_SIZE:], record)
    return KeypointSet(records['xy'].astype(float),
                       records['descriptor'].astype(float).reshape(
                           int(count), int(dim)), width, height)


def write_binary(keypoints):
    header = MAGIC + np.array([len(keypoints), keypoints.dim],
                              '<u4').tobytes()
    records = np.zeros(len(keypoints), _record(keypoints.dim))
    records['xy'] = keypoints.points
    records['descriptor'] = keypoints.descriptors
    return header + records.tobytes()


def read_csv(text, width=None, height=None):
    """Decode the CSV form.

    :raise: :class:`epiflow.error.FormatError`
    """
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    columns = None
    if rows and rows[0][0].strip() == 'x':
        columns = len(rows[0])
        rows = rows[1:]
    if not rows:
        if columns is None or columns < 3:
            raise error.FormatError("Empty keypoint CSV (no descriptor size)")
        return KeypointSet(np.zeros((0, 2)), np.zeros((0, columns - 2)),
                           width, height)
    try:
        values = np.array([[float(value) for value in row] for row in rows])
    except ValueError as exc:
        raise error.FormatError("Malformed keypoint CSV: {0}".format(exc))
    if values.ndim != 2 or values.shape[1] < 3:
        raise error.FormatError(
            "Keypoint rows need x, y and at least one descriptor value")
    return KeypointSet(values[:, :2], values[:, 2:], width, height)


def write_csv(keypoints):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['x', 'y'] + ['d{0}'.format(index)
                                  for index in range(keypoints.dim)])
    for point, descriptor in zip(keypoints.points, keypoints.descriptors):
        writer.writerow([repr(float(value)) for value in point] +
                        [repr(float(value)) for value in descriptor])
    return out.getvalue()

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
