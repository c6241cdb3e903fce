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
"""Reader and writer of ``.flo`` files.

Layout, little-endian: the float ``202021.25`` (the bytes ``PIEH``), the
width and height as 32-bit integers, then ``height * width`` pairs of
32-bit floats ``(du, dv)`` in row-major order. Invalid pixels are written
with the ``1e10`` sentinel; any vector longer than ``1e9`` is read back as
invalid.
"""
import numpy as np

from epiflow import error
from epiflow.flow_field import FlowField

MAGIC = 202021.25
HEADER_SIZE = 12
SENTINEL = 1e10
INVALID_ABOVE = 1e9


def read_flo(data):
    """Decode the `data` bytes.

    :raise: :class:`epiflow.error.BadMagic`,
        :class:`epiflow.error.NonPositiveDims`,
        :class:`epiflow.error.TruncatedPayload`
    """
    data = bytes(data)
    if len(data) < 4 or np.frombuffer(data[:4], '<f4')[0] != MAGIC:
        raise error.BadMagic("Not a .flo stream (bad magic number)")
    if len(data) < HEADER_SIZE:
        raise error.TruncatedPayload("The .flo header is truncated")
    width, height = np.frombuffer(data[4:HEADER_SIZE], '<i4')
    if width <= 0 or height <= 0:
        raise error.NonPositiveDims(
            "Invalid .flo size {0}x{1}".format(width, height))
    expected = HEADER_SIZE + 8 * int(width) * int(height)
    if len(data) < expected:
        raise error.TruncatedPayload(
            "A {0}x{1} flow needs {2} bytes, got {3}".format(
                width, height, expected, len(data)))
    if len(data) > expected:
        raise error.FormatError(
            "{0} unexpected trailing bytes".format(len(data) - expected))
    vectors = np.frombuffer(data[HEADER_SIZE:], '<f4').astype(float)
    vectors = vectors.reshape(int(height), int(width), 2)
    with np.errstate(over='ignore', invalid='ignore'):
        magnitude = np.hypot(vectors[..., 0], vectors[..., 1])
    valid = np.isfinite(magnitude) & (magnitude <= INVALID_ABOVE)
    return FlowField(vectors, valid)


def write_flo(flow):
    """Encode `flow`, invalid pixels holding the sentinel."""
    header = np.array([MAGIC], '<f4').tobytes() + \
        np.array([flow.width, flow.height], '<i4').tobytes()
    vectors = np.where(flow.valid[..., None], flow.vectors, SENTINEL)
    return header + vectors.astype('<f4').tobytes()


def load_flo(path):
    """Read the `path` file.

    :raise: :class:`epiflow.error.FormatError`, :class:`OSError`
    """
    with open(path, 'rb') as file_:
        return read_flo(file_.read())


def save_flo(flow, path):
    with open(path, 'wb') as file_:
        file_.write(write_flo(flow))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
