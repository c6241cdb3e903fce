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
"""Binary PGM (``P5``) and PPM (``P6``) images with a maximum value of 255.
Other variants are refused.
"""
import re

import numpy as np

from epiflow import error

CHANNELS = {b'P5': 1, b'P6': 3}
MAXVAL = 255

TOKEN = re.compile(br'(?:\s|#[^\n]*\n?)*(\S+)')


def _header(data):
    """Return the magic, width, height and maxval tokens and the offset of
    the pixel data.
    """
    tokens, offset = [], 0
    while len(tokens) < 4:
        match = TOKEN.match(data, offset)
        if not match:
            raise error.TruncatedPayload("The image header is truncated")
        tokens.append(match.group(1))
        offset = match.end()
        if len(tokens) == 1 and tokens[0] not in CHANNELS:
            raise error.BadMagic(
                "Only binary PGM/PPM images (P5, P6) are supported")
    # a single whitespace separates the header from the pixels
    return tokens, offset + 1


def read_pnm(data):
    """Decode a ``P5`` or ``P6`` image.

    :return: an ``(H, W)`` or ``(H, W, 3)`` ``uint8`` array
    :raise: :class:`epiflow.error.FormatError`
    """
    data = bytes(data)
    tokens, offset = _header(data)
    try:
        width, height, maxval = [int(token) for token in tokens[1:]]
    except ValueError:
        raise error.FormatError("Malformed image header")
    if width <= 0 or height <= 0:
        raise error.NonPositiveDims(
            "Invalid image size {0}x{1}".format(width, height))
    if maxval != MAXVAL:
        raise error.FormatError(
            "Only a maximum value of 255 is supported (got {0})".format(
                maxval))
    channels = CHANNELS[tokens[0]]
    size = width * height * channels
    if len(data) < offset + size:
        raise error.TruncatedPayload(
            "A {0}x{1} image needs {2} bytes of pixels, got {3}".format(
                width, height, size, max(len(data) - offset, 0)))
    pixels = np.frombuffer(data[offset:offset + size], np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return pixels.reshape(shape).copy()


def write_pnm(image):
    """Encode a grey (``P5``) or RGB (``P6``) image; values are rounded and
    clipped to ``[0, 255]``.
    """
    image = np.asarray(image)
    if image.ndim == 2:
        magic = b'P5'
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b'P6'
    else:
        raise error.ValidationError(
            "Can not write an image of shape {0}".format(image.shape))
    pixels = np.clip(np.rint(image), 0, MAXVAL).astype(np.uint8)
    header = magic + '\n{0} {1}\n{2}\n'.format(
        image.shape[1], image.shape[0], MAXVAL).encode('ascii')
    return header + pixels.tobytes()


def load_pnm(path):
    with open(path, 'rb') as file_:
        return read_pnm(file_.read())


def save_pnm(image, path):
    with open(path, 'wb') as file_:
        file_.write(write_pnm(image))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
