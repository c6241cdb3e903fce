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
"""Dense flow fields, sub-pixel sampling and cycle distances.

A flow field stores, for every pixel ``x = (u, v)`` of a source image, an
offset ``(du, dv)`` such that the corresponding point in the target image is
``x + f(x)``. Pixels may be masked invalid.

    >>> from epiflow.flow_field import FlowField, PixelGrid, apply
    >>> flow = FlowField.constant(PixelGrid(8, 6), (3., 4.))
    >>> apply(flow, (1, 1))
    array([4., 5.])
"""
import numpy as np
from scipy import ndimage

from epiflow import error


class PixelGrid(object):
    """The pixel locations of a ``width`` x ``height`` image, iterated in
    row-major order.

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, width, height):
        self._width, self._height = int(width), int(height)
        if self._width < 1 or self._height < 1:
            raise error.ValidationError(
                "A grid needs at least one pixel (got {0}x{1})".format(
                    width, height))

    width = property(lambda self: self._width, doc="Number of columns.")
    height = property(lambda self: self._height, doc="Number of rows.")
    shape = property(lambda self: (self._height, self._width),
                     doc="``(height, width)``, the array shape.")
    size = property(lambda self: self._height * self._width,
                    doc="Number of pixels.")

    def coordinates(self):
        """Return a ``(height, width, 2)`` array of ``(u, v)`` locations."""
        v, u = np.mgrid[0:self._height, 0:self._width].astype(float)
        return np.stack([u, v], axis=-1)

    def contains(self, point):
        """Return `True` if the integer pixel `point` lies in the grid."""
        u, v = point
        return 0 <= u < self._width and 0 <= v < self._height

    def __iter__(self):
        for v in range(self._height):
            for u in range(self._width):
                yield (u, v)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        return isinstance(other, PixelGrid) and self.shape == other.shape

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'PixelGrid({0}, {1})'.format(self._width, self._height)


class FlowField(object):
    """An immutable dense flow field.

    `vectors` is a ``(height, width, 2)`` array, `valid` an optional
    ``(height, width)`` boolean mask (all valid by default). Valid entries
    must be finite.

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, vectors, valid=None):
        vectors = np.array(vectors, dtype=float)
        if vectors.ndim != 3 or vectors.shape[2] != 2:
            raise error.ValidationError(
                "Flow vectors must have a (H, W, 2) shape (got {0})".format(
                    vectors.shape))
        if valid is None:
            valid = np.ones(vectors.shape[:2], dtype=bool)
        valid = np.array(valid, dtype=bool)
        if valid.shape != vectors.shape[:2]:
            raise error.ValidationError(
                "The mask shape {0} does not match the flow shape {1}".format(
                    valid.shape, vectors.shape[:2]))
        if not np.all(np.isfinite(vectors[valid])):
            raise error.ValidationError("Valid flow vectors must be finite")
        self._grid = PixelGrid(vectors.shape[1], vectors.shape[0])
        filled = np.where(valid[..., None], vectors, 0.)
        for array in (vectors, valid, filled):
            array.setflags(write=False)
        self._vectors = vectors
        self._valid = valid
        self._filled = filled

    @classmethod
    def constant(cls, grid, vector):
        """A field holding the same `vector` everywhere on `grid`."""
        vectors = np.empty(grid.shape + (2,))
        vectors[...] = np.asarray(vector, dtype=float)
        return cls(vectors)

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.shape + (2,)))

    vectors = property(lambda self: self._vectors,
                       doc="The ``(H, W, 2)`` offsets, as stored.")
    valid = property(lambda self: self._valid,
                     doc="The ``(H, W)`` validity mask.")
    filled = property(lambda self: self._filled,
                      doc="The offsets with invalid entries replaced by zero.")
    grid = property(lambda self: self._grid, doc="The source pixel grid.")
    width = property(lambda self: self._grid.width)
    height = property(lambda self: self._grid.height)
    shape = property(lambda self: self._grid.shape)

    def targets(self):
        """Return the ``(H, W, 2)`` target locations ``x + f(x)``."""
        return self._grid.coordinates() + self._filled

    def with_mask(self, valid):
        """Return a copy of the field restricted to ``self.valid & valid``."""
        return FlowField(self._vectors, self._valid & np.asarray(valid, bool))

    def __repr__(self):
        return 'FlowField({0}x{1}, {2} valid)'.format(
            self.width, self.height, int(self._valid.sum()))


class BilinearSample(object):
    """Result of :func:`sample_many`: interpolated values, validity, and the
    interpolation stencil needed to differentiate through the sampling.
    """
    def __init__(self, values, ok, x0, x1, y0, y1, wx, wy, du, dv):
        self.values = values
        self.ok = ok
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.wx, self.wy = wx, wy
        # spatial derivatives of the interpolated vector
        self.du, self.dv = du, dv

    def neighbours(self):
        """Yield ``(rows, cols, weights)`` for the four stencil corners."""
        yield self.y0, self.x0, (1. - self.wx) * (1. - self.wy)
        yield self.y0, self.x1, self.wx * (1. - self.wy)
        yield self.y1, self.x0, (1. - self.wx) * self.wy
        yield self.y1, self.x1, self.wx * self.wy


def sample_many(flow, points):
    """Bilinearly interpolate `flow` at an ``(N, 2)`` array of sub-pixel
    `points`.

    A point is invalid when it lies outside ``[0, W-1] x [0, H-1]`` or when
    one of its four neighbours is masked invalid; invalid values are zero.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    width, height = flow.width, flow.height
    u, v = points[:, 0], points[:, 1]
    with np.errstate(invalid='ignore'):
        inside = (u >= 0) & (u <= width - 1) & (v >= 0) & (v <= height - 1)
    u = np.where(inside, u, 0.)
    v = np.where(inside, v, 0.)
    x0 = np.minimum(np.floor(u).astype(int), max(width - 2, 0))
    y0 = np.minimum(np.floor(v).astype(int), max(height - 2, 0))
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    wx = (u - x0)[:, None]
    wy = (v - y0)[:, None]
    vectors, valid = flow.filled, flow.valid
    f00, f10 = vectors[y0, x0], vectors[y0, x1]
    f01, f11 = vectors[y1, x0], vectors[y1, x1]
    ok = inside & valid[y0, x0] & valid[y0, x1] & valid[y1, x0] & valid[y1, x1]
    values = ((1. - wx) * (1. - wy) * f00 + wx * (1. - wy) * f10 +
              (1. - wx) * wy * f01 + wx * wy * f11)
    du = (1. - wy) * (f10 - f00) + wy * (f11 - f01)
    dv = (1. - wx) * (f01 - f00) + wx * (f11 - f10)
    mask = ok[:, None]
    return BilinearSample(
        np.where(mask, values, 0.), ok, x0, x1, y0, y1,
        wx[:, 0], wy[:, 0], np.where(mask, du, 0.), np.where(mask, dv, 0.))


def apply(flow, x):
    """Return ``x + f(x)`` for the integer pixel `x`.

    :raise: :class:`epiflow.error.OutOfBounds`
    """
    u, v = int(x[0]), int(x[1])
    if (u, v) != tuple(x) or not flow.grid.contains((u, v)):
        raise error.OutOfBounds(
            "The pixel {0} is outside of the {1}x{2} grid".format(
                tuple(x), flow.width, flow.height))
    return np.array([u, v], dtype=float) + flow.vectors[v, u]


def sample(flow, p):
    """Return the flow vector bilinearly interpolated at the sub-pixel point
    `p`, or `None` when it can not be interpolated.
    """
    result = sample_many(flow, np.asarray(p, dtype=float)[None])
    if not result.ok[0]:
        return None
    return result.values[0]


def cycle_distance(fab, fba, x):
    """Return the round-trip error ``||f_AB(f_BA(x)) - x||`` of the pixel
    `x` of image A, or `None` when the forward point can not be sampled in
    image B.

    :raise: :class:`epiflow.error.OutOfBounds`
    """
    forward = apply(fba, x)
    back = sample(fab, forward)
    if back is None:
        return None
    return float(np.linalg.norm(forward + back - np.asarray(x, dtype=float)))


def compose(first, second):
    """Return the flow of ``second`` after ``first``, on the grid of
    ``first``: ``x -> x + f1(x) + f2(x + f1(x))``. A pixel is valid when both
    fields are valid along its path.
    """
    targets = first.targets().reshape(-1, 2)
    result = sample_many(second, targets)
    vectors = first.filled + result.values.reshape(first.shape + (2,))
    valid = first.valid & result.ok.reshape(first.shape)
    return FlowField(vectors, valid)


def cycle_distance_field(fab, fba):
    """Dense form of :func:`cycle_distance` over the grid of `fba`.

    :return: a ``(distances, ok)`` pair of ``(H, W)`` arrays
    """
    round_trip = compose(fba, fab)
    distances = np.linalg.norm(round_trip.filled, axis=-1)
    return np.where(round_trip.valid, distances, 0.), round_trip.valid


def forward_backward_mask(fba, fab, alpha=3., beta=0.05):
    """Return the pixels of A whose cycle distance is at most
    ``max(alpha, beta * ||f_BA(x)||)`` (non-occluded estimate).
    """
    distances, ok = cycle_distance_field(fab, fba)
    bound = np.maximum(alpha, beta * np.linalg.norm(fba.filled, axis=-1))
    return ok & (distances <= bound)


def warp_image(image, flow):
    """Backward-warp `image` (the target of `flow`) onto the source grid of
    `flow` with bilinear interpolation. Pixels whose target falls outside the
    image, or whose flow is invalid, are set to zero.

    `image` is a ``(H, W)`` or ``(H, W, C)`` array; the result has the
    flow's grid size and the image's dtype.
    """
    image = np.asarray(image)
    channels = image[..., None] if image.ndim == 2 else image
    height, width = channels.shape[:2]
    targets = flow.targets()
    u, v = targets[..., 0], targets[..., 1]
    inside = flow.valid & (u >= 0) & (u <= width - 1) & \
        (v >= 0) & (v <= height - 1)
    out = np.zeros(flow.shape + (channels.shape[2],), dtype=float)
    for channel in range(channels.shape[2]):
        out[..., channel] = ndimage.map_coordinates(
            channels[..., channel].astype(float), [v, u], order=1,
            mode='nearest')
    out[~inside] = 0.
    if np.issubdtype(image.dtype, np.integer):
        info = np.iinfo(image.dtype)
        out = np.clip(np.rint(out), info.min, info.max)
    out = out.astype(image.dtype)
    return out[..., 0] if image.ndim == 2 else out

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
