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
"""Random affine and thin-plate spline transforms.

A :class:`TransformSpec` maps pixels of an image B to pixels of a synthetic
image B'. Its exact dense flows, in both directions, supervise a flow
estimator through :func:`epiflow.supervision.loss_bit`.

    >>> import numpy as np
    >>> from epiflow import synth_transform
    >>> t = synth_transform.TransformSpec.affine([[1, 0, 5], [0, 1, 0]], 32, 24)
    >>> synth_transform.forward(t, (2., 3.))
    array([7., 3.])
    >>> synth_transform.inverse(t, (7., 3.))
    array([2., 3.])
"""
import math

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from epiflow import error, flow_field, tools

AFFINE = 'affine'
TPS = 'tps'
KINDS = (AFFINE, TPS)

MIN_DETERMINANT = 1e-6
MAX_ATTEMPTS = 100
CHECK_SIZE = 9


def _kernel(r2):
    """``U = r^2 log(r^2)``, with ``U(0) = 0``."""
    out = np.zeros_like(r2)
    positive = r2 > 0.
    out[positive] = r2[positive] * np.log(r2[positive])
    return out


class TransformSpec(object):
    """An immutable affine or thin-plate spline transform on a
    ``width`` x ``height`` domain. Use the :meth:`affine` and :meth:`tps`
    constructors.

    The spline is solved in coordinates divided by the largest side of the
    domain, the same factor on both axes: the kernel only gains a
    quadratic term which the affine part absorbs, so the interpolant is
    the thin-plate spline of the pixel coordinates.
    """
    def __init__(self, kind, width, height, matrix=None, control_points=None,
                 displacements=None):
        if kind not in KINDS:
            raise error.ValidationError(
                "Unknown transform kind '{0}'".format(kind))
        self.kind = kind
        self.width, self.height = int(width), int(height)
        if self.width < 1 or self.height < 1:
            raise error.ValidationError(
                "The transform domain must be positive (got {0}x{1})".format(
                    width, height))
        self._scale = np.full(2, max(self.width - 1, self.height - 1, 1),
                              dtype=float)
        if kind == AFFINE:
            matrix = np.array(matrix, dtype=float).reshape(2, 3)
            if abs(np.linalg.det(matrix[:, :2])) <= MIN_DETERMINANT:
                raise error.ValidationError(
                    "The affine transform is not invertible")
            matrix.setflags(write=False)
            self._matrix = matrix
            self._control_points = self._displacements = None
        else:
            control_points = np.array(control_points, dtype=float).reshape(-1, 2)
            displacements = np.array(displacements, dtype=float).reshape(-1, 2)
            if len(control_points) < 3 or \
                    len(control_points) != len(displacements):
                raise error.ValidationError(
                    "A spline needs at least 3 control points, each one "
                    "with a displacement")
            for array in (control_points, displacements):
                array.setflags(write=False)
            self._control_points = control_points
            self._displacements = displacements
            self._solve()

    @classmethod
    def affine(cls, matrix, width, height):
        """An affine transform ``y = M[:, :2] x + M[:, 2]``.

        :raise: :class:`epiflow.error.ValidationError`
        """
        return cls(AFFINE, width, height, matrix=matrix)

    @classmethod
    def identity(cls, width, height):
        return cls.affine([[1., 0., 0.], [0., 1., 0.]], width, height)

    @classmethod
    def tps(cls, control_points, displacements, width, height):
        """A thin-plate spline moving each control point by its
        displacement.

        :raise: :class:`epiflow.error.ValidationError`
        """
        return cls(TPS, width, height, control_points=control_points,
                   displacements=displacements)

    control_points = property(lambda self: self._control_points)
    displacements = property(lambda self: self._displacements)

    def _solve(self):
        nodes = self._control_points / self._scale
        targets = (self._control_points + self._displacements) / self._scale
        n = len(nodes)
        system = np.zeros((n + 3, n + 3))
        system[:n, :n] = _kernel(cdist(nodes, nodes, 'sqeuclidean'))
        system[:n, n] = system[n, :n] = 1.
        system[:n, n + 1:] = nodes
        system[n + 1:, :n] = nodes.T
        rhs = np.zeros((n + 3, 2))
        rhs[:n] = targets
        try:
            solution = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            raise error.ValidationError(
                "The spline control points are degenerate (collinear or "
                "repeated)")
        self._nodes = nodes
        self._weights = solution[:n]
        self._linear = solution[n:]

    @property
    def matrix(self):
        """The 2x3 matrix of an affine transform, or the affine part of a
        spline, in pixels.
        """
        if self.kind == AFFINE:
            return self._matrix
        scale = self._scale
        linear = (self._linear[1:].T * scale[:, None]) / scale[None, :]
        return np.hstack([linear, (self._linear[0] * scale)[:, None]])

    def to_record(self):
        """Return the transform as a single line of text."""
        if self.kind == AFFINE:
            values = self._matrix.reshape(-1)
            fields = [AFFINE, str(self.width), str(self.height)]
        else:
            values = np.hstack([self._control_points,
                                self._displacements]).reshape(-1)
            fields = [TPS, str(self.width), str(self.height),
                      str(len(self._control_points))]
        return ' '.join(fields + [repr(float(value)) for value in values])

    @classmethod
    def from_record(cls, line):
        """Parse a line written by :meth:`to_record`.

        :raise: :class:`epiflow.error.FormatError`
        """
        fields = line.split()
        try:
            kind, width, height = fields[0], int(fields[1]), int(fields[2])
            if kind == AFFINE:
                values = [float(value) for value in fields[3:]]
                if len(values) != 6:
                    raise ValueError(line)
                return cls.affine(values, width, height)
            if kind == TPS:
                count = int(fields[3])
                values = np.array([float(value) for value in fields[4:]])
                if len(values) != 4 * count:
                    raise ValueError(line)
                values = values.reshape(count, 4)
                return cls.tps(values[:, :2], values[:, 2:], width, height)
        except (IndexError, ValueError, error.ValidationError):
            raise error.FormatError(
                "Malformed transform record '{0}'".format(line.strip()))
        raise error.FormatError("Unknown transform kind '{0}'".format(kind))

    def __eq__(self, other):
        return isinstance(other, TransformSpec) and \
            self.to_record() == other.to_record()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'TransformSpec({0!r})'.format(self.to_record())


def forward_many(t, points):
    """Apply `t` to an ``(N, 2)`` array of points."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if t.kind == AFFINE:
        return points.dot(t.matrix[:, :2].T) + t.matrix[:, 2]
    normalized = points / t._scale
    radial = _kernel(cdist(normalized, t._nodes, 'sqeuclidean'))
    out = radial.dot(t._weights) + t._linear[0] + normalized.dot(t._linear[1:])
    return out * t._scale


def jacobian_many(t, points):
    """Return the ``(N, 2, 2)`` Jacobians of `t` at `points`."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if t.kind == AFFINE:
        return np.repeat(t.matrix[None, :, :2], len(points), axis=0)
    normalized = points / t._scale
    offsets = normalized[:, None, :] - t._nodes[None, :, :]
    r2 = np.sum(offsets ** 2, axis=-1)
    # dU/dx = 2 (1 + log r^2) (x - c), zero at the node itself
    factor = np.zeros_like(r2)
    positive = r2 > 0.
    factor[positive] = 2. * (1. + np.log(r2[positive]))
    # jac[n, i, j] = d out_i / d x_j, normalized coordinates
    jac = np.einsum('nk,ki,nkj->nij', factor, t._weights, offsets)
    jac = jac + t._linear[1:].T[None]
    return jac * t._scale[None, :, None] / t._scale[None, None, :]


def forward(t, x):
    """Return ``T(x)`` for one point `x`."""
    return forward_many(t, np.asarray(x, dtype=float)[None])[0]


def inverse_many(t, points, tol=1e-6, max_iter=50):
    """Invert `t` at an ``(N, 2)`` array of points.

    Splines are inverted by Newton iterations started from the inverse of
    their affine part. A point fails when the Jacobian stops being
    orientation preserving or when ``|T(x) - y|`` is still above `tol`
    after `max_iter` iterations.

    :return: a ``(points, ok)`` tuple, failed points being ``nan``
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    matrix = t.matrix
    linear_inv = np.linalg.inv(matrix[:, :2])
    estimate = (points - matrix[:, 2]).dot(linear_inv.T)
    if t.kind == AFFINE:
        return estimate, np.ones(len(points), dtype=bool)
    ok = np.zeros(len(points), dtype=bool)
    active = np.ones(len(points), dtype=bool)
    for _ in range(max_iter + 1):
        index = np.flatnonzero(active)
        if not len(index):
            break
        residual = forward_many(t, estimate[index]) - points[index]
        done = np.linalg.norm(residual, axis=1) <= tol
        ok[index[done]] = True
        active[index[done]] = False
        index, residual = index[~done], residual[~done]
        if not len(index):
            break
        jac = jacobian_many(t, estimate[index])
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        folded = ~(det > 0.)
        active[index[folded]] = False
        index, residual, jac, det = (index[~folded], residual[~folded],
                                     jac[~folded], det[~folded])
        step = np.stack([
            jac[:, 1, 1] * residual[:, 0] - jac[:, 0, 1] * residual[:, 1],
            jac[:, 0, 0] * residual[:, 1] - jac[:, 1, 0] * residual[:, 0],
        ], axis=1) / det[:, None]
        estimate[index] -= step
    failed = int((~ok).sum())
    if failed:
        logger.debug("spline inversion failed on {0} of {1} points",
                     failed, len(points))
    estimate[~ok] = np.nan
    return estimate, ok


def inverse(t, y, tol=1e-6, max_iter=50):
    """Return ``T^-1(y)`` for one point `y`.

    :raise: :class:`epiflow.error.NoConvergence`
    """
    points, ok = inverse_many(t, np.asarray(y, dtype=float)[None], tol,
                              max_iter)
    if not ok[0]:
        raise error.NoConvergence(
            "The inversion of {0} did not converge".format(tuple(y)))
    return points[0]


def dense_flow_from_transform(t, grid, direction='forward', target=None):
    """Return the flow ``T(x) - x`` (or ``T^-1(x) - x`` when `direction` is
    ``'inverse'``) on `grid`.

    A pixel is invalid when its target falls outside of the `target` grid
    (the transform domain by default) or when the inversion fails.
    """
    if direction not in ('forward', 'inverse'):
        raise error.ValidationError(
            "Unknown direction '{0}'".format(direction))
    target = target or flow_field.PixelGrid(t.width, t.height)
    xs = grid.coordinates().reshape(-1, 2)
    if direction == 'forward':
        ys, ok = forward_many(t, xs), np.ones(len(xs), dtype=bool)
    else:
        ys, ok = inverse_many(t, xs)
    with np.errstate(invalid='ignore'):
        inside = (ys[:, 0] >= 0) & (ys[:, 0] <= target.width - 1) & \
            (ys[:, 1] >= 0) & (ys[:, 1] <= target.height - 1)
    valid = ok & inside
    vectors = np.where(valid[:, None], ys - xs, 0.)
    return flow_field.FlowField(vectors.reshape(grid.shape + (2,)),
                                valid.reshape(grid.shape))


def warp_image_by_transform(image, t):
    """Synthesize ``I_B'`` from ``I_B`` by inverse mapping:
    ``I_B'(y) = I_B(T^-1(y))``. Pixels without a preimage in B are zero.
    """
    image = np.asarray(image)
    grid = flow_field.PixelGrid(image.shape[1], image.shape[0])
    flow = dense_flow_from_transform(t, grid, 'inverse', target=grid)
    return flow_field.warp_image(image, flow)


# ------------------ #
# -- Random draws -- #
# ------------------ #

class SamplerRanges(tools.Config):
    """Ranges of the random transforms.

    ===============  ===========  ==========================================
    Option           Default      Description
    ===============  ===========  ==========================================
    ``rotation``     25.0         maximum rotation, in degrees
    ``scale``        0.75,1.33    scale interval
    ``translation``  0.15         maximum shift, as a fraction of the size
    ``shear``        10.0         maximum shear angle, in degrees
    ``tps_jitter``   0.1          maximum control point displacement, as a
                                  fraction of the size
    ``tps_grid``     3            control points per side of the spline
    ===============  ===========  ==========================================
    """
    OPTIONS = {
        'rotation': (float, 25.),
        'scale': (tools.to_float_pair, (.75, 1.33)),
        'translation': (float, .15),
        'shear': (float, 10.),
        'tps_jitter': (float, .1),
        'tps_grid': (int, 3),
    }

    def _check(self, key, value):
        if key == 'scale':
            low, high = value
            if not 0. <= low <= high:
                raise error.ValidationError(
                    "Invalid scale interval {0}".format(value))
        elif key == 'tps_grid':
            if value < 2:
                raise error.ValidationError(
                    "A spline grid needs at least 2 points per side")
        elif value < 0:
            raise error.ValidationError(
                "The '{0}' range must be non-negative".format(key))


class TransformSampler(object):
    """Seeded generator of transforms on a ``width`` x ``height`` domain.

    Draws alternate between affine transforms and splines, starting with an
    affine one. Degenerate affine draws and folded splines are rejected and
    drawn again.

    >>> from epiflow.synth_transform import TransformSampler
    >>> sampler = TransformSampler(42, 64, 48)
    >>> sampler.sample().kind, sampler.sample().kind
    ('affine', 'tps')
    """
    def __init__(self, seed=0, width=64, height=48, ranges=None):
        self.seed = int(seed)
        self.width, self.height = int(width), int(height)
        self.ranges = ranges if isinstance(ranges, SamplerRanges) \
            else SamplerRanges(ranges)
        self._rng = np.random.default_rng(self.seed)
        self._draws = 0

    def _uniform(self, bound):
        return self._rng.uniform(-bound, bound)

    def _draw_affine(self):
        ranges = self.ranges
        angle = math.radians(self._uniform(ranges.rotation))
        shear = math.radians(self._uniform(ranges.shear))
        scale = self._rng.uniform(*ranges.scale)
        shift = np.array([self._uniform(ranges.translation) * self.width,
                          self._uniform(ranges.translation) * self.height])
        rotation = np.array([[math.cos(angle), -math.sin(angle)],
                             [math.sin(angle), math.cos(angle)]])
        linear = rotation.dot(np.array([[scale, math.tan(shear)],
                                        [0., scale]]))
        if abs(np.linalg.det(linear)) <= MIN_DETERMINANT:
            return None
        center = np.array([self.width - 1, self.height - 1]) / 2.
        offset = center + shift - linear.dot(center)
        return TransformSpec.affine(np.hstack([linear, offset[:, None]]),
                                    self.width, self.height)

    def _draw_tps(self):
        ranges = self.ranges
        side = np.linspace(0., 1., ranges.tps_grid)
        nodes = np.array([(u, v) for v in side for u in side])
        nodes = nodes * [self.width - 1, self.height - 1]
        jitter = ranges.tps_jitter * np.array([self.width, self.height])
        displacements = self._rng.uniform(-1., 1., nodes.shape) * jitter
        spec = TransformSpec.tps(nodes, displacements, self.width,
                                 self.height)
        checks = flow_field.PixelGrid(CHECK_SIZE, CHECK_SIZE).coordinates()
        checks = checks.reshape(-1, 2) / (CHECK_SIZE - 1) * \
            [self.width - 1, self.height - 1]
        jac = jacobian_many(spec, checks)
        if not np.all(np.linalg.det(jac) > 0.):
            return None
        return spec

    def sample(self):
        """Draw the next transform.

        :raise: :class:`epiflow.error.SamplingExhausted`
        """
        kind = KINDS[self._draws % 2]
        self._draws += 1
        draw = self._draw_affine if kind == AFFINE else self._draw_tps
        for attempt in range(MAX_ATTEMPTS):
            spec = draw()
            if spec is not None:
                return spec
            logger.debug("rejected degenerate {0} draw (attempt {1})",
                         kind, attempt + 1)
        raise error.SamplingExhausted(
            "No valid {0} transform after {1} draws".format(
                kind, MAX_ATTEMPTS))


def sample_transform(sampler):
    """Draw the next transform of `sampler`.

    :raise: :class:`epiflow.error.SamplingExhausted`
    """
    return sampler.sample()

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
