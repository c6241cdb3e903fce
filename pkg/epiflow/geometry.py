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
"""Cameras, relative poses, fundamental matrices and epipolar distances.

Pixels are ``(u, v)`` pairs with ``u`` the column and ``v`` the row, the
origin being the center of the top-left pixel. Homogeneous pixels are
``(u, v, 1)``. A fundamental matrix ``F`` relates a pixel ``x`` of image A
to a pixel ``x'`` of image B by ``x'^T F x = 0``; its transpose relates B to
A.

    >>> import numpy as np
    >>> from epiflow import geometry
    >>> pose = geometry.RelativePose(np.eye(3), [1., 0., 0.])
    >>> k = geometry.CameraIntrinsics.identity()
    >>> f = geometry.fundamental_from_pose(k, k, pose)
    >>> round(geometry.sed(f, (2., 3.), (5., 4.5)), 9)
    3.0
"""
import numpy as np

from epiflow import error

DEGENERATE_NORM = 1e-12
ORTHONORMAL_TOL = 1e-9


def skew(vector):
    """Return the cross-product matrix ``[t]x`` of a 3-vector, such that
    ``skew(t) @ x == np.cross(t, x)``.
    """
    x, y, z = np.asarray(vector, dtype=float).reshape(3)
    return np.array([[0., -z, y],
                     [z, 0., -x],
                     [-y, x, 0.]])


def rotation_about_axis(axis, angle):
    """Return the rotation matrix of `angle` radians about `axis`
    (Rodrigues' formula).
    """
    axis = np.asarray(axis, dtype=float).reshape(3)
    axis = axis / np.linalg.norm(axis)
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1. - np.cos(angle)) * k.dot(k)


def homogeneous(points):
    """Append a column of ones to a ``(N, 2)`` array (or a single point)."""
    points = np.asarray(points, dtype=float)
    ones = np.ones(points.shape[:-1] + (1,))
    return np.concatenate([points, ones], axis=-1)


class CameraIntrinsics(object):
    """Pinhole intrinsics in pixels.

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, fx, fy, cx, cy, skew=0.):
        self._fx, self._fy = float(fx), float(fy)
        self._cx, self._cy = float(cx), float(cy)
        self._skew = float(skew)
        if not (self._fx > 0 and self._fy > 0):
            raise error.ValidationError(
                "Focal lengths must be positive (got fx={0}, fy={1})".format(
                    fx, fy))
        values = (self._fx, self._fy, self._cx, self._cy, self._skew)
        if not np.all(np.isfinite(values)):
            raise error.ValidationError(
                "Intrinsics must be finite (got {0})".format(values))

    @classmethod
    def identity(cls):
        """Intrinsics whose matrix is the identity."""
        return cls(1., 1., 0., 0.)

    fx = property(lambda self: self._fx, doc="Focal length along ``u``.")
    fy = property(lambda self: self._fy, doc="Focal length along ``v``.")
    cx = property(lambda self: self._cx, doc="Principal point ``u``.")
    cy = property(lambda self: self._cy, doc="Principal point ``v``.")
    skew = property(lambda self: self._skew, doc="Skew coefficient.")

    @property
    def matrix(self):
        """The upper-triangular 3x3 calibration matrix ``K``."""
        return np.array([[self._fx, self._skew, self._cx],
                         [0., self._fy, self._cy],
                         [0., 0., 1.]])

    @property
    def inverse(self):
        """``K^-1``."""
        return np.linalg.inv(self.matrix)

    def as_tuple(self):
        return (self._fx, self._fy, self._cx, self._cy, self._skew)

    def __eq__(self, other):
        return isinstance(other, CameraIntrinsics) and \
            self.as_tuple() == other.as_tuple()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'CameraIntrinsics({0}, {1}, {2}, {3}, skew={4})'.format(
            *self.as_tuple())


class RelativePose(object):
    """Rigid motion from camera A to camera B: ``X_B = R X_A + t``.
    The translation scale is arbitrary.

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, rotation, translation):
        rotation = np.array(rotation, dtype=float).reshape(3, 3)
        translation = np.array(translation, dtype=float).reshape(3)
        if np.abs(rotation.T.dot(rotation) - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise error.ValidationError("The rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.) > ORTHONORMAL_TOL:
            raise error.ValidationError(
                "The rotation is not proper (det={0})".format(
                    np.linalg.det(rotation)))
        if not np.all(np.isfinite(translation)):
            raise error.ValidationError("The translation must be finite")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        self._rotation = rotation
        self._translation = translation

    rotation = property(lambda self: self._rotation,
                        doc="3x3 rotation, camera A to camera B.")
    translation = property(lambda self: self._translation,
                           doc="Translation in the camera B frame.")

    def __repr__(self):
        return 'RelativePose({0}, {1})'.format(
            self._rotation.tolist(), self._translation.tolist())


class FundamentalMatrix(object):
    """A fundamental matrix from image A to image B, stored with a unit
    Frobenius norm (the sign is kept).

    >>> f = FundamentalMatrix([[0, 0, 0], [0, 0, -1], [0, 1, 0]])
    >>> f.transpose().m.dot([2., 3., 1.])   # line in A of the B pixel (2, 3)
    array([ 0.        ,  0.70710678, -2.12132034])

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, m):
        m = np.array(m, dtype=float).reshape(3, 3)
        norm = np.linalg.norm(m)
        if not np.isfinite(norm) or norm == 0.:
            raise error.ValidationError(
                "A fundamental matrix must be finite and non-zero")
        m = m / norm
        m.setflags(write=False)
        self._m = m

    m = property(lambda self: self._m, doc="The normalized 3x3 matrix.")

    def transpose(self):
        """The fundamental matrix from image B to image A."""
        return FundamentalMatrix(self._m.T)

    T = property(transpose)

    def singular_values(self):
        return np.linalg.svd(self._m, compute_uv=False)

    def __repr__(self):
        return 'FundamentalMatrix({0})'.format(self._m.tolist())


class EpipolarLine(object):
    """The line ``a*u + b*v + c = 0`` in pixels."""
    def __init__(self, a, b, c):
        self.a, self.b, self.c = float(a), float(b), float(c)

    @property
    def normal_norm(self):
        return float(np.hypot(self.a, self.b))

    @property
    def is_degenerate(self):
        """`True` when the line has no direction (point at the epipole)."""
        return self.normal_norm < DEGENERATE_NORM

    def coefficients(self):
        return np.array([self.a, self.b, self.c])

    def __repr__(self):
        return 'EpipolarLine({0}, {1}, {2})'.format(self.a, self.b, self.c)


def fundamental_from_pose(ka, kb, pose):
    """Return ``F = Kb^-T [t]x R Ka^-1``, normalized.

    :raise: :class:`epiflow.error.ZeroTranslation`
    """
    t = pose.translation
    if np.linalg.norm(t) < DEGENERATE_NORM:
        raise error.ZeroTranslation(
            "The fundamental matrix is undefined for a pure rotation")
    essential = skew(t).dot(pose.rotation)
    return FundamentalMatrix(kb.inverse.T.dot(essential).dot(ka.inverse))


def epipoles(f):
    """Return the epipoles ``(e_a, e_b)`` as homogeneous 3-vectors
    (``F e_a = 0`` and ``F^T e_b = 0``).
    """
    u, _, vt = np.linalg.svd(f.m)
    return vt[-1], u[:, -1]


def epipolar_line(f, x):
    """Return the epipolar line ``F x`` in image B of the pixel `x` of
    image A. Pass ``f.transpose()`` for the reverse direction.
    """
    a, b, c = f.m.dot(homogeneous(x))
    return EpipolarLine(a, b, c)


def epipolar_distance(f, x, xp):
    """Return the distance in pixels from `xp` (image B) to the epipolar line
    of `x` (image A).

    :raise: :class:`epiflow.error.DegenerateLine`
    """
    line = epipolar_line(f, x)
    norm = line.normal_norm
    if norm < DEGENERATE_NORM:
        raise error.DegenerateLine(
            "The pixel {0} is at the epipole".format(tuple(x)))
    u, v = np.asarray(xp, dtype=float)
    return abs(line.a * u + line.b * v + line.c) / norm


def sed_many(f, xs, xps):
    """Vectorized symmetric epipolar distance.

    `xs` and `xps` are arrays of shape ``(..., 2)``. Return a tuple
    ``(values, gradients, ok)`` where `gradients` holds the derivative of
    each distance with respect to the B-side point and `ok` flags the
    non-degenerate entries (values and gradients are zero elsewhere).
    The derivative of ``|r|`` at ``r == 0`` is taken as zero.
    """
    m = f.m
    xh = homogeneous(xs)
    xph = homogeneous(xps)
    # line of x in B and of x' in A
    l1 = xh.dot(m.T)
    l2 = xph.dot(m)
    r = np.sum(xph * l1, axis=-1)
    n1 = np.hypot(l1[..., 0], l1[..., 1])
    n2 = np.hypot(l2[..., 0], l2[..., 1])
    ok = (n1 >= DEGENERATE_NORM) & (n2 >= DEGENERATE_NORM)
    n1 = np.where(ok, n1, 1.)
    n2 = np.where(ok, n2, 1.)
    abs_r = np.abs(r)
    sign = np.sign(r)
    values = np.where(ok, abs_r / n1 + abs_r / n2, 0.)

    grad = (sign / n1)[..., None] * l1[..., :2]
    grad = grad + (sign / n2)[..., None] * l1[..., :2]
    # d(a2, b2)/d(u', v') is the upper-left block of F
    dn2 = (l2[..., 0:1] * m[:2, 0] + l2[..., 1:2] * m[:2, 1]) / n2[..., None]
    grad = grad - (abs_r / n2 ** 2)[..., None] * dn2
    grad = np.where(ok[..., None], grad, 0.)
    return values, grad, ok


def _single(f, x, xp):
    values, grad, ok = sed_many(
        f, np.asarray(x, dtype=float)[None], np.asarray(xp, dtype=float)[None])
    if not ok[0]:
        raise error.DegenerateLine(
            "The pair {0}, {1} lies at an epipole".format(tuple(x), tuple(xp)))
    return float(values[0]), grad[0]


def sed(f, x, xp):
    """Return the symmetric epipolar distance
    ``ED(x, x', F) + ED(x', x, F^T)`` in pixels.

    :raise: :class:`epiflow.error.DegenerateLine`
    """
    return _single(f, x, xp)[0]


def sed_gradient(f, x, xp):
    """Return the derivative of :func:`sed` with respect to `xp`.

    :raise: :class:`epiflow.error.DegenerateLine`
    """
    return _single(f, x, xp)[1]

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
