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
"""Synthetic two-view scenes with exact ground truth.

A :class:`PlanarScene` observes a plane (and optionally a smaller occluding
plane in front of it) from two cameras. Its flows are induced by plane
homographies, so they are consistent with the epipolar geometry of the two
cameras by construction.

    >>> from epiflow.scene import PlanarScene
    >>> scene = PlanarScene.fronto_parallel(48, 32, focal=60., depth=10.)
    >>> import numpy as np
    >>> flow = scene.flow_ba()
    >>> np.allclose(flow.vectors[flow.valid], (6., 0.))
    True
"""
import numpy as np

from epiflow import error, flow_field, geometry

# rounding slack on the image border
EDGE = 1e-9


def _apply_homography(h, points):
    mapped = geometry.homogeneous(points).dot(np.asarray(h).T)
    with np.errstate(divide='ignore', invalid='ignore'):
        return mapped[..., :2] / mapped[..., 2:3]


class PlanarScene(object):
    """Two cameras looking at the plane ``n^T X = depth`` (camera A
    coordinates).

    `occluder` is an optional ``(u0, v0, u1, v1)`` rectangle of image A
    which sees, instead of the plane, a fronto-parallel plane at
    `occluder_depth`.

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, width, height, ka, kb, pose, normal=(0., 0., 1.),
                 depth=10., occluder=None, occluder_depth=None):
        self.grid_a = flow_field.PixelGrid(width, height)
        self.grid_b = flow_field.PixelGrid(width, height)
        self.ka, self.kb, self.pose = ka, kb, pose
        self.normal = np.asarray(normal, dtype=float).reshape(3)
        self.depth = float(depth)
        if self.depth <= 0:
            raise error.ValidationError("The plane depth must be positive")
        self.occluder = None
        if occluder is not None:
            if occluder_depth is None or not 0 < occluder_depth < depth:
                raise error.ValidationError(
                    "The occluder must lie between the camera and the plane")
            self.occluder = tuple(float(value) for value in occluder)
            self.occluder_depth = float(occluder_depth)

    @classmethod
    def fronto_parallel(cls, width=48, height=32, focal=60., baseline=1.,
                        depth=10., occluder=None, occluder_depth=4.):
        """A sideways stereo rig (``t = (baseline, 0, 0)``) facing a
        fronto-parallel plane. Plane pixels move by ``focal * baseline /
        depth`` along ``u``.
        """
        k = geometry.CameraIntrinsics(focal, focal, (width - 1) / 2.,
                                      (height - 1) / 2.)
        pose = geometry.RelativePose(np.eye(3), [baseline, 0., 0.])
        return cls(width, height, k, k, pose, depth=depth, occluder=occluder,
                   occluder_depth=occluder_depth)

    width = property(lambda self: self.grid_a.width)
    height = property(lambda self: self.grid_a.height)

    def homography(self, depth=None, normal=None):
        """Return ``Kb (R + t n^T / d) Ka^-1``, the map from image A to
        image B induced by the plane ``n^T X = d``.
        """
        depth = self.depth if depth is None else float(depth)
        normal = self.normal if normal is None else np.asarray(normal, float)
        induced = self.pose.rotation + \
            np.outer(self.pose.translation, normal) / depth
        return self.kb.matrix.dot(induced).dot(self.ka.inverse)

    def _occluder_homography(self):
        return self.homography(self.occluder_depth, (0., 0., 1.))

    def fundamental(self):
        """The fundamental matrix from image A to image B."""
        return geometry.fundamental_from_pose(self.ka, self.kb, self.pose)

    def _in_occluder(self, points):
        if self.occluder is None:
            return np.zeros(points.shape[:-1], dtype=bool)
        u0, v0, u1, v1 = self.occluder
        u, v = points[..., 0], points[..., 1]
        with np.errstate(invalid='ignore'):
            return (u >= u0) & (u <= u1) & (v >= v0) & (v <= v1)

    def _inside(self, points, grid):
        """Return the mask of `points` inside `grid`, snapping those within
        :data:`EDGE` of the border onto it.
        """
        u, v = points[..., 0], points[..., 1]
        with np.errstate(invalid='ignore'):
            inside = np.isfinite(u) & np.isfinite(v) & (u >= -EDGE) & \
                (u <= grid.width - 1 + EDGE) & (v >= -EDGE) & \
                (v <= grid.height - 1 + EDGE)
        points[inside] = np.clip(points[inside], 0.,
                                 [grid.width - 1, grid.height - 1])
        return inside

    def flow_ba(self):
        """Ground-truth flow from image A to image B, on the grid of A.
        Pixels whose target leaves image B are invalid.
        """
        xs = self.grid_a.coordinates()
        targets = _apply_homography(self.homography(), xs)
        occluded = self._in_occluder(xs)
        if occluded.any():
            targets[occluded] = _apply_homography(
                self._occluder_homography(), xs[occluded])
        valid = self._inside(targets, self.grid_b)
        return flow_field.FlowField(np.where(valid[..., None],
                                             targets - xs, 0.), valid)

    def _sources_b(self):
        """Return, for every pixel of B, its preimage in A and whether the
        occluder is the visible surface there.
        """
        ys = self.grid_b.coordinates()
        sources = _apply_homography(np.linalg.inv(self.homography()), ys)
        on_occluder = np.zeros(self.grid_b.shape, dtype=bool)
        if self.occluder is not None:
            candidates = _apply_homography(
                np.linalg.inv(self._occluder_homography()), ys)
            on_occluder = self._in_occluder(candidates)
            sources[on_occluder] = candidates[on_occluder]
        return ys, sources, on_occluder

    def flow_ab(self):
        """Ground-truth flow from image B to image A, on the grid of B.
        Pixels whose source leaves image A are invalid.
        """
        ys, sources, _ = self._sources_b()
        valid = self._inside(sources, self.grid_a)
        return flow_field.FlowField(np.where(valid[..., None],
                                             sources - ys, 0.), valid)

    def occlusion_mask(self):
        """Pixels of A on the plane which the occluder hides in image B."""
        xs = self.grid_a.coordinates()
        if self.occluder is None:
            return np.zeros(self.grid_a.shape, dtype=bool)
        targets = _apply_homography(self.homography(), xs)
        behind = self._in_occluder(_apply_homography(
            np.linalg.inv(self._occluder_homography()), targets))
        return behind & ~self._in_occluder(xs)

    def project(self, points3d):
        """Project ``(N, 3)`` points given in camera A coordinates.

        :return: a ``(pixels_a, pixels_b)`` tuple of ``(N, 2)`` arrays
        """
        points3d = np.asarray(points3d, dtype=float).reshape(-1, 3)
        in_b = points3d.dot(self.pose.rotation.T) + self.pose.translation
        pa = points3d.dot(self.ka.matrix.T)
        pb = in_b.dot(self.kb.matrix.T)
        return pa[:, :2] / pa[:, 2:], pb[:, :2] / pb[:, 2:]

    def random_points(self, rng, n, near=4., far=12.):
        """Draw `n` points seen by camera A at depths in ``[near, far]``."""
        pixels = rng.uniform([0., 0.], [self.width - 1, self.height - 1],
                             (n, 2))
        depths = rng.uniform(near, far, n)
        rays = geometry.homogeneous(pixels).dot(self.ka.inverse.T)
        return rays * depths[:, None]


def random_pose(rng, max_angle=0.3, min_baseline=0.5):
    """Draw a relative pose with a rotation of at most `max_angle` radians
    and a translation of length between `min_baseline` and 1.
    """
    axis = rng.normal(size=3)
    rotation = geometry.rotation_about_axis(
        axis, rng.uniform(-max_angle, max_angle))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return geometry.RelativePose(
        rotation, direction * rng.uniform(min_baseline, 1.))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
