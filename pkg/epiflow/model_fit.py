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
"""Whole-image models estimated from sparse correspondences: homographies
(RANSAC over a normalized DLT), fundamental matrices (normalized eight
point algorithm, optionally in RANSAC) and relative poses (essential matrix
decomposition).

Correspondences are passed as two ``(N, 2)`` arrays `pa` and `pb`.
"""
import math

import numpy as np
from loguru import logger

from epiflow import error, geometry, tools

DEGENERATE_SV = 1e-8
MIN_DETERMINANT = 1e-12


class Homography(object):
    """A plane projective map, stored with a bottom-right entry of one (or a
    unit Frobenius norm when that entry vanishes).

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, m):
        m = np.array(m, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise error.ValidationError("A homography must be finite")
        if abs(m[2, 2]) > MIN_DETERMINANT:
            m = m / m[2, 2]
        else:
            m = m / np.linalg.norm(m)
        if abs(np.linalg.det(m)) <= MIN_DETERMINANT:
            raise error.ValidationError("The homography is not invertible")
        m.setflags(write=False)
        self._m = m

    m = property(lambda self: self._m, doc="The normalized 3x3 matrix.")

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    def apply(self, points):
        """Map an ``(N, 2)`` array of points (``inf`` at infinity)."""
        mapped = geometry.homogeneous(points).dot(self._m.T)
        with np.errstate(divide='ignore', invalid='ignore'):
            out = mapped[..., :2] / mapped[..., 2:3]
        return np.where(np.isfinite(out), out, np.inf)

    def inverse(self):
        return Homography(np.linalg.inv(self._m))

    def __repr__(self):
        return 'Homography({0})'.format(self._m.tolist())


def _in_unit_interval(value):
    value = float(value)
    if not 0. < value < 1.:
        raise ValueError(value)
    return value


def _positive(value):
    value = float(value)
    if not value > 0.:
        raise ValueError(value)
    return value


class RansacConfig(tools.Config):
    """Settings of the RANSAC estimators.

    ==================  ========  ===========================================
    Option              Default   Description
    ==================  ========  ===========================================
    ``threshold``       3.0       inlier threshold in pixels (symmetric
                                  transfer error for homographies, symmetric
                                  epipolar distance for fundamental matrices)
    ``max_iterations``  2000      hypothesis budget
    ``confidence``      0.9999    confidence of the adaptive termination
    ``seed``            0         seed of the sample generator
    ==================  ========  ===========================================
    """
    OPTIONS = {
        'threshold': (_positive, 3.),
        'max_iterations': (int, 2000),
        'confidence': (_in_unit_interval, .9999),
        'seed': (int, 0),
    }

    def _check(self, key, value):
        if key == 'max_iterations' and value < 1:
            raise error.ValidationError(
                "RANSAC needs at least one iteration")


def _pairs(pa, pb, minimum):
    pa = np.asarray(pa, dtype=float).reshape(-1, 2)
    pb = np.asarray(pb, dtype=float).reshape(-1, 2)
    if len(pa) != len(pb):
        raise error.ValidationError(
            "Got {0} points in A and {1} in B".format(len(pa), len(pb)))
    if len(pa) < minimum:
        raise error.InsufficientMatches(
            "At least {0} matches are required (got {1})".format(
                minimum, len(pa)))
    return pa, pb


def _normalization(points):
    """Similarity moving the centroid to the origin with a mean distance of
    ``sqrt(2)``.
    """
    center = points.mean(axis=0)
    spread = np.linalg.norm(points - center, axis=1).mean()
    scale = math.sqrt(2.) / spread if spread > 0 else 1.
    return np.array([[scale, 0., -scale * center[0]],
                     [0., scale, -scale * center[1]],
                     [0., 0., 1.]])


def _transform(t, points):
    return geometry.homogeneous(points).dot(t.T)[:, :2]


def _dlt(pa, pb):
    """Normalized direct linear transform; `None` when degenerate."""
    ta, tb = _normalization(pa), _normalization(pb)
    xa, xb = _transform(ta, pa), _transform(tb, pb)
    x, y = xa[:, 0], xa[:, 1]
    u, v = xb[:, 0], xb[:, 1]
    zeros, ones = np.zeros(len(x)), np.ones(len(x))
    design = np.zeros((2 * len(x), 9))
    design[0::2] = np.stack([-x, -y, -ones, zeros, zeros, zeros,
                             u * x, u * y, u], axis=1)
    design[1::2] = np.stack([zeros, zeros, zeros, -x, -y, -ones,
                             v * x, v * y, v], axis=1)
    _, singular, vt = np.linalg.svd(design)
    if singular[7] < DEGENERATE_SV * singular[0]:
        return None
    m = np.linalg.inv(tb).dot(vt[-1].reshape(3, 3)).dot(ta)
    try:
        return Homography(m)
    except error.ValidationError:
        return None


def symmetric_transfer_error(h, pa, pb):
    """Return ``sqrt(|H a - b|^2 + |H^-1 b - a|^2)`` for every pair."""
    pa = np.asarray(pa, dtype=float).reshape(-1, 2)
    pb = np.asarray(pb, dtype=float).reshape(-1, 2)
    forward = np.sum((h.apply(pa) - pb) ** 2, axis=1)
    backward = np.sum((h.inverse().apply(pb) - pa) ** 2, axis=1)
    with np.errstate(invalid='ignore'):
        error_ = np.sqrt(forward + backward)
    return np.where(np.isnan(error_), np.inf, error_)


def _required_iterations(inliers, total, sample, cfg):
    ratio = inliers / float(total)
    if ratio >= 1.:
        return 0
    missing = 1. - ratio ** sample
    if missing >= 1.:
        return cfg.max_iterations
    return min(cfg.max_iterations,
               int(math.ceil(math.log(1. - cfg.confidence) /
                             math.log(missing))))


def _ransac(pa, pb, cfg, sample, fit, residuals, name):
    """Generic RANSAC loop: the winner is the first hypothesis with the
    most inliers.
    """
    rng = np.random.default_rng(cfg.seed)
    best, best_count = None, 0
    required, iteration = cfg.max_iterations, 0
    while iteration < required:
        iteration += 1
        chosen = rng.choice(len(pa), sample, replace=False)
        model = fit(pa[chosen], pb[chosen])
        if model is None:
            continue
        count = int((residuals(model, pa, pb) <= cfg.threshold).sum())
        if count > best_count:
            best, best_count = model, count
            required = _required_iterations(count, len(pa), sample, cfg)
    logger.debug("{0} RANSAC: {1} hypotheses, best has {2} of {3} inliers",
                 name, iteration, best_count, len(pa))
    if best is None or best_count < sample:
        raise error.NoModel(
            "No {0} with at least {1} inliers (best: {2})".format(
                name, sample, best_count))
    inliers = residuals(best, pa, pb) <= cfg.threshold
    refit = fit(pa[inliers], pb[inliers])
    if refit is not None:
        best = refit
    return best, residuals(best, pa, pb) <= cfg.threshold


def fit_homography_ransac(pa, pb, cfg=None):
    """Estimate the homography mapping `pa` to `pb`.

    Hypotheses are fitted on four matches, scored by the number of pairs
    whose symmetric transfer error is at most the threshold, and the best
    one is re-fitted on its inliers.

    :return: a ``(Homography, inlier_mask)`` tuple
    :raise: :class:`epiflow.error.InsufficientMatches`,
        :class:`epiflow.error.NoModel`
    """
    cfg = cfg or RansacConfig()
    pa, pb = _pairs(pa, pb, 4)
    return _ransac(pa, pb, cfg, 4, _dlt, symmetric_transfer_error,
                   'homography')


def _eight_point(pa, pb):
    ta, tb = _normalization(pa), _normalization(pb)
    xa, xb = _transform(ta, pa), _transform(tb, pb)
    u, v = xa[:, 0], xa[:, 1]
    up, vp = xb[:, 0], xb[:, 1]
    design = np.stack([up * u, up * v, up, vp * u, vp * v, vp,
                       u, v, np.ones(len(u))], axis=1)
    _, singular, vt = np.linalg.svd(design)
    if len(singular) < 8 or singular[7] < DEGENERATE_SV * singular[0]:
        raise error.DegenerateConfiguration(
            "The correspondences do not constrain a fundamental matrix")
    m = vt[-1].reshape(3, 3)
    u_, s_, vt_ = np.linalg.svd(m)
    s_[2] = 0.
    m = u_.dot(np.diag(s_)).dot(vt_)
    return geometry.FundamentalMatrix(tb.T.dot(m).dot(ta))


def fit_fundamental_8pt(pa, pb):
    """Normalized eight point estimate of the fundamental matrix ``F``
    with ``pb^T F pa = 0``, of rank two.

    :raise: :class:`epiflow.error.InsufficientMatches`,
        :class:`epiflow.error.DegenerateConfiguration`
    """
    pa, pb = _pairs(pa, pb, 8)
    return _eight_point(pa, pb)


def _sed_residuals(f, pa, pb):
    values, _, ok = geometry.sed_many(f, pa, pb)
    return np.where(ok, values, np.inf)


def fit_fundamental_ransac(pa, pb, cfg=None):
    """Estimate a fundamental matrix robustly: eight point hypotheses,
    inliers by symmetric epipolar distance.

    :return: a ``(FundamentalMatrix, inlier_mask)`` tuple
    :raise: :class:`epiflow.error.InsufficientMatches`,
        :class:`epiflow.error.NoModel`
    """
    cfg = cfg or RansacConfig()
    pa, pb = _pairs(pa, pb, 8)

    def fit(sa, sb):
        try:
            return _eight_point(sa, sb)
        except error.DegenerateConfiguration:
            return None
    return _ransac(pa, pb, cfg, 8, fit, _sed_residuals, 'fundamental')


def triangulate(pose, ka, kb, pa, pb):
    """Linear triangulation of the pairs, in camera A coordinates.
    Points at infinity come out as ``nan``.
    """
    pa, pb = _pairs(pa, pb, 1)
    na = geometry.homogeneous(pa).dot(ka.inverse.T)
    nb = geometry.homogeneous(pb).dot(kb.inverse.T)
    p1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    p2 = np.hstack([pose.rotation, pose.translation[:, None]])
    system = np.stack([
        na[:, 0:1] * p1[2] - p1[0],
        na[:, 1:2] * p1[2] - p1[1],
        nb[:, 0:1] * p2[2] - p2[0],
        nb[:, 1:2] * p2[2] - p2[1],
    ], axis=1)
    _, _, vt = np.linalg.svd(system)
    points = vt[:, -1]
    with np.errstate(divide='ignore', invalid='ignore'):
        out = points[:, :3] / points[:, 3:]
    return np.where(np.isfinite(out), out, np.nan)


def pose_candidates(f, ka, kb):
    """Return the four ``(R, t)`` decompositions of the essential matrix
    ``Kb^T F Ka``, with a unit ``t``.
    """
    essential = kb.matrix.T.dot(f.m).dot(ka.matrix)
    u, _, vt = np.linalg.svd(essential)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0., -1., 0.], [1., 0., 0.], [0., 0., 1.]])
    t = u[:, 2]
    first, second = u.dot(w).dot(vt), u.dot(w.T).dot(vt)
    return [(first, t), (first, -t), (second, t), (second, -t)]


def pose_from_essential(f, ka, kb, pa, pb):
    """Recover the relative pose from `f` and the calibrations. The
    decomposition which puts a strict majority of the triangulated pairs in
    front of both cameras wins.

    :raise: :class:`epiflow.error.InsufficientMatches`,
        :class:`epiflow.error.CheiralityAmbiguous`
    """
    pa, pb = _pairs(pa, pb, 1)
    best, best_count = None, -1
    for rotation, translation in pose_candidates(f, ka, kb):
        pose = geometry.RelativePose(rotation, translation)
        points = triangulate(pose, ka, kb, pa, pb)
        depth_b = points.dot(rotation.T)[:, 2] + translation[2]
        with np.errstate(invalid='ignore'):
            count = int(((points[:, 2] > 0) & (depth_b > 0)).sum())
        logger.debug("pose candidate: {0} of {1} points in front",
                     count, len(pa))
        if count > best_count:
            best, best_count = pose, count
    if 2 * best_count <= len(pa):
        raise error.CheiralityAmbiguous(
            "No pose puts a majority of the {0} points in front of both "
            "cameras (best: {1})".format(len(pa), best_count))
    return best

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
