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
"""Flow-guided sparse matching.

Matching runs in two stages:

    1. every keypoint of A is sent to B by the flow, and matched to the
       keypoint of B with the most similar descriptor among those lying
       within `r` pixels of the predicted location. The same is done from
       B to A, and only mutual pairs are kept;
    2. keypoints left unmatched on both sides are matched by global
       descriptor similarity, keeping reciprocal pairs only.

Descriptors are compared with the dot product of unit vectors.

    >>> import numpy as np
    >>> from epiflow import matcher
    >>> from epiflow.flow_field import FlowField, PixelGrid
    >>> a = matcher.KeypointSet([[10., 10.]], [[1., 0.]])
    >>> b = matcher.KeypointSet([[20., 10.]], [[1., 0.]])
    >>> fba = FlowField.constant(PixelGrid(32, 32), (10., 0.))
    >>> fab = FlowField.constant(PixelGrid(32, 32), (-10., 0.))
    >>> list(matcher.match(a, b, fba, fab).pairs())
    [(0, 0, 1, 1.0)]
"""
import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from epiflow import error, flow_field

DESCRIPTOR_ONLY = 0
STAGE_LOCAL = 1
STAGE_GLOBAL = 2

NORM_TOL = 1e-6
UNMATCHED = -1


class KeypointSet(object):
    """Keypoint locations and their descriptors.

    Descriptors whose norm differs from one by ``1e-6`` or more are
    normalized. When `width` and `height` are given, points must lie in
    ``[0, width - 1] x [0, height - 1]``.

    :raise: :class:`epiflow.error.ValidationError`,
        :class:`epiflow.error.OutOfBounds`
    """
    def __init__(self, points, descriptors, width=None, height=None):
        points = np.array(points, dtype=float).reshape(-1, 2)
        descriptors = np.array(descriptors, dtype=float)
        if descriptors.ndim != 2 or len(descriptors) != len(points):
            raise error.ValidationError(
                "Expected one descriptor per keypoint ({0} points, "
                "descriptors of shape {1})".format(
                    len(points), descriptors.shape))
        norms = np.linalg.norm(descriptors, axis=1)
        if np.any(norms == 0.) or not np.all(np.isfinite(norms)):
            raise error.ValidationError(
                "Descriptors must be finite and non-zero")
        off = np.abs(norms - 1.) >= NORM_TOL
        descriptors[off] /= norms[off][:, None]
        if width is not None and height is not None and len(points):
            u, v = points[:, 0], points[:, 1]
            outside = (u < 0) | (u > width - 1) | (v < 0) | (v > height - 1)
            if outside.any():
                raise error.OutOfBounds(
                    "Keypoint {0} lies outside of the {1}x{2} image".format(
                        tuple(points[np.flatnonzero(outside)[0]]),
                        width, height))
        for array in (points, descriptors):
            array.setflags(write=False)
        self.points = points
        self.descriptors = descriptors
        self.width, self.height = width, height

    @property
    def dim(self):
        return self.descriptors.shape[1]

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return 'KeypointSet({0} points, dim={1})'.format(len(self), self.dim)


class DirectedMatches(object):
    """A one-way matching: `targets[i]` is the index matched to query `i`
    (``-1`` when unmatched) and `similarity[i]` its descriptor similarity.
    """
    def __init__(self, targets, similarity):
        self.targets = np.asarray(targets, dtype=int)
        self.similarity = np.asarray(similarity, dtype=float)

    @classmethod
    def from_dict(cls, mapping, size):
        targets = np.full(size, UNMATCHED, dtype=int)
        for query, target in mapping.items():
            targets[query] = target
        return cls(targets, np.where(targets >= 0, 1., np.nan))

    def as_dict(self):
        return dict((int(i), int(j)) for i, j in enumerate(self.targets)
                    if j >= 0)

    def __len__(self):
        return int((self.targets >= 0).sum())


class MatchSet(object):
    """A one-to-one set of correspondences, sorted by index in A.

    Each pair carries the stage which produced it (``1`` flow-guided,
    ``2`` global descriptor supplement, ``0`` descriptor-only baseline) and
    the descriptor similarity.

    :raise: :class:`epiflow.error.ValidationError`
    """
    def __init__(self, idx_a=(), idx_b=(), stage=(), similarity=()):
        idx_a = np.asarray(idx_a, dtype=int).reshape(-1)
        idx_b = np.asarray(idx_b, dtype=int).reshape(-1)
        stage = np.asarray(stage, dtype=int).reshape(-1)
        similarity = np.asarray(similarity, dtype=float).reshape(-1)
        if not len(idx_a) == len(idx_b) == len(stage) == len(similarity):
            raise error.ValidationError("Match columns differ in length")
        if len(np.unique(idx_a)) != len(idx_a) or \
                len(np.unique(idx_b)) != len(idx_b):
            raise error.ValidationError("Matches must be one-to-one")
        order = np.argsort(idx_a, kind='stable')
        self.idx_a, self.idx_b = idx_a[order], idx_b[order]
        self.stage, self.similarity = stage[order], similarity[order]

    def __len__(self):
        return len(self.idx_a)

    def pairs(self):
        """Yield ``(idx_a, idx_b, stage, similarity)`` tuples."""
        for i, j, stage, sim in zip(self.idx_a, self.idx_b, self.stage,
                                    self.similarity):
            yield int(i), int(j), int(stage), float(sim)

    def points(self, a, b):
        """Return the matched coordinates as a ``(pa, pb)`` tuple."""
        return a.points[self.idx_a], b.points[self.idx_b]

    def select(self, stage):
        keep = self.stage == stage
        return MatchSet(self.idx_a[keep], self.idx_b[keep], self.stage[keep],
                        self.similarity[keep])

    def union(self, other):
        return MatchSet(np.concatenate([self.idx_a, other.idx_a]),
                        np.concatenate([self.idx_b, other.idx_b]),
                        np.concatenate([self.stage, other.stage]),
                        np.concatenate([self.similarity, other.similarity]))

    def __eq__(self, other):
        return isinstance(other, MatchSet) and \
            list(self.pairs()) == list(other.pairs())

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'MatchSet({0} matches)'.format(len(self))


def _best(similarities, candidates):
    """Index of the most similar candidate, ties going to the lowest
    candidate index.
    """
    order = np.argsort(candidates, kind='stable')
    candidates, similarities = candidates[order], similarities[order]
    best = int(np.argmax(similarities))
    return int(candidates[best]), float(similarities[best])


def stage1_directed(a, b, fba, r=5., workers=1):
    """Match every keypoint of `a` to the most similar keypoint of `b`
    within `r` pixels (inclusive) of its flow prediction ``a + fba(a)``.

    Keypoints where the flow can not be sampled, or with no candidate in
    the disc, stay unmatched.
    """
    targets = np.full(len(a), UNMATCHED, dtype=int)
    similarity = np.full(len(a), np.nan)
    if not len(a) or not len(b):
        return DirectedMatches(targets, similarity)
    sampled = flow_field.sample_many(fba, a.points)
    predicted = a.points + sampled.values
    tree = cKDTree(b.points)
    queries = np.flatnonzero(sampled.ok)
    # slightly enlarged query, the exact test is done below
    neighbours = tree.query_ball_point(predicted[queries], r * (1. + 1e-9),
                                       workers=workers)
    for query, found in zip(queries, neighbours):
        if not found:
            continue
        found = np.asarray(found, dtype=int)
        distance = np.linalg.norm(b.points[found] - predicted[query], axis=1)
        found = found[distance <= r]
        if not len(found):
            continue
        sims = b.descriptors[found].dot(a.descriptors[query])
        targets[query], similarity[query] = _best(sims, found)
    return DirectedMatches(targets, similarity)


def mutual_filter(mba, mab, stage=STAGE_LOCAL):
    """Keep the pairs ``(i, j)`` with ``mba(i) == j`` and ``mab(j) == i``."""
    idx_a = np.flatnonzero(mba.targets >= 0)
    idx_b = mba.targets[idx_a]
    inside = idx_b < len(mab.targets)
    idx_a, idx_b = idx_a[inside], idx_b[inside]
    keep = mab.targets[idx_b] == idx_a
    idx_a, idx_b = idx_a[keep], idx_b[keep]
    return MatchSet(idx_a, idx_b, np.full(len(idx_a), stage),
                    mba.similarity[idx_a])


def _nearest(queries, candidates):
    """Return the global nearest descriptor (index, similarity) of every
    query row.
    """
    sims = queries.dot(candidates.T)
    best = np.argmax(sims, axis=1)
    return best, sims[np.arange(len(best)), best]


def stage2_supplement(a, b, stage1):
    """Supplement `stage1` with global descriptor matches of the keypoints
    it left unmatched.

    Leftover keypoints of each side are matched to their most similar
    keypoint among all keypoints of the other side; a pair is added when
    both endpoints are leftovers and each one is the other's choice.

    :return: the union of `stage1` and the new matches
    """
    left_a = np.setdiff1d(np.arange(len(a)), stage1.idx_a)
    left_b = np.setdiff1d(np.arange(len(b)), stage1.idx_b)
    if not len(left_a) or not len(left_b):
        return stage1
    nn_ab, sim_ab = _nearest(a.descriptors[left_a], b.descriptors)
    nn_ba, _ = _nearest(b.descriptors[left_b], a.descriptors)
    choice_b = dict(zip(left_b.tolist(), nn_ba.tolist()))
    idx_a, idx_b, sims = [], [], []
    for i, j, sim in zip(left_a.tolist(), nn_ab.tolist(), sim_ab.tolist()):
        if choice_b.get(j) == i:
            idx_a.append(i)
            idx_b.append(j)
            sims.append(sim)
    extra = MatchSet(idx_a, idx_b, np.full(len(idx_a), STAGE_GLOBAL), sims)
    return stage1.union(extra)


def match(a, b, fba, fab, r=5., stage2=True, workers=1):
    """Run the flow-guided matching between `a` and `b`.

    `fba` sends A to B (on the grid of A) and `fab` B to A. With `stage2`
    unset only the flow-guided matches are returned.
    """
    mba = stage1_directed(a, b, fba, r, workers)
    mab = stage1_directed(b, a, fab, r, workers)
    matches = mutual_filter(mba, mab)
    logger.debug("stage 1: {0} A->B, {1} B->A, {2} mutual",
                 len(mba), len(mab), len(matches))
    if stage2:
        matches = stage2_supplement(a, b, matches)
        logger.debug("stage 2: {0} matches added",
                     len(matches.select(STAGE_GLOBAL)))
    return matches


def mutual_nn_match(a, b):
    """Descriptor-only mutual nearest neighbour matching, the baseline
    without flow guidance.
    """
    if not len(a) or not len(b):
        return MatchSet()
    nn_ab, sim_ab = _nearest(a.descriptors, b.descriptors)
    nn_ba, _ = _nearest(b.descriptors, a.descriptors)
    idx_a = np.flatnonzero(nn_ba[nn_ab] == np.arange(len(a)))
    return MatchSet(idx_a, nn_ab[idx_a], np.full(len(idx_a), DESCRIPTOR_ONLY),
                    sim_ab[idx_a])

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
