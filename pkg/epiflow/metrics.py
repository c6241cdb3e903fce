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
"""Evaluation metrics for dense flows, sparse matches, homographies and
relative poses.

Dense metrics are computed over the pixels where the ground truth is valid,
optionally restricted by a `mask`.

    >>> from epiflow import metrics
    >>> from epiflow.flow_field import FlowField, PixelGrid
    >>> grid = PixelGrid(4, 3)
    >>> metrics.aepe(FlowField.constant(grid, (3., 4.)), FlowField.zeros(grid))
    5.0
"""
import csv

import numpy as np

from epiflow import error
from epiflow.flow_field import FlowField

F1_PIXELS = 3.
F1_RATIO = .05
ACCURACY_THRESHOLDS = (1., 3., 5.)
MMA_THRESHOLDS = tuple(float(value) for value in range(1, 11))
POSE_THRESHOLDS = (10.,)


class FlowErrorStats(object):
    """Dense flow errors: AEPE, F1 outlier rate, accuracies and the number
    of evaluated pixels.
    """
    def __init__(self, aepe, f1, acc_at, count):
        self.aepe, self.f1 = float(aepe), float(f1)
        self.acc_at = dict(acc_at)
        self.count = int(count)

    def as_row(self):
        row = {'aepe': self.aepe, 'f1': self.f1, 'count': self.count}
        for threshold in sorted(self.acc_at):
            row['acc@{0:g}'.format(threshold)] = self.acc_at[threshold]
        return row


class MatchEvalStats(object):
    """Sparse match accuracy per threshold, with match and feature counts."""
    def __init__(self, mma, num_matches, num_features=0):
        self.mma = dict(mma)
        self.num_matches = int(num_matches)
        self.num_features = int(num_features)

    def as_row(self):
        row = {'num_matches': self.num_matches,
               'num_features': self.num_features}
        for threshold in sorted(self.mma):
            row['mma@{0:g}'.format(threshold)] = self.mma[threshold]
        return row


def _endpoint_errors(pred, gt, mask=None):
    if pred.shape != gt.shape:
        raise error.ValidationError(
            "Flow shapes differ: {0} and {1}".format(pred.shape, gt.shape))
    keep = gt.valid.copy()
    if mask is not None:
        keep &= np.asarray(mask, dtype=bool)
    if not keep.any():
        raise error.EmptyMask("No pixel to evaluate")
    errors = np.linalg.norm(pred.filled - gt.filled, axis=-1)
    return errors[keep], np.linalg.norm(gt.filled, axis=-1)[keep]


def aepe(pred, gt, mask=None):
    """Average end-point error ``mean |pred - gt|``, in pixels.

    :raise: :class:`epiflow.error.EmptyMask`
    """
    errors, _ = _endpoint_errors(pred, gt, mask)
    return float(np.mean(errors))


def f1_outlier_rate(pred, gt, mask=None):
    """Fraction of pixels whose end-point error exceeds both 3 pixels and
    5% of the ground-truth magnitude.

    :raise: :class:`epiflow.error.EmptyMask`
    """
    errors, magnitudes = _endpoint_errors(pred, gt, mask)
    outliers = (errors > F1_PIXELS) & (errors > F1_RATIO * magnitudes)
    return float(np.mean(outliers))


def _fractions(errors, thresholds, inclusive):
    out = {}
    for threshold in thresholds:
        correct = errors <= threshold if inclusive else errors < threshold
        out[float(threshold)] = float(np.mean(correct))
    return out


def accuracy_at(pred, gt, thresholds=ACCURACY_THRESHOLDS, mask=None):
    """Fraction of correspondences whose end-point error is strictly below
    each threshold.

    `pred` and `gt` are either two flow fields (dense evaluation, where
    `mask` applies) or two ``(N, 2)`` arrays of predicted and true target
    locations.

    :return: a ``{threshold: fraction}`` dictionary
    :raise: :class:`epiflow.error.EmptySet`
    """
    if isinstance(pred, FlowField):
        try:
            errors, _ = _endpoint_errors(pred, gt, mask)
        except error.EmptyMask:
            raise error.EmptySet("No pixel to evaluate")
    else:
        pred = np.asarray(pred, dtype=float).reshape(-1, 2)
        gt = np.asarray(gt, dtype=float).reshape(-1, 2)
        if len(pred) != len(gt):
            raise error.ValidationError("Point sets differ in length")
        if not len(pred):
            raise error.EmptySet("No correspondence to evaluate")
        errors = np.linalg.norm(pred - gt, axis=1)
    return _fractions(errors, thresholds, inclusive=False)


def _homography_matrix(h):
    return np.asarray(getattr(h, 'm', h), dtype=float).reshape(3, 3)


def _apply(h, points):
    mapped = np.hstack([points, np.ones((len(points), 1))]).dot(
        _homography_matrix(h).T)
    with np.errstate(divide='ignore', invalid='ignore'):
        return mapped[:, :2] / mapped[:, 2:]


def reprojection_errors(pa, pb, gt_h):
    """Return ``|H a - b|`` for every matched pair."""
    pa = np.asarray(pa, dtype=float).reshape(-1, 2)
    pb = np.asarray(pb, dtype=float).reshape(-1, 2)
    errors = np.linalg.norm(_apply(gt_h, pa) - pb, axis=1)
    return np.where(np.isnan(errors), np.inf, errors)


def mma(pa, pb, gt_h, thresholds=MMA_THRESHOLDS, num_features=0):
    """Mean matching accuracy: for each threshold, the fraction of matches
    ``(a, b)`` with ``|H a - b| <= threshold`` under the ground-truth
    homography `gt_h`.

    :raise: :class:`epiflow.error.EmptyMatches`
    """
    errors = reprojection_errors(pa, pb, gt_h)
    if not len(errors):
        raise error.EmptyMatches("No match to evaluate")
    return MatchEvalStats(_fractions(errors, thresholds, inclusive=True),
                          len(errors), num_features)


def corner_correctness(est_h, gt_h, width, height, eps=5.):
    """Average distance between the image corners mapped by `est_h` and by
    `gt_h`, and whether it is below `eps`.

    :return: an ``(avg_error, correct)`` tuple
    """
    corners = np.array([[0., 0.], [width - 1., 0.], [0., height - 1.],
                        [width - 1., height - 1.]])
    distances = np.linalg.norm(_apply(est_h, corners) -
                               _apply(gt_h, corners), axis=1)
    average = float(np.mean(distances))
    if np.isnan(average):
        average = float('inf')
    return average, average < eps


def _angle(cosine):
    return float(np.degrees(np.arccos(np.clip(cosine, -1., 1.))))


def pose_angular_errors(est, gt, thresholds=POSE_THRESHOLDS):
    """Rotation and translation direction errors between two relative
    poses, in degrees. A pose is correct at a threshold when both errors are
    below it.

    :return: a ``(rot_err, trans_err, {threshold: correct})`` tuple
    :raise: :class:`epiflow.error.ZeroTranslation`
    """
    t_est = np.asarray(est.translation, dtype=float)
    t_gt = np.asarray(gt.translation, dtype=float)
    n_est, n_gt = np.linalg.norm(t_est), np.linalg.norm(t_gt)
    if n_est < 1e-12 or n_gt < 1e-12:
        raise error.ZeroTranslation(
            "The translation direction of a null translation is undefined")
    relative = est.rotation.T.dot(gt.rotation)
    rot_err = _angle((np.trace(relative) - 1.) / 2.)
    trans_err = _angle(t_est.dot(t_gt) / (n_est * n_gt))
    correct = dict((float(threshold),
                    rot_err < threshold and trans_err < threshold)
                   for threshold in thresholds)
    return rot_err, trans_err, correct


def flow_error_stats(pred, gt, mask=None, thresholds=ACCURACY_THRESHOLDS):
    """Compute every dense metric in one pass.

    :raise: :class:`epiflow.error.EmptyMask`
    """
    errors, magnitudes = _endpoint_errors(pred, gt, mask)
    outliers = (errors > F1_PIXELS) & (errors > F1_RATIO * magnitudes)
    return FlowErrorStats(np.mean(errors), np.mean(outliers),
                          _fractions(errors, thresholds, inclusive=False),
                          len(errors))


def _columns(rows):
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def _format(value):
    if isinstance(value, float):
        return '{0:.6f}'.format(value)
    return str(value)


def format_table(rows):
    """Format a list of dictionaries as aligned text columns."""
    columns = _columns(rows)
    cells = [columns] + [[_format(row.get(key, '')) for key in columns]
                         for row in rows]
    widths = [max(len(line[index]) for line in cells)
              for index in range(len(columns))]
    lines = ['  '.join(cell.rjust(width) for cell, width in zip(line, widths))
             for line in cells]
    return '\n'.join(lines) + '\n'


def write_csv(rows, path):
    """Write a list of dictionaries to the `path` CSV file."""
    columns = _columns(rows)
    with open(path, 'w', newline='') as file_:
        writer = csv.writer(file_, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[key]) if isinstance(row.get(key), float)
                             else row.get(key, '') for key in columns])

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
