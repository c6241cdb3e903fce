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
"""Supervision losses for dense flow fields.

Three terms are available, each one returning a :class:`LossReport` and the
gradient of the report total with respect to the flow values:

    - :func:`loss_sed`, the symmetric epipolar distance of every flow
      target to the epipolar line of its source pixel,
    - :func:`loss_cycle`, the round-trip error of a pair of opposite
      fields, with pixels likely to be occluded filtered out,
    - :func:`loss_bit`, the L1 deviation of a pair of fields from the exact
      flows induced by a known synthetic transform.

Reports are combined with :func:`loss_total`.

    >>> from epiflow import geometry, supervision
    >>> from epiflow.flow_field import FlowField, PixelGrid
    >>> pose = geometry.RelativePose([[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    ...                              [1., 0., 0.])
    >>> k = geometry.CameraIntrinsics.identity()
    >>> f = geometry.fundamental_from_pose(k, k, pose)
    >>> flow = FlowField.constant(PixelGrid(8, 6), (5., 2.))
    >>> report, grad = supervision.loss_sed(flow, f, supervision.LossConfig())
    >>> round(report.total, 9)
    4.0
"""
import numpy as np
from loguru import logger

from epiflow import error, flow_field, geometry, tools

SED = 'sed'
CYCLE = 'cyc'
BIT = 'bit'
TERMS = (SED, CYCLE, BIT)

REDUCTIONS = ('mean', 'sum')


def _non_negative(value):
    value = float(value)
    if not value >= 0.:
        raise ValueError(value)
    return value


def _reduction(value):
    value = str(value).strip().lower()
    if value not in REDUCTIONS:
        raise ValueError(value)
    return value


class LossConfig(tools.Config):
    """Weights, cycle thresholds and reduction of the losses.

    =============  ======  ==================================================
    Option         Default Description
    =============  ======  ==================================================
    ``w_sed``      1.0     weight of the symmetric epipolar distance term
    ``w_cyc``      1.0     weight of the cycle term
    ``w_bit``      1.0     weight of the synthetic transform term
    ``alpha``      3.0     absolute cycle threshold, in pixels
    ``beta``       0.05    cycle threshold relative to the flow magnitude
    ``reduction``  mean    ``mean`` over contributing pixels, or ``sum``
    =============  ======  ==================================================
    """
    OPTIONS = {
        'w_sed': (_non_negative, 1.),
        'w_cyc': (_non_negative, 1.),
        'w_bit': (_non_negative, 1.),
        'alpha': (_non_negative, 3.),
        'beta': (_non_negative, .05),
        'reduction': (_reduction, 'mean'),
    }

    def weight(self, term):
        """Return the weight of the `term` loss (``sed``, ``cyc`` or
        ``bit``).
        """
        return self['w_{0}'.format(term)]


class LossReport(object):
    """Scalar decomposition of a loss.

    `per_term` maps term names to their unweighted values, `count` maps
    them to the number of contributing pixels; `total` is the weighted sum
    of `per_term`. `aepe` is an optional end-point error against ground
    truth, filled by the optimizer when it is given one.
    """
    def __init__(self, total, per_term, count, reduction='mean', aepe=None):
        self.total = float(total)
        self.per_term = dict(per_term)
        self.count = dict(count)
        self.reduction = reduction
        self.aepe = aepe

    @classmethod
    def single(cls, term, value, count, cfg):
        return cls(cfg.weight(term) * value, {term: value}, {term: count},
                   cfg.reduction)

    def get(self, term, default=0.):
        return self.per_term.get(term, default)

    def __repr__(self):
        terms = ', '.join('{0}={1:.6g}'.format(name, self.per_term[name])
                          for name in TERMS if name in self.per_term)
        return 'LossReport(total={0:.6g}, {1})'.format(self.total, terms)


class GradField(object):
    """Gradient of a loss with respect to the vectors of a flow field: a
    ``(H, W, 2)`` array, zero on pixels which did not contribute.
    """
    def __init__(self, values):
        values = np.array(values, dtype=float)
        values.setflags(write=False)
        self._values = values

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.shape + (2,)))

    values = property(lambda self: self._values)
    shape = property(lambda self: self._values.shape[:2])

    def norm(self):
        return float(np.linalg.norm(self._values))

    def __add__(self, other):
        return GradField(self._values + other.values)

    def __repr__(self):
        return 'GradField({0}x{1}, norm={2:.6g})'.format(
            self.shape[1], self.shape[0], self.norm())


def _reduce(terms, count, cfg):
    """Sum `terms` (pairwise) and return ``(value, scale)`` where `scale`
    is the factor applied to per-pixel derivatives.
    """
    value = float(np.sum(terms))
    if cfg.reduction == 'mean':
        return value / count, 1. / count
    return value, 1.


def _positions(field):
    return field.grid.coordinates()


def loss_sed(fba, f, cfg):
    """Symmetric epipolar distance of the flow `fba` (image A to image B)
    under the fundamental matrix `f`.

    Every valid pixel ``x`` whose epipolar lines are not degenerate
    contributes ``sed(f, x, x + fba(x))``.

    :return: a ``(LossReport, GradField)`` tuple
    :raise: :class:`epiflow.error.EmptySupport`
    """
    xs = _positions(fba)
    values, grad, ok = geometry.sed_many(f, xs, xs + fba.filled)
    mask = ok & fba.valid
    count = int(mask.sum())
    if not count:
        raise error.EmptySupport("No pixel contributes to the SED loss")
    value, scale = _reduce(values[mask], count, cfg)
    weight = cfg.weight(SED)
    grad = np.where(mask[..., None], grad, 0.) * (weight * scale)
    return LossReport.single(SED, value, count, cfg), GradField(grad)


def loss_cycle(fba, fab, cfg, adaptive=True):
    """Cycle consistency of the pair of opposite fields `fba` (on the grid
    of A) and `fab` (on the grid of B).

    The round trip of a pixel ``x`` is ``e = fba(x) + fab(x + fba(x))``,
    where `fab` is sampled bilinearly, and its cycle distance is ``|e|``.
    With `adaptive` set, a pixel only contributes when its distance is at
    most ``max(alpha, beta * |fba(x)|)``; the filter is held fixed while
    differentiating. Without it, every pixel with a defined round trip
    contributes.

    :return: a ``(LossReport, grad_fba, grad_fab)`` tuple
    :raise: :class:`epiflow.error.EmptySupport`
    """
    height, width = fba.shape
    xs = _positions(fba).reshape(-1, 2)
    forward = fba.filled.reshape(-1, 2)
    sampled = flow_field.sample_many(fab, xs + forward)
    residual = forward + sampled.values
    distance = np.linalg.norm(residual, axis=1)
    defined = fba.valid.reshape(-1) & sampled.ok & np.isfinite(distance)
    keep = defined
    if adaptive:
        bound = np.maximum(cfg.alpha,
                           cfg.beta * np.linalg.norm(forward, axis=1))
        keep = defined & (distance <= bound)
    count = int(keep.sum())
    logger.debug("cycle loss: {0} of {1} defined pixels kept",
                 count, int(defined.sum()))
    if not count:
        raise error.EmptySupport("Every pixel is filtered from the cycle loss")
    value, scale = _reduce(distance[keep], count, cfg)
    factor = cfg.weight(CYCLE) * scale

    # unit residual, zero at d == 0 and on filtered pixels
    unit = np.zeros_like(residual)
    moving = keep & (distance > 0.)
    unit[moving] = residual[moving] / distance[moving][:, None]
    unit *= factor

    # d e / d fba = I + [d fab/du, d fab/dv]
    grad_fba = unit + np.stack([np.sum(unit * sampled.du, axis=1),
                                np.sum(unit * sampled.dv, axis=1)], axis=1)
    grad_fab = np.zeros(fab.shape + (2,))
    for rows, cols, weights in sampled.neighbours():
        np.add.at(grad_fab, (rows[moving], cols[moving]),
                  weights[moving][:, None] * unit[moving])
    report = LossReport.single(CYCLE, value, count, cfg)
    return (report, GradField(grad_fba.reshape(height, width, 2)),
            GradField(grad_fab))


def bit_targets(t, grid_b, grid_bp=None):
    """Return the exact flows ``(T(x) - x on B, T^-1(x) - x on B')`` of the
    transform `t`, masked where the target leaves the other image or the
    inversion fails.
    """
    from epiflow import synth_transform
    grid_bp = grid_bp or grid_b
    forward = synth_transform.dense_flow_from_transform(
        t, grid_b, 'forward', target=grid_bp)
    backward = synth_transform.dense_flow_from_transform(
        t, grid_bp, 'inverse', target=grid_b)
    return forward, backward


def _l1(pred, target):
    mask = pred.valid & target.valid
    difference = pred.filled - target.filled
    values = np.abs(difference).sum(axis=-1)
    return values, np.sign(difference), mask


def loss_bit(fbpb, fbbp, t, cfg, forward=True, backward=True, targets=None):
    """L1 deviation of the flows `fbpb` (B to B', on the grid of B) and
    `fbbp` (B' to B, on the grid of B') from the flows of the transform `t`.

    Pixels whose transformed location leaves the other image are excluded.
    With `forward` (resp. `backward`) unset, the `fbpb` (resp. `fbbp`) term
    is skipped and its gradient is zero. `targets` may hold the result of
    :func:`bit_targets` to avoid recomputing it.

    :return: a ``(LossReport, grad_fbpb, grad_fbbp)`` tuple
    :raise: :class:`epiflow.error.EmptySupport`,
        :class:`epiflow.error.ValidationError`
    """
    if not (forward or backward):
        raise error.ValidationError(
            "The BiT loss needs at least one direction")
    if targets is None:
        targets = bit_targets(t, fbpb.grid, fbbp.grid)
    terms = []
    for enabled, pred, target in ((forward, fbpb, targets[0]),
                                  (backward, fbbp, targets[1])):
        if enabled:
            terms.append(_l1(pred, target))
        else:
            terms.append(None)
    count = sum(int(term[2].sum()) for term in terms if term is not None)
    if not count:
        raise error.EmptySupport("No pixel contributes to the BiT loss")
    values = np.concatenate([term[0][term[2]]
                             for term in terms if term is not None])
    value, scale = _reduce(values, count, cfg)
    factor = cfg.weight(BIT) * scale
    grads = []
    for term, pred in zip(terms, (fbpb, fbbp)):
        if term is None:
            grads.append(GradField.zeros(pred.grid))
        else:
            _, sign, mask = term
            grads.append(GradField(np.where(mask[..., None], sign, 0.) *
                                   factor))
    report = LossReport.single(BIT, value, count, cfg)
    return report, grads[0], grads[1]


def loss_total(reports, cfg):
    """Combine component `reports` into one report whose total is
    ``w_sed * L_sed + w_cyc * L_cyc + w_bit * L_bit``.

    Values of a term found in several reports (both directions of a pair,
    for instance) are added together.

    :raise: :class:`epiflow.error.ValidationError`
    """
    per_term, count = {}, {}
    reductions = set()
    for report in reports:
        reductions.add(report.reduction)
        for term, value in report.per_term.items():
            per_term[term] = per_term.get(term, 0.) + value
            count[term] = count.get(term, 0) + report.count.get(term, 0)
    if len(reductions) > 1:
        raise error.ValidationError(
            "Loss reports mix the {0} reductions".format(sorted(reductions)))
    total = sum(cfg.weight(term) * per_term[term]
                for term in TERMS if term in per_term)
    reduction = reductions.pop() if reductions else cfg.reduction
    return LossReport(total, per_term, count, reduction)

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
