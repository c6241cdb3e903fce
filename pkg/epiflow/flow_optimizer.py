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
"""Direct optimization of parametric flow fields for an image triplet.

The triplet is made of two real views A and B and of a view B' synthesized
from B by a known transform. Four flows are estimated jointly:

    =========  =================  ==============================
    Key        Direction          Grid
    =========  =================  ==============================
    ``ba``     A to B             grid of A
    ``ab``     B to A             grid of B
    ``bpb``    B to B'            grid of B
    ``bbp``    B' to B            grid of B' (the grid of B)
    =========  =================  ==============================

Each flow is a :class:`FlowModel`, a coarse lattice of vectors bilinearly
upsampled to the pixel grid, and the lattices are updated with momentum
gradient steps on the losses of :mod:`epiflow.supervision`.
"""
import csv
import math

import numpy as np
from loguru import logger
from scipy import sparse

from epiflow import error, flow_field, metrics, supervision, tools

CONSTANT = 'constant'
GRID = 'grid'

KEYS = ('ba', 'ab', 'bpb', 'bbp')
TRACE_COLUMNS = ('iter', 'total', 'sed', 'cyc', 'bit', 'aepe_vs_gt')


def lattice_shape(grid, spacing):
    """Return the ``(rows, cols)`` of a lattice with nodes every `spacing`
    pixels covering `grid`.
    """
    cols = int(math.ceil((grid.width - 1) / float(spacing))) + 1
    rows = int(math.ceil((grid.height - 1) / float(spacing))) + 1
    return rows, cols


def _axis_weights(count, nodes, spacing):
    position = np.arange(count) / float(spacing)
    low = np.minimum(np.floor(position).astype(int), max(nodes - 2, 0))
    high = np.minimum(low + 1, nodes - 1)
    weight = position - low
    return low, high, weight


class FlowModel(object):
    """A flow parameterized by a lattice of 2-vectors.

    A ``constant`` model holds a single vector; a ``grid`` model holds one
    vector every `spacing` pixels, the field being bilinear in between and
    exactly the node value at each node.
    """
    def __init__(self, kind, params, spacing=8):
        if kind not in (CONSTANT, GRID):
            raise error.ValidationError(
                "Unknown flow model kind '{0}'".format(kind))
        params = np.array(params, dtype=float)
        if kind == CONSTANT:
            params = params.reshape(1, 1, 2)
        elif params.ndim != 3 or params.shape[2] != 2:
            raise error.ValidationError(
                "Lattice parameters must have a (rows, cols, 2) shape")
        if int(spacing) < 1:
            raise error.ValidationError(
                "The lattice spacing must be at least one pixel")
        self.kind = kind
        self.params = params
        self.spacing = int(spacing)

    @classmethod
    def constant(cls, vector=(0., 0.)):
        return cls(CONSTANT, vector)

    @classmethod
    def grid(cls, grid, spacing=8, vector=(0., 0.)):
        """A lattice covering `grid`, every node set to `vector`."""
        params = np.empty(lattice_shape(grid, spacing) + (2,))
        params[...] = np.asarray(vector, dtype=float)
        return cls(GRID, params, spacing)

    @classmethod
    def from_field(cls, field, spacing=8, kind=GRID):
        """Initialize a model from the dense `field`: nodes read the field
        at their pixel (clamped to the image), a constant model takes the
        mean of its valid vectors.
        """
        if kind == CONSTANT:
            vectors = field.vectors[field.valid]
            return cls.constant(vectors.mean(axis=0) if len(vectors)
                                else (0., 0.))
        rows, cols = lattice_shape(field.grid, spacing)
        v = np.minimum(np.arange(rows) * spacing, field.height - 1)
        u = np.minimum(np.arange(cols) * spacing, field.width - 1)
        return cls(GRID, field.filled[np.ix_(v, u)], spacing)

    @property
    def size(self):
        """Number of parameters."""
        return self.params.size

    def copy(self, params=None):
        params = self.params if params is None else params
        return FlowModel(self.kind, np.array(params).reshape(
            self.params.shape), self.spacing)

    def interpolation(self, grid):
        """Return the sparse ``(pixels, nodes)`` upsampling matrix of the
        model on `grid`.

        :raise: :class:`epiflow.error.ValidationError`
        """
        if self.kind == CONSTANT:
            return sparse.csr_matrix(np.ones((grid.size, 1)))
        rows, cols = self.params.shape[:2]
        if (rows, cols) != lattice_shape(grid, self.spacing):
            raise error.ValidationError(
                "A {0}x{1} lattice does not cover a {2}x{3} grid".format(
                    cols, rows, grid.width, grid.height))
        u0, u1, wu = _axis_weights(grid.width, cols, self.spacing)
        v0, v1, wv = _axis_weights(grid.height, rows, self.spacing)
        pixel = np.arange(grid.size).reshape(grid.shape)
        entries, row_index, col_index = [], [], []
        for nv, weight_v in ((v0, 1. - wv), (v1, wv)):
            for nu, weight_u in ((u0, 1. - wu), (u1, wu)):
                entries.append(np.outer(weight_v, weight_u).ravel())
                row_index.append(pixel.ravel())
                col_index.append((nv[:, None] * cols + nu[None, :]).ravel())
        matrix = sparse.coo_matrix(
            (np.concatenate(entries),
             (np.concatenate(row_index), np.concatenate(col_index))),
            shape=(grid.size, rows * cols))
        return matrix.tocsr()

    def __repr__(self):
        if self.kind == CONSTANT:
            return 'FlowModel.constant({0})'.format(self.params[0, 0].tolist())
        return 'FlowModel(grid, {0}x{1}, spacing={2})'.format(
            self.params.shape[1], self.params.shape[0], self.spacing)


def evaluate_model(m, grid, interpolation=None):
    """Densify the model `m` on `grid` (every pixel valid)."""
    if interpolation is None:
        interpolation = m.interpolation(grid)
    vectors = interpolation.dot(m.params.reshape(-1, 2))
    return flow_field.FlowField(vectors.reshape(grid.shape + (2,)))


def _positive(value):
    value = float(value)
    if not value > 0.:
        raise ValueError(value)
    return value


class OptimizerConfig(tools.Config):
    """Settings of :func:`optimize_triplet`.

    The loss flags select the terms of the objective: ``sed`` (both
    directions of the A/B pair), ``cyc_full`` or ``cyc_adaptive`` (cycle
    loss of the A/B pair without or with the occlusion filter),
    ``bit_forward`` and ``bit_backward`` (the two halves of the synthetic
    transform loss on the B/B' pair).
    """
    OPTIONS = {
        'step': (_positive, .5),
        'momentum': (float, .9),
        'iterations': (int, 500),
        'tolerance': (float, 1e-9),
        'min_step': (_positive, 1e-9),
        'divergence': (_positive, 10.),
        'divergence_floor': (_positive, 1.),
        'sed': (tools.to_bool, True),
        'cyc_full': (tools.to_bool, False),
        'cyc_adaptive': (tools.to_bool, True),
        'bit_forward': (tools.to_bool, True),
        'bit_backward': (tools.to_bool, True),
        'kind': (str, GRID),
        'spacing': (int, 8),
    }

    def _check(self, key, value):
        if key == 'iterations' and value < 1:
            raise error.ValidationError(
                "The iteration budget must be at least 1")
        if key == 'momentum' and not 0. <= value < 1.:
            raise error.ValidationError(
                "The momentum must be in [0, 1) (got {0})".format(value))
        if key == 'kind' and value not in (CONSTANT, GRID):
            raise error.ValidationError(
                "Unknown flow model kind '{0}'".format(value))
        if key == 'spacing' and value < 1:
            raise error.ValidationError("The spacing must be positive")

    @property
    def use_cycle(self):
        return self.cyc_full or self.cyc_adaptive

    @property
    def use_bit(self):
        return self.bit_forward or self.bit_backward

    def enabled(self):
        """Return the names of the enabled loss flags."""
        return [name for name in ('sed', 'cyc_full', 'cyc_adaptive',
                                  'bit_forward', 'bit_backward')
                if self[name]]


class TripletObjective(object):
    """The weighted sum of the enabled losses, as a function of the
    concatenated lattice parameters of the optimized models.

    :raise: :class:`epiflow.error.NoLossEnabled`,
        :class:`epiflow.error.ValidationError`
    """
    def __init__(self, models, f, t, cfg, loss_cfg, grid_a, grid_b,
                 gt=None):
        if not cfg.enabled():
            raise error.NoLossEnabled("Every loss term is disabled")
        if cfg.cyc_full and cfg.cyc_adaptive:
            raise error.ValidationError(
                "The full and adaptive cycle losses are exclusive")
        if cfg.sed and f is None:
            raise error.ValidationError(
                "The SED loss needs a fundamental matrix")
        if cfg.use_bit and t is None:
            raise error.ValidationError("The BiT loss needs a transform")
        self.f, self.t = f, t
        self.cfg, self.loss_cfg = cfg, loss_cfg
        self.grids = {'ba': grid_a, 'ab': grid_b, 'bpb': grid_b,
                      'bbp': grid_b}
        self.gt = dict(gt or {})
        names = []
        if cfg.sed or cfg.use_cycle:
            names.extend(['ba', 'ab'])
        if cfg.use_bit:
            names.extend(['bpb', 'bbp'])
        missing = [name for name in names if name not in models]
        if missing:
            raise error.ValidationError(
                "Missing initial flow models: {0}".format(', '.join(missing)))
        self.names = names
        self.models = dict(models)
        self._interpolation = dict(
            (name, models[name].interpolation(self.grids[name]))
            for name in names)
        self._targets = None
        if cfg.use_bit:
            self._targets = supervision.bit_targets(t, grid_b, grid_b)
        # share of each node in the pixel support of its model
        self._preconditioner = {}
        for name in names:
            matrix = self._interpolation[name]
            mass = np.asarray(matrix.sum(axis=0)).ravel()
            share = np.maximum(mass / float(matrix.shape[0]), 1e-12)
            self._preconditioner[name] = np.repeat(share, 2)

    def pack(self, models=None):
        models = models or self.models
        return np.concatenate([models[name].params.ravel()
                               for name in self.names])

    def unpack(self, vector):
        models, offset = dict(self.models), 0
        for name in self.names:
            size = self.models[name].size
            models[name] = self.models[name].copy(
                vector[offset:offset + size])
            offset += size
        return models

    def preconditioner(self):
        return np.concatenate([self._preconditioner[name]
                               for name in self.names])

    def fields(self, models):
        return dict((name, evaluate_model(models[name], self.grids[name],
                                          self._interpolation[name]))
                    for name in self.names)

    def _terms(self, fields):
        """Yield ``(term, compute)`` for every enabled loss, `compute`
        returning ``(report, {name: GradField})``.
        """
        cfg, loss_cfg = self.cfg, self.loss_cfg
        if cfg.sed:
            for name, f in (('ba', self.f), ('ab', self.f.transpose())):
                yield supervision.SED, lambda name=name, f=f: self._single(
                    supervision.loss_sed(fields[name], f, loss_cfg), (name,))
        if cfg.use_cycle:
            for first, second in (('ba', 'ab'), ('ab', 'ba')):
                yield supervision.CYCLE, \
                    lambda first=first, second=second: self._single(
                        supervision.loss_cycle(fields[first], fields[second],
                                               loss_cfg, cfg.cyc_adaptive),
                        (first, second))
        if cfg.use_bit:
            yield supervision.BIT, lambda: self._single(
                supervision.loss_bit(
                    fields['bpb'], fields['bbp'], self.t, loss_cfg,
                    cfg.bit_forward, cfg.bit_backward, self._targets),
                ('bpb', 'bbp'))

    @staticmethod
    def _single(result, names):
        report, grads = result[0], result[1:]
        return report, dict(zip(names, grads))

    def evaluate(self, vector):
        """Return ``(report, gradient)`` at the parameters `vector`.

        A term without any contributing pixel enters the report as a zero
        value with a zero count.

        :raise: :class:`epiflow.error.EmptySupport` if no term has a
            contributing pixel
        """
        models = self.unpack(vector)
        fields = self.fields(models)
        reports = []
        grads = dict((name, np.zeros(self.grids[name].shape + (2,)))
                     for name in self.names)
        for term, compute in self._terms(fields):
            try:
                report, term_grads = compute()
            except error.EmptySupport as exc:
                logger.warning("the {0} loss has no contributing pixel: {1}",
                               term, exc)
                reports.append(supervision.LossReport.single(
                    term, 0., 0, self.loss_cfg))
                continue
            reports.append(report)
            for name, grad in term_grads.items():
                grads[name] += grad.values
        report = supervision.loss_total(reports, self.loss_cfg)
        if not any(report.count.values()):
            raise error.EmptySupport("No loss term has a contributing pixel")
        report.aepe = self._aepe(fields)
        gradient = np.concatenate([
            self._interpolation[name].T.dot(grads[name].reshape(-1, 2)).ravel()
            for name in self.names])
        return report, gradient

    def _aepe(self, fields):
        values = []
        for name in ('ba', 'ab'):
            if name in self.gt and name in fields:
                try:
                    values.append(metrics.aepe(fields[name], self.gt[name]))
                except error.EmptyMask:
                    pass
        return float(np.mean(values)) if values else None

    def __call__(self, vector):
        return self.evaluate(vector)[0].total


def _lost_support(before, after):
    """Return the terms with contributing pixels in `before` and none in
    `after`.
    """
    return [term for term in supervision.TERMS
            if before.count.get(term, 0) > 0 and not after.count.get(term, 0)]


def optimize_triplet(models, f, t, cfg, loss_cfg, grid_a, grid_b, gt=None):
    """Jointly optimize the flow `models` of a triplet.

    `models` maps the keys ``ba``, ``ab``, ``bpb`` and ``bbp`` to initial
    :class:`FlowModel` instances; only the models used by an enabled loss
    are required and updated. `gt` may map ``ba`` and ``ab`` to ground
    truth fields, the end-point error of the pair being then recorded in
    the trace.

    A step which increases the loss, or which leaves a term without any
    contributing pixel, is discarded, the step size is halved and the
    momentum cleared. The optimization stops at the iteration budget, when
    the norm of the loss gradient falls below the tolerance or when the
    step size falls below ``min_step``.

    :return: a ``(models, trace)`` tuple where `trace` holds one
        :class:`epiflow.supervision.LossReport` per iteration (the initial
        state first)
    :raise: :class:`epiflow.error.NoLossEnabled`,
        :class:`epiflow.error.DivergenceDetected`,
        :class:`epiflow.error.EmptySupport`
    """
    objective = TripletObjective(models, f, t, cfg, loss_cfg, grid_a,
                                 grid_b, gt)
    params = objective.pack()
    precondition = objective.preconditioner()
    report, gradient = objective.evaluate(params)
    initial = report.total
    ceiling = cfg.divergence * max(initial, cfg.divergence_floor)
    trace = [report]
    velocity = np.zeros_like(params)
    step = cfg.step
    logger.info("optimizing {0} ({1} parameters), initial loss {2:.6g}",
                ', '.join(cfg.enabled()), params.size, initial)
    for iteration in range(1, cfg.iterations + 1):
        if np.linalg.norm(gradient) < cfg.tolerance:
            logger.debug("gradient norm below tolerance at iteration {0}",
                         iteration)
            break
        velocity = cfg.momentum * velocity - step * gradient / precondition
        candidate = params + velocity
        new_report, new_gradient = objective.evaluate(candidate)
        if not np.isfinite(new_report.total) or new_report.total > ceiling:
            raise error.DivergenceDetected(
                "The loss reached {0} (initial {1})".format(
                    new_report.total, initial))
        lost = _lost_support(report, new_report)
        if new_report.total > report.total or lost:
            step /= 2.
            velocity[:] = 0.
            logger.debug("iteration {0}: loss {1:.6g} rejected{2}, "
                         "step halved to {3:.3g}", iteration,
                         new_report.total,
                         " ({0} lost its pixels)".format(', '.join(lost))
                         if lost else '', step)
        else:
            params, report, gradient = candidate, new_report, new_gradient
        trace.append(report)
        logger.debug("iteration {0}: loss {1:.6g}", iteration, report.total)
        if step < cfg.min_step:
            logger.debug("step below {0:g} at iteration {1}",
                         cfg.min_step, iteration)
            break
    logger.info("final loss {0:.6g} after {1} iterations",
                report.total, len(trace) - 1)
    return objective.unpack(params), trace


def write_trace_csv(trace, path):
    """Write the loss `trace` to the `path` CSV file."""
    with open(path, 'w', newline='') as file_:
        writer = csv.writer(file_, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)
        for index, report in enumerate(trace):
            row = [index, repr(report.total)]
            row.extend(repr(float(report.get(term)))
                       for term in supervision.TERMS)
            row.append('' if report.aepe is None else repr(report.aepe))
            writer.writerow(row)

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
