# -*- coding: UTF-8 -*-

try:
    import unittest2 as unittest
except:
    import unittest

import os
import shutil
import tempfile

import numpy as np

from args import ARGS

from epiflow import error, flow_optimizer, geometry, metrics
from epiflow.flow_field import FlowField, PixelGrid
from epiflow.flow_optimizer import FlowModel, OptimizerConfig, \
    TripletObjective
from epiflow.scene import PlanarScene
from epiflow.supervision import LossConfig
from epiflow.synth_transform import TransformSampler, TransformSpec

FLAGS_OFF = dict(sed=False, cyc_full=False, cyc_adaptive=False,
                 bit_forward=False, bit_backward=False)


def _shift(dx, dy, width, height):
    return TransformSpec.affine([[1., 0., dx], [0., 1., dy]], width, height)


class TestFlowOptimizer(unittest.TestCase):

    def setUp(self):
        self.grid = PixelGrid(16, 12)
        self.world = PlanarScene.fronto_parallel(16, 12)

    def test_lattice_shape(self):
        self.assertEqual(flow_optimizer.lattice_shape(self.grid, 5), (4, 4))
        self.assertEqual(flow_optimizer.lattice_shape(self.grid, 1), (12, 16))
        self.assertEqual(flow_optimizer.lattice_shape(self.grid, 100), (2, 2))

    def test_model_interpolation(self):
        rng = np.random.default_rng(0)
        model = FlowModel(flow_optimizer.GRID, rng.normal(size=(4, 4, 2)), 5)
        self.assertEqual(model.size, 32)
        field = flow_optimizer.evaluate_model(model, self.grid)
        for row in range(3):
            for col in range(4):
                np.testing.assert_allclose(field.vectors[5 * row, 5 * col],
                                           model.params[row, col])
        np.testing.assert_allclose(
            field.vectors[0, 2],
            .6 * model.params[0, 0] + .4 * model.params[0, 1])
        matrix = model.interpolation(self.grid)
        np.testing.assert_allclose(np.asarray(matrix.sum(axis=1)).ravel(), 1.)
        self.assertRaises(error.ValidationError, model.interpolation,
                          PixelGrid(32, 12))

    def test_model_constant_and_from_field(self):
        field = flow_optimizer.evaluate_model(FlowModel.constant((1., -2.)),
                                              self.grid)
        np.testing.assert_array_equal(field.vectors, np.broadcast_to(
            (1., -2.), (12, 16, 2)))
        rng = np.random.default_rng(1)
        dense = FlowField(rng.normal(size=(12, 16, 2)))
        model = FlowModel.from_field(dense, spacing=1)
        np.testing.assert_array_equal(
            flow_optimizer.evaluate_model(model, self.grid).vectors,
            dense.vectors)
        mean = FlowModel.from_field(dense, kind=flow_optimizer.CONSTANT)
        np.testing.assert_allclose(mean.params[0, 0],
                                   dense.vectors.reshape(-1, 2).mean(axis=0))
        copy = model.copy(np.zeros(model.size))
        self.assertEqual(copy.params.shape, model.params.shape)
        self.assertFalse(copy.params.any())
        self.assertRaises(error.ValidationError, FlowModel, 'spline', [0, 0])
        self.assertRaises(error.ValidationError, FlowModel,
                          flow_optimizer.GRID, np.zeros((2, 2)))

    def test_config(self):
        cfg = OptimizerConfig(iterations='20', sed='false')
        self.assertEqual(cfg.iterations, 20)
        self.assertFalse(cfg.sed)
        self.assertEqual(cfg.enabled(),
                         ['cyc_adaptive', 'bit_forward', 'bit_backward'])
        for key, value in (('momentum', 1.), ('iterations', 0),
                           ('kind', 'spline'), ('step', 0.)):
            self.assertRaises(error.ValidationError, OptimizerConfig,
                              {key: value})

    def _models(self, vector=(0., 0.)):
        return dict((key, FlowModel.constant(vector))
                    for key in flow_optimizer.KEYS)

    def test_objective_validation(self):
        f = self.world.fundamental()
        t = _shift(1., 0., 16, 12)
        args = (f, t)
        tail = (LossConfig(), self.grid, self.grid)
        self.assertRaises(error.NoLossEnabled, TripletObjective,
                          self._models(), *(args + (OptimizerConfig(FLAGS_OFF),)
                                            + tail))
        self.assertRaises(error.ValidationError, TripletObjective,
                          self._models(),
                          *(args + (OptimizerConfig(cyc_full=True),) + tail))
        self.assertRaises(error.ValidationError, TripletObjective,
                          self._models(),
                          *((None, t, OptimizerConfig()) + tail))
        models = self._models()
        del models['bbp']
        self.assertRaises(error.ValidationError, TripletObjective, models,
                          *(args + (OptimizerConfig(),) + tail))
        self.assertRaises(error.NoLossEnabled,
                          flow_optimizer.optimize_triplet, self._models(),
                          *(args + (OptimizerConfig(FLAGS_OFF),) + tail))

    def test_objective_gradient(self):
        rng = np.random.default_rng(ARGS.seeds)
        spacing = 5
        shape = flow_optimizer.lattice_shape(self.grid, spacing) + (2,)
        ba = np.empty(shape)
        ba[..., 0] = rng.uniform(-1., 1., shape[:2])
        ba[..., 1] = rng.uniform(1., 3., shape[:2])
        lattice = []
        for _ in range(2):
            params = np.empty(shape)
            params[..., 0] = rng.uniform(2., 4., shape[:2])
            params[..., 1] = rng.uniform(1., 3., shape[:2])
            lattice.append(params)
        models = {
            'ba': FlowModel(flow_optimizer.GRID, ba, spacing),
            'ab': FlowModel.constant((.37, .21)),
            'bpb': FlowModel(flow_optimizer.GRID, lattice[0], spacing),
            'bbp': FlowModel(flow_optimizer.GRID, lattice[1], spacing),
        }
        objective = TripletObjective(
            models, self.world.fundamental(), _shift(1.5, .5, 16, 12),
            OptimizerConfig(spacing=spacing), LossConfig(alpha=100.),
            self.grid, self.grid)
        vector = objective.pack()
        self.assertEqual(vector.size, 32 + 2 + 32 + 32)
        report, gradient = objective.evaluate(vector)
        self.assertEqual(sorted(report.per_term), ['bit', 'cyc', 'sed'])
        self.assertEqual(objective(vector), report.total)
        h = 1e-6
        scale = np.abs(gradient).max()
        for index in range(vector.size):
            plus, minus = vector.copy(), vector.copy()
            plus[index] += h
            minus[index] -= h
            numeric = (objective(plus) - objective(minus)) / (2 * h)
            self.assertLess(abs(numeric - gradient[index]),
                            1e-4 * scale + 1e-8,
                            "parameter {0}".format(index))

    def test_bit_only_recovers_translation(self):
        cfg = OptimizerConfig(FLAGS_OFF, bit_forward=True, bit_backward=True,
                              iterations=2000, kind=flow_optimizer.CONSTANT)
        models, trace = flow_optimizer.optimize_triplet(
            self._models(), None, _shift(5., 0., 16, 12), cfg, LossConfig(),
            self.grid, self.grid)
        np.testing.assert_allclose(models['bpb'].params[0, 0], (5., 0.),
                                   atol=1e-3)
        np.testing.assert_allclose(models['bbp'].params[0, 0], (-5., 0.),
                                   atol=1e-3)
        # untouched models are returned as given
        self.assertEqual(models['ba'].params.tolist(), [[[0., 0.]]])
        totals = [report.total for report in trace]
        self.assertEqual(totals, sorted(totals, reverse=True))
        self.assertLess(totals[-1], 1e-3)

    def test_sed_only_slides_along_the_line(self):
        k = geometry.CameraIntrinsics.identity()
        f = geometry.fundamental_from_pose(
            k, k, geometry.RelativePose(np.eye(3), [1., 0., 0.]))
        grid = PixelGrid(8, 6)
        cfg = OptimizerConfig(FLAGS_OFF, sed=True, iterations=1000)
        models, _ = flow_optimizer.optimize_triplet(
            self._models((2., 5.)), f, None, cfg, LossConfig(), grid, grid)
        for key in ('ba', 'ab'):
            u, v = models[key].params[0, 0]
            self.assertLess(abs(v), 1e-3)
            self.assertLess(abs(u - 2.), .5)

    def _pair_aepe(self, models, world, gt):
        grid = world.grid_a
        values = [metrics.aepe(flow_optimizer.evaluate_model(models[key],
                                                             grid), gt[key])
                  for key in ('ba', 'ab')]
        return float(np.mean(values))

    def _offset_init(self, offsets):
        return {
            'ba': FlowModel.constant(np.array((6., 0.)) + offsets[0]),
            'ab': FlowModel.constant(np.array((-6., 0.)) + offsets[1]),
            'bpb': FlowModel.constant(),
            'bbp': FlowModel.constant(),
        }

    def test_loss_sets_ordering(self):
        # SED leaves the horizontal error of the pair untouched, the cycle
        # splits it between both directions
        world = PlanarScene.fronto_parallel(48, 32)
        grid = world.grid_a
        gt = {'ba': world.flow_ba(), 'ab': world.flow_ab()}
        f = world.fundamental()
        t = _shift(1.5, .5, 48, 32)
        runs = (('sed', dict(FLAGS_OFF, sed=True)),
                ('sed_ac', dict(FLAGS_OFF, sed=True, cyc_adaptive=True)),
                ('tri', dict(sed=True, cyc_adaptive=True, bit_forward=True,
                             bit_backward=True)),
                ('bit', dict(FLAGS_OFF, bit_forward=True,
                             bit_backward=True)))
        rng = np.random.default_rng(ARGS.seeds)
        for _ in range(ARGS.seeds):
            init = self._offset_init(rng.uniform(.5, 1., (2, 2)))
            results, traces = {}, {}
            for name, flags in runs:
                cfg = OptimizerConfig(flags, iterations=300,
                                      kind=flow_optimizer.CONSTANT)
                models, traces[name] = flow_optimizer.optimize_triplet(
                    init, f, t, cfg, LossConfig(), grid, grid, gt)
                results[name] = self._pair_aepe(models, world, gt)
            self.assertIsNotNone(traces['tri'][-1].aepe)
            self.assertIsNone(traces['bit'][-1].aepe)
            self.assertLess(results['tri'], .75 * results['sed'])
            self.assertLessEqual(results['tri'], 1.05 * results['sed'])
            self.assertLessEqual(results['sed_ac'], 1.05 * results['bit'])
            self.assertLessEqual(results['sed'], 1.05 * results['bit'])
            # the BiT flows never reach the A/B pair
            self.assertAlmostEqual(results['bit'], self._pair_aepe(
                init, world, gt), places=12)

    def test_loss_sets_ordering_on_a_lattice(self):
        k = geometry.CameraIntrinsics(60., 60., 23.5, 15.5)
        pose = geometry.RelativePose(
            geometry.rotation_about_axis((0., 1., 0.), .02), [1., .2, .1])
        world = PlanarScene(48, 32, k, k, pose, normal=(0., .1, 1.))
        grid = world.grid_a
        gt = {'ba': world.flow_ba(), 'ab': world.flow_ab()}
        sampler = TransformSampler(ARGS.seeds, 48, 32)
        sampler.sample()
        t = sampler.sample()
        self.assertEqual(t.kind, 'tps')
        rng = np.random.default_rng(ARGS.seeds)
        for _ in range(ARGS.seeds):
            init = dict((key, FlowModel.from_field(FlowField(
                gt[key].filled + rng.normal(0., .5, gt[key].vectors.shape),
                gt[key].valid))) for key in ('ba', 'ab'))
            init['bpb'] = FlowModel.grid(grid)
            init['bbp'] = FlowModel.grid(grid)
            results = []
            for flags in (dict(FLAGS_OFF, sed=True),
                          dict(sed=True, cyc_adaptive=True, bit_forward=True,
                               bit_backward=True)):
                cfg = OptimizerConfig(flags, iterations=300)
                models, _ = flow_optimizer.optimize_triplet(
                    init, world.fundamental(), t, cfg, LossConfig(), grid,
                    grid, gt)
                results.append(self._pair_aepe(models, world, gt))
            sed_only, combined = results
            self.assertLessEqual(combined, 1.05 * sed_only + 1e-6)

    def test_smoothed_loss_decreases(self):
        world = PlanarScene.fronto_parallel(48, 32)
        grid = world.grid_a
        rng = np.random.default_rng(ARGS.seeds)
        cfg = OptimizerConfig(iterations=300, kind=flow_optimizer.CONSTANT)
        _, trace = flow_optimizer.optimize_triplet(
            self._offset_init(rng.uniform(.5, 1., (2, 2))),
            world.fundamental(), _shift(1.5, .5, 48, 32), cfg, LossConfig(),
            grid, grid)
        self.assertGreater(len(trace), 10)
        totals = np.array([report.total for report in trace])
        smoothed = np.convolve(totals, np.ones(10) / 10., 'valid')
        self.assertTrue(np.all(np.diff(smoothed) <= 1e-12))
        self.assertLess(totals[-1], totals[0])

    def test_adaptive_cycle_near_occluders(self):
        world = PlanarScene.fronto_parallel(48, 32, occluder=(10, 8, 20, 20))
        grid = world.grid_a
        gt = {'ba': world.flow_ba(), 'ab': world.flow_ab()}
        keep = gt['ba'].valid & ~world.occlusion_mask()
        rng = np.random.default_rng(ARGS.seeds)
        for _ in range(ARGS.seeds):
            init = dict((key, FlowModel.from_field(FlowField(
                gt[key].filled + rng.normal(0., .3, gt[key].vectors.shape),
                gt[key].valid), spacing=1)) for key in ('ba', 'ab'))
            errors = []
            for flags in (dict(FLAGS_OFF, sed=True, cyc_full=True),
                          dict(FLAGS_OFF, sed=True, cyc_adaptive=True)):
                cfg = OptimizerConfig(flags, iterations=50, spacing=1)
                models, _ = flow_optimizer.optimize_triplet(
                    init, world.fundamental(), None, cfg, LossConfig(), grid,
                    grid)
                pred = flow_optimizer.evaluate_model(models['ba'], grid)
                errors.append(metrics.aepe(pred, gt['ba'], keep))
            full, adaptive = errors
            self.assertLessEqual(adaptive, 1.05 * full + 1e-6)

    def test_filtered_cycle_stays_in_the_report(self):
        cfg = OptimizerConfig(FLAGS_OFF, sed=True, cyc_adaptive=True,
                              kind=flow_optimizer.CONSTANT)
        models = self._models((6., 0.))
        objective = TripletObjective(models, self.world.fundamental(), None,
                                     cfg, LossConfig(), self.grid, self.grid)
        report, gradient = objective.evaluate(objective.pack())
        self.assertEqual(report.per_term['cyc'], 0.)
        self.assertEqual(report.count['cyc'], 0)
        self.assertGreater(report.count['sed'], 0)
        self.assertEqual(report.total, report.per_term['sed'])
        self.assertTrue(np.all(np.isfinite(gradient)))
        # no term left at all
        objective = TripletObjective(models, None, None,
                                     OptimizerConfig(FLAGS_OFF,
                                                     cyc_adaptive=True),
                                     LossConfig(), self.grid, self.grid)
        self.assertRaises(error.EmptySupport, objective.evaluate,
                          objective.pack())

    def test_step_emptying_a_term_is_rejected(self):
        # the step zeroes the SED and pushes every cycle distance past alpha
        models = self._models()
        models['ba'] = FlowModel.constant((0., 4.))
        models['ab'] = FlowModel.constant((-2.9, -4.))
        cfg = OptimizerConfig(FLAGS_OFF, sed=True, cyc_adaptive=True, step=2.,
                              momentum=0., iterations=1,
                              kind=flow_optimizer.CONSTANT)
        result, trace = flow_optimizer.optimize_triplet(
            models, self.world.fundamental(), None, cfg, LossConfig(),
            self.grid, self.grid)
        self.assertEqual(len(trace), 2)
        self.assertAlmostEqual(trace[0].per_term['cyc'], 5.8)
        self.assertEqual(trace[1].total, trace[0].total)
        self.assertGreater(trace[1].count['cyc'], 0)
        self.assertEqual(result['ab'].params.tolist(), [[[-2.9, -4.]]])

    def test_stops_on_the_gradient_norm(self):
        rng = np.random.default_rng(ARGS.seeds)
        models = self._models()
        for key in ('ba', 'ab'):
            params = np.empty(flow_optimizer.lattice_shape(self.grid, 5) +
                              (2,))
            params[..., 0] = rng.uniform(5., 7., params.shape[:2])
            params[..., 1] = rng.uniform(1., 2., params.shape[:2])
            models[key] = FlowModel(flow_optimizer.GRID, params, 5)
        cfg = OptimizerConfig(FLAGS_OFF, sed=True, spacing=5)
        objective = TripletObjective(models, self.world.fundamental(), None,
                                     cfg, LossConfig(), self.grid, self.grid)
        _, gradient = objective.evaluate(objective.pack())
        norm = np.linalg.norm(gradient)
        # preconditioned, the direction is far longer than the gradient
        self.assertGreater(np.linalg.norm(gradient /
                                          objective.preconditioner()),
                           2. * norm)
        cfg['tolerance'] = 1.5 * norm
        result, trace = flow_optimizer.optimize_triplet(
            models, self.world.fundamental(), None, cfg, LossConfig(),
            self.grid, self.grid)
        self.assertEqual(len(trace), 1)
        np.testing.assert_array_equal(result['ba'].params,
                                      models['ba'].params)

    def test_divergence(self):
        cfg = OptimizerConfig(FLAGS_OFF, bit_forward=True, step=1e6,
                              momentum=0., divergence=1.0001,
                              kind=flow_optimizer.CONSTANT)
        self.assertRaises(error.DivergenceDetected,
                          flow_optimizer.optimize_triplet, self._models(),
                          None, _shift(5., 0., 16, 12), cfg, LossConfig(),
                          self.grid, self.grid)

    def test_trace_csv(self):
        cfg = OptimizerConfig(FLAGS_OFF, bit_forward=True, iterations=5,
                              kind=flow_optimizer.CONSTANT)
        _, trace = flow_optimizer.optimize_triplet(
            self._models(), None, _shift(2., 0., 16, 12), cfg, LossConfig(),
            self.grid, self.grid)
        self.assertEqual(len(trace), 6)
        directory = tempfile.mkdtemp()
        try:
            path = os.path.join(directory, 'trace.csv')
            flow_optimizer.write_trace_csv(trace, path)
            with open(path) as file_:
                lines = file_.read().splitlines()
        finally:
            shutil.rmtree(directory)
        self.assertEqual(lines[0], 'iter,total,sed,cyc,bit,aepe_vs_gt')
        self.assertEqual(len(lines), 7)
        self.assertTrue(lines[1].startswith('0,2.0,0.0,0.0,2.0,'))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
