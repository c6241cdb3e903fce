# -*- coding: UTF-8 -*-

try:
    import unittest2 as unittest
except:
    import unittest

import numpy as np

from args import ARGS

from epiflow import error, geometry, supervision, synth_transform
from epiflow.flow_field import FlowField, PixelGrid
from epiflow.scene import PlanarScene
from epiflow.supervision import LossConfig


def _fd_check(test, loss, field, analytic, pixels, h=1e-6, rtol=1e-4):
    """Compare `analytic` with central differences of ``loss(vectors)``
    at the `pixels` (row, col) of `field`.
    """
    base = np.array(field, dtype=float)
    scale = max(np.abs(analytic).max(), 1e-12)
    for row, col in pixels:
        for axis in range(2):
            plus, minus = base.copy(), base.copy()
            plus[row, col, axis] += h
            minus[row, col, axis] -= h
            numeric = (loss(plus) - loss(minus)) / (2 * h)
            test.assertLess(abs(numeric - analytic[row, col, axis]),
                            rtol * scale + 1e-9,
                            "pixel {0} axis {1}".format((row, col), axis))


class TestSupervision(unittest.TestCase):

    def setUp(self):
        self.grid = PixelGrid(8, 6)
        self.cfg = LossConfig()
        k = geometry.CameraIntrinsics.identity()
        self.f = geometry.fundamental_from_pose(
            k, k, geometry.RelativePose(np.eye(3), [1., 0., 0.]))

    def test_sed_constant(self):
        flow = FlowField.constant(self.grid, (5., 2.))
        report, grad = supervision.loss_sed(flow, self.f, self.cfg)
        self.assertAlmostEqual(report.total, 4.)
        self.assertEqual(report.count[supervision.SED], 48)
        # horizontal epipolar lines: only the vertical component matters
        np.testing.assert_array_equal(grad.values[..., 0], 0.)
        self.assertTrue(np.all(grad.values[..., 1] > 0))

    def test_sed_sum_reduction(self):
        flow = FlowField.constant(self.grid, (5., 2.))
        cfg = LossConfig(reduction='sum', w_sed=.5)
        report, _ = supervision.loss_sed(flow, self.f, cfg)
        self.assertAlmostEqual(report.per_term[supervision.SED], 4. * 48)
        self.assertAlmostEqual(report.total, 2. * 48)

    def test_sed_invalid_pixels(self):
        valid = np.zeros(self.grid.shape, dtype=bool)
        flow = FlowField(np.zeros(self.grid.shape + (2,)), valid)
        self.assertRaises(error.EmptySupport, supervision.loss_sed, flow,
                          self.f, self.cfg)

    def test_sed_zero_on_scene(self):
        world = PlanarScene.fronto_parallel(48, 32)
        f = world.fundamental()
        report, _ = supervision.loss_sed(world.flow_ba(), f, self.cfg)
        self.assertLess(report.total, 1e-6)
        report, _ = supervision.loss_sed(world.flow_ab(), f.transpose(),
                                         self.cfg)
        self.assertLess(report.total, 1e-6)

    def test_sed_gradient(self):
        rng = np.random.default_rng(0)
        k = geometry.CameraIntrinsics(10., 10., 3.5, 2.5)
        pose = geometry.RelativePose(
            geometry.rotation_about_axis((0., 1., 0.), .1), [1., .2, .1])
        f = geometry.fundamental_from_pose(k, k, pose)
        vectors = rng.uniform(-2., 2., self.grid.shape + (2,))
        _, grad = supervision.loss_sed(FlowField(vectors), f, self.cfg)
        xs = self.grid.coordinates()
        values, _, _ = geometry.sed_many(f, xs, xs + vectors)
        pixels = [(row, col) for row in range(6) for col in range(8)
                  if values[row, col] > 1e-3]
        self.assertGreater(len(pixels), 30)

        def loss(v):
            return supervision.loss_sed(FlowField(v), f, self.cfg)[0].total
        _fd_check(self, loss, vectors, grad.values, pixels)

    def test_cycle_zero(self):
        fba = FlowField.constant(self.grid, (3., 1.))
        fab = FlowField.constant(self.grid, (-3., -1.))
        report, grad_ba, grad_ab = supervision.loss_cycle(fba, fab, self.cfg)
        self.assertEqual(report.total, 0.)
        self.assertEqual(report.count[supervision.CYCLE], 25)
        self.assertEqual(grad_ba.norm(), 0.)
        self.assertEqual(grad_ab.norm(), 0.)

    def test_cycle_adaptive_filter(self):
        fba = FlowField.constant(self.grid, (3., 1.))
        fab = FlowField.constant(self.grid, (2., -1.))
        self.assertRaises(error.EmptySupport, supervision.loss_cycle,
                          fba, fab, self.cfg, True)
        report, _, _ = supervision.loss_cycle(fba, fab, self.cfg, False)
        self.assertAlmostEqual(report.total, 5.)
        # a larger absolute threshold keeps every pixel
        report, _, _ = supervision.loss_cycle(fba, fab, LossConfig(alpha=5.))
        self.assertAlmostEqual(report.total, 5.)

    def test_cycle_gradient(self):
        rng = np.random.default_rng(1)
        cfg = LossConfig(alpha=100.)
        vectors_ba = rng.uniform(.3, 1.7, self.grid.shape + (2,))
        vectors_ab = rng.uniform(-1.7, -.3, self.grid.shape + (2,))
        _, grad_ba, grad_ab = supervision.loss_cycle(
            FlowField(vectors_ba), FlowField(vectors_ab), cfg)
        targets = self.grid.coordinates() + vectors_ba
        frac = np.abs(targets - np.rint(targets))
        pixels = [(row, col) for row in range(6) for col in range(8)
                  if frac[row, col].min() > 1e-3 and
                  targets[row, col, 0] < 7 and targets[row, col, 1] < 5]
        self.assertGreater(len(pixels), 10)

        def loss_ba(v):
            return supervision.loss_cycle(FlowField(v), FlowField(vectors_ab),
                                          cfg)[0].total

        def loss_ab(v):
            return supervision.loss_cycle(FlowField(vectors_ba), FlowField(v),
                                          cfg)[0].total
        _fd_check(self, loss_ba, vectors_ba, grad_ba.values, pixels)
        every = [(row, col) for row in range(6) for col in range(8)]
        _fd_check(self, loss_ab, vectors_ab, grad_ab.values, every)

    def test_bit_zero(self):
        grid = PixelGrid(16, 12)
        transforms = [
            synth_transform.TransformSpec.identity(16, 12),
            synth_transform.TransformSpec.affine(
                [[1.05, .1, 1.], [-.05, .95, .5]], 16, 12),
            synth_transform.TransformSampler(3, 16, 12).sample(),
        ]
        for t in transforms:
            forward, backward = supervision.bit_targets(t, grid)
            report, grad_f, grad_b = supervision.loss_bit(
                forward, backward, t, self.cfg)
            self.assertLess(report.total, 1e-6)
            self.assertGreater(report.count[supervision.BIT], 0)
            self.assertEqual(grad_f.norm() + grad_b.norm(), 0.)

    def test_bit_value_and_directions(self):
        t = synth_transform.TransformSpec.affine([[1, 0, 1.5], [0, 1, .5]],
                                                 8, 6)
        zero = FlowField.zeros(self.grid)
        # forward targets (1.5, 0.5), valid on 6 x 5 pixels
        report, grad_f, grad_b = supervision.loss_bit(zero, zero, t, self.cfg,
                                                      backward=False)
        self.assertEqual(report.count[supervision.BIT], 30)
        self.assertAlmostEqual(report.total, 2.)
        self.assertEqual(grad_b.norm(), 0.)
        self.assertAlmostEqual(grad_f.values[0, 0, 0], -1. / 30)
        report, _, _ = supervision.loss_bit(zero, zero, t, self.cfg)
        self.assertEqual(report.count[supervision.BIT], 60)
        self.assertAlmostEqual(report.total, 2.)
        self.assertRaises(error.ValidationError, supervision.loss_bit,
                          zero, zero, t, self.cfg, False, False)

    def test_bit_gradient(self):
        rng = np.random.default_rng(2)
        t = synth_transform.TransformSpec.affine([[1, 0, 1.5], [0, 1, .5]],
                                                 8, 6)
        targets = supervision.bit_targets(t, self.grid)
        vectors_f = rng.uniform(2., 4., self.grid.shape + (2,))
        vectors_b = rng.uniform(1., 3., self.grid.shape + (2,))
        _, grad_f, grad_b = supervision.loss_bit(
            FlowField(vectors_f), FlowField(vectors_b), t, self.cfg,
            targets=targets)
        every = [(row, col) for row in range(6) for col in range(8)]

        def loss_f(v):
            return supervision.loss_bit(FlowField(v), FlowField(vectors_b), t,
                                        self.cfg, targets=targets)[0].total
        _fd_check(self, loss_f, vectors_f, grad_f.values, every)

        def loss_b(v):
            return supervision.loss_bit(FlowField(vectors_f), FlowField(v), t,
                                        self.cfg, targets=targets)[0].total
        _fd_check(self, loss_b, vectors_b, grad_b.values, every)

    def test_loss_total(self):
        cfg = LossConfig(w_sed=2., w_bit=.5)
        sed = supervision.LossReport.single(supervision.SED, 3., 10, cfg)
        sed_back = supervision.LossReport.single(supervision.SED, 1., 10, cfg)
        bit = supervision.LossReport.single(supervision.BIT, 4., 20, cfg)
        self.assertEqual(sed.total, 6.)
        total = supervision.loss_total([sed, sed_back, bit], cfg)
        self.assertEqual(total.per_term, {'sed': 4., 'bit': 4.})
        self.assertEqual(total.count, {'sed': 20, 'bit': 20})
        self.assertEqual(total.total, 2. * 4. + .5 * 4.)
        self.assertEqual(total.get(supervision.CYCLE), 0.)

    def test_loss_total_mixed_reductions(self):
        mean = supervision.LossReport.single(supervision.SED, 1., 1,
                                             LossConfig())
        summed = supervision.LossReport.single(
            supervision.BIT, 1., 1, LossConfig(reduction='sum'))
        self.assertRaises(error.ValidationError, supervision.loss_total,
                          [mean, summed], LossConfig())

    def test_grad_field(self):
        a = supervision.GradField(np.ones((2, 3, 2)))
        b = supervision.GradField.zeros(PixelGrid(3, 2))
        self.assertAlmostEqual((a + b).norm(), np.sqrt(12.))
        self.assertEqual(a.shape, (2, 3))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
