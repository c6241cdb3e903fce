# -*- coding: UTF-8 -*-

try:
    import unittest2 as unittest
except:
    import unittest

import numpy as np

from args import ARGS

from epiflow import error, geometry, scene, supervision
from epiflow.scene import PlanarScene


class TestScene(unittest.TestCase):

    def test_fronto_parallel(self):
        world = PlanarScene.fronto_parallel(48, 32)
        flow = world.flow_ba()
        self.assertEqual(flow.valid.sum(axis=1).tolist(), [42] * 32)
        np.testing.assert_allclose(flow.vectors[flow.valid], [(6., 0.)],
                                   atol=1e-9)
        back = world.flow_ab()
        self.assertFalse(back.valid[:, :6].any())
        self.assertTrue(back.valid[:, 6:].all())
        np.testing.assert_allclose(back.vectors[back.valid], [(-6., 0.)],
                                   atol=1e-9)

    def test_flows_satisfy_epipolar_constraint(self):
        k = geometry.CameraIntrinsics(50., 55., 23.5, 15.5)
        pose = geometry.RelativePose(
            geometry.rotation_about_axis((.2, 1., .1), .05), [.5, .1, .05])
        world = PlanarScene(48, 32, k, k, pose, normal=(0., .1, 1.),
                            depth=10.)
        cfg = supervision.LossConfig()
        f = world.fundamental()
        report, _ = supervision.loss_sed(world.flow_ba(), f, cfg)
        self.assertLess(report.total, 1e-6)
        self.assertGreater(report.count[supervision.SED], 500)
        report, _ = supervision.loss_sed(world.flow_ab(), f.transpose(), cfg)
        self.assertLess(report.total, 1e-6)

    def test_occluder(self):
        world = PlanarScene.fronto_parallel(48, 32, occluder=(10, 8, 20, 20))
        flow = world.flow_ba()
        np.testing.assert_allclose(flow.vectors[10, 15], (15., 0.),
                                   atol=1e-9)
        np.testing.assert_allclose(flow.vectors[2, 15], (6., 0.), atol=1e-9)
        mask = world.occlusion_mask()
        self.assertTrue(mask.any())
        # plane pixels landing behind the occluder in image B
        self.assertTrue(mask[10, 25])
        self.assertFalse(mask[10, 15])
        self.assertFalse(mask[10, 5])
        self.assertFalse(mask[2, 25])
        back = world.flow_ab()
        np.testing.assert_allclose(back.vectors[10, 30], (-15., 0.),
                                   atol=1e-9)
        self.assertFalse(PlanarScene.fronto_parallel().occlusion_mask().any())

    def test_invalid(self):
        k = geometry.CameraIntrinsics.identity()
        pose = geometry.RelativePose(np.eye(3), [1., 0., 0.])
        self.assertRaises(error.ValidationError, PlanarScene, 8, 8, k, k,
                          pose, depth=0.)
        self.assertRaises(error.ValidationError, PlanarScene.fronto_parallel,
                          occluder=(0, 0, 4, 4), occluder_depth=20.)

    def test_projections(self):
        rng = np.random.default_rng(ARGS.seeds)
        for _ in range(ARGS.seeds):
            pose = scene.random_pose(rng)
            k = geometry.CameraIntrinsics(60., 60., 23.5, 15.5)
            world = PlanarScene(48, 32, k, k, pose)
            points = world.random_points(rng, 50)
            self.assertTrue(np.all(points[:, 2] >= 4.))
            pa, pb = world.project(points)
            self.assertTrue(np.all(pa >= -1e-9))
            self.assertTrue(np.all(pa <= [47. + 1e-9, 31. + 1e-9]))
            f = world.fundamental()
            values, _, ok = geometry.sed_many(f, pa, pb)
            self.assertLess(values[ok].max(), 1e-6)

    def test_random_pose(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pose = scene.random_pose(rng, max_angle=.2, min_baseline=.5)
            length = np.linalg.norm(pose.translation)
            self.assertTrue(.5 - 1e-12 <= length <= 1. + 1e-12)
            cos = (np.trace(pose.rotation) - 1.) / 2.
            self.assertGreaterEqual(cos, np.cos(.2) - 1e-12)

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
