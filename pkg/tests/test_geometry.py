# -*- coding: UTF-8 -*-

try:
    import unittest2 as unittest
except:
    import unittest

import numpy as np

from args import ARGS

from epiflow import error, geometry, scene


def _translation_f(t=(1., 0., 0.)):
    pose = geometry.RelativePose(np.eye(3), t)
    k = geometry.CameraIntrinsics.identity()
    return geometry.fundamental_from_pose(k, k, pose)


class TestGeometry(unittest.TestCase):

    def test_skew(self):
        t, x = np.array([1., 2., 3.]), np.array([-4., .5, 2.])
        np.testing.assert_allclose(geometry.skew(t).dot(x), np.cross(t, x))

    def test_rotation_about_axis(self):
        r = geometry.rotation_about_axis((1., 2., -1.), .7)
        np.testing.assert_allclose(r.T.dot(r), np.eye(3), atol=1e-12)
        self.assertAlmostEqual(np.linalg.det(r), 1., places=12)
        np.testing.assert_allclose(
            geometry.rotation_about_axis((0., 0., 1.), np.pi / 2).dot(
                [1., 0., 0.]), [0., 1., 0.], atol=1e-12)

    def test_intrinsics(self):
        k = geometry.CameraIntrinsics(500., 400., 320., 240., 1.)
        np.testing.assert_allclose(k.matrix.dot(k.inverse), np.eye(3),
                                   atol=1e-12)
        self.assertEqual(k.as_tuple(), (500., 400., 320., 240., 1.))
        self.assertRaises(error.ValidationError,
                          geometry.CameraIntrinsics, 0., 1., 0., 0.)
        self.assertRaises(error.ValidationError,
                          geometry.CameraIntrinsics, 1., 1., np.nan, 0.)

    def test_pose_validation(self):
        self.assertRaises(error.ValidationError, geometry.RelativePose,
                          np.diag([1., 1., 2.]), [1., 0., 0.])
        # a reflection is orthonormal but not a rotation
        self.assertRaises(error.ValidationError, geometry.RelativePose,
                          np.diag([1., 1., -1.]), [1., 0., 0.])
        self.assertRaises(error.ValidationError, geometry.RelativePose,
                          np.eye(3), [np.inf, 0., 0.])

    def test_zero_translation(self):
        k = geometry.CameraIntrinsics.identity()
        pose = geometry.RelativePose(np.eye(3), [0., 0., 0.])
        self.assertRaises(error.ZeroTranslation,
                          geometry.fundamental_from_pose, k, k, pose)

    def test_fundamental_normalized(self):
        f = geometry.FundamentalMatrix(np.arange(9.).reshape(3, 3))
        self.assertAlmostEqual(np.linalg.norm(f.m), 1., places=12)
        np.testing.assert_array_equal(f.transpose().m, f.m.T)
        np.testing.assert_array_equal(f.T.m, f.m.T)
        self.assertRaises(error.ValidationError,
                          geometry.FundamentalMatrix, np.zeros((3, 3)))

    def test_epipolar_exactness(self):
        rng = np.random.default_rng(0)
        k = geometry.CameraIntrinsics(60., 60., 23.5, 15.5)
        for _ in range(100):
            pose = scene.random_pose(rng)
            world = scene.PlanarScene(48, 32, k, k, pose)
            f = world.fundamental()
            self.assertAlmostEqual(f.singular_values()[2], 0., places=9)
            pa, pb = world.project(world.random_points(rng, 50))
            residuals = np.sum(geometry.homogeneous(pb) *
                               geometry.homogeneous(pa).dot(f.m.T), axis=1)
            self.assertLess(np.abs(residuals).max(), 1e-9)
            values, _, ok = geometry.sed_many(f, pa, pb)
            self.assertTrue(ok.all())
            self.assertLess(values.max(), 1e-6)

    def test_epipoles(self):
        rng = np.random.default_rng(1)
        k = geometry.CameraIntrinsics(60., 60., 23.5, 15.5)
        f = geometry.fundamental_from_pose(k, k, scene.random_pose(rng))
        e_a, e_b = geometry.epipoles(f)
        np.testing.assert_allclose(f.m.dot(e_a), 0., atol=1e-12)
        np.testing.assert_allclose(f.m.T.dot(e_b), 0., atol=1e-12)

    def test_sed_hand_value(self):
        f = _translation_f()
        self.assertAlmostEqual(geometry.sed(f, (2., 3.), (5., 4.5)), 3.)
        self.assertAlmostEqual(
            geometry.epipolar_distance(f, (2., 3.), (5., 4.5)), 1.5)
        # sliding along the epipolar line costs nothing
        self.assertAlmostEqual(geometry.sed(f, (2., 3.), (40., 3.)), 0.)

    def test_sed_symmetric(self):
        rng = np.random.default_rng(2)
        k = geometry.CameraIntrinsics(60., 60., 23.5, 15.5)
        f = geometry.fundamental_from_pose(k, k, scene.random_pose(rng))
        x, xp = np.array([3., 4.]), np.array([10., 2.])
        self.assertAlmostEqual(geometry.sed(f, x, xp),
                               geometry.sed(f.transpose(), xp, x), places=12)

    def test_degenerate_line(self):
        f = _translation_f((0., 0., 1.))
        self.assertRaises(error.DegenerateLine, geometry.sed, f,
                          (0., 0.), (1., 1.))
        self.assertRaises(error.DegenerateLine, geometry.epipolar_distance,
                          f, (0., 0.), (1., 1.))
        self.assertTrue(geometry.epipolar_line(f, (0., 0.)).is_degenerate)

    def test_sed_gradient(self):
        rng = np.random.default_rng(3)
        k = geometry.CameraIntrinsics(60., 60., 23.5, 15.5)
        f = geometry.fundamental_from_pose(k, k, scene.random_pose(rng))
        h = 1e-6
        for _ in range(20):
            x = rng.uniform(0., 47., 2)
            xp = rng.uniform(0., 47., 2)
            if geometry.sed(f, x, xp) < 1e-3:
                continue
            analytic = geometry.sed_gradient(f, x, xp)
            for axis in range(2):
                step = np.zeros(2)
                step[axis] = h
                numeric = (geometry.sed(f, x, xp + step) -
                           geometry.sed(f, x, xp - step)) / (2 * h)
                self.assertAlmostEqual(analytic[axis], numeric, delta=1e-6)

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
