# -*- coding: UTF-8 -*-

try:
    import unittest2 as unittest
except:
    import unittest

import contextlib
import csv
import io as _io
import os
import shutil
import tempfile

import numpy as np

from args import ARGS

from epiflow import cli, geometry, io
from epiflow.flow_field import FlowField, PixelGrid
from epiflow.io import flo, pnm, text
from epiflow.matcher import KeypointSet
from epiflow.model_fit import Homography
from epiflow.scene import PlanarScene
from epiflow.tools import manifest

GT_H = np.array([[1.05, .02, 3.], [-.03, .98, -2.], [1e-4, -2e-4, 1.]])


class TestCLI(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def _path(self, *names):
        return os.path.join(self.directory, *names)

    def _run(self, *argv):
        out = _io.StringIO()
        with contextlib.redirect_stdout(out):
            code = cli.main(list(argv))
        return code, out.getvalue()

    def _read(self, *names):
        with open(self._path(*names), 'rb') as file_:
            return file_.read()

    def _rows(self, *names):
        with open(self._path(*names), newline='') as file_:
            return list(csv.DictReader(file_))

    def _write(self, name, content):
        path = self._path(name)
        if isinstance(content, bytes):
            io.write_bytes(path, content)
        else:
            io.write_text(path, content)
        return path

    def _geometry(self, world):
        cams = self._write('cams.txt', text.write_cameras(world.ka, world.kb))
        pose = self._write('pose.txt', text.write_pose(world.pose))
        return cams, pose

    def _homography_matches(self, n=40, outliers=10):
        rng = np.random.default_rng(7)
        pa = rng.uniform(0., 64., (n + outliers, 2))
        pb = Homography(GT_H).apply(pa)
        pb[n:] += rng.uniform(20., 40., (outliers, 2))
        return self._write('matches.csv', text.write_matches(pa, pb))

    # -- Usage -- #

    def test_no_command(self):
        self.assertEqual(self._run()[0], 2)

    def test_missing_file(self):
        code, _ = self._run('sed-eval', '--flow', self._path('none.flo'),
                            '--fmat', self._path('none.txt'),
                            '--out', self._path('out'))
        self.assertEqual(code, 2)

    def test_fmat_and_pose_exclusive(self):
        code, _ = self._run('sed-eval', '--flow', 'a.flo', '--fmat', 'f.txt',
                            '--pose', 'p.txt', '--out', self._path('out'))
        self.assertEqual(code, 2)

    def test_unknown_config_key(self):
        config = self._write('ranges.ini', 'rotation = 10\nbogus = 1\n')
        code, _ = self._run('sample-transform', '--config', config,
                            '--out', self._path('out'))
        self.assertEqual(code, 2)

    def test_bad_flo(self):
        path = self._write('bad.flo', b'garbage bytes')
        world = PlanarScene.fronto_parallel()
        cams, pose = self._geometry(world)
        code, _ = self._run('sed-eval', '--flow', path, '--cams', cams,
                            '--pose', pose, '--out', self._path('out'))
        self.assertEqual(code, 4)

    # -- sample-transform -- #

    def test_sample_transform_reproducible(self):
        for name in ('run1', 'run2'):
            code, _ = self._run('sample-transform', '--seed', '3',
                                '--size', '32x24', '--draws', '2',
                                '--out', self._path(name))
            self.assertEqual(code, 0)
        for name in ('transform.txt', manifest.FILENAME):
            self.assertEqual(self._read('run1', name),
                             self._read('run2', name))
        records = self._read('run1', 'transform.txt').decode().splitlines()
        self.assertEqual(len(records), 2)
        for record in records:
            t = text.read_transform(record)
            self.assertEqual((t.width, t.height), (32, 24))

    # -- sed-eval -- #

    def test_sed_eval_ground_truth(self):
        world = PlanarScene.fronto_parallel()
        flow_path = self._path('flow.flo')
        flo.save_flo(world.flow_ba(), flow_path)
        cams, pose = self._geometry(world)
        code, _ = self._run('sed-eval', '--flow', flow_path, '--cams', cams,
                            '--pose', pose, '--out', self._path('out'))
        self.assertEqual(code, 0)
        row, = self._rows('out', 'loss.csv')
        self.assertLess(abs(float(row['total'])), 1e-6)
        loaded = flo.load_flo(flow_path)
        self.assertLessEqual(int(row['count_sed']), int(loaded.valid.sum()))
        self.assertGreater(int(row['count_sed']), 0)
        sed_map = flo.load_flo(self._path('out', 'sed_map.flo'))
        self.assertEqual(sed_map.shape, (world.height, world.width))

    def test_sed_eval_fmat(self):
        world = PlanarScene.fronto_parallel()
        flow_path = self._path('flow.flo')
        shifted = world.flow_ba().filled + (0., 2.)
        flo.save_flo(FlowField(shifted, world.flow_ba().valid), flow_path)
        fmat = self._write('f.txt', text.write_matrix(world.fundamental()))
        code, _ = self._run('sed-eval', '--flow', flow_path, '--fmat', fmat,
                            '--out', self._path('out'))
        self.assertEqual(code, 0)
        row, = self._rows('out', 'loss.csv')
        self.assertGreater(float(row['total']), 1.)

    # -- optimize -- #

    def test_optimize_reproducible(self):
        world = PlanarScene.fronto_parallel(16, 12)
        cams, pose = self._geometry(world)
        config = self._write('opt.ini',
                             '# short run\niterations = 5\nkind = constant\n')
        for name in ('run1', 'run2'):
            code, _ = self._run('optimize', '--cams', cams, '--pose', pose,
                                '--size', '16x12', '--seed', '2',
                                '--config', config,
                                '--out', self._path(name))
            self.assertEqual(code, 0)
        for name in ('flow_ba.flo', 'flow_ab.flo', 'flow_bpb.flo',
                     'flow_bbp.flo', 'trace.csv', 'transform.txt',
                     manifest.FILENAME):
            self.assertEqual(self._read('run1', name),
                             self._read('run2', name))
        self.assertIn(len(self._rows('run1', 'trace.csv')), range(1, 7))

    def test_optimize_without_loss(self):
        config = self._write('opt.ini', 'sed = false\ncyc_adaptive = false\n'
                                        'bit_forward = false\n'
                                        'bit_backward = false\n')
        code, _ = self._run('optimize', '--size', '16x12', '--config', config,
                            '--out', self._path('out'))
        self.assertEqual(code, 2)

    # -- match -- #

    def test_match_empty_keypoints(self):
        grid = PixelGrid(32, 32)
        rng = np.random.default_rng(ARGS.seeds)
        empty = KeypointSet(np.zeros((0, 2)), np.zeros((0, 4)))
        b = KeypointSet(rng.uniform(0., 31., (5, 2)),
                        rng.uniform(.1, 1., (5, 4)))
        io.save_keypoints(empty, self._path('a.epkp'))
        io.save_keypoints(b, self._path('b.csv'))
        for name in ('ba', 'ab'):
            flo.save_flo(FlowField.constant(grid, (0., 0.)),
                         self._path('{0}.flo'.format(name)))
        code, _ = self._run('match', '--kpts-a', self._path('a.epkp'),
                            '--kpts-b', self._path('b.csv'),
                            '--flow-ba', self._path('ba.flo'),
                            '--flow-ab', self._path('ab.flo'),
                            '--out', self._path('out'))
        self.assertEqual(code, 0)
        self.assertEqual(self._read('out', 'matches.csv').decode(),
                         ','.join(text.MATCH_SET_COLUMNS) + '\n')

    def test_match_negative_radius(self):
        grid = PixelGrid(8, 8)
        kpts = KeypointSet([(1., 1.)], [(1., 0.)])
        io.save_keypoints(kpts, self._path('a.epkp'))
        flo.save_flo(FlowField.zeros(grid), self._path('f.flo'))
        code, _ = self._run('match', '--kpts-a', self._path('a.epkp'),
                            '--kpts-b', self._path('a.epkp'),
                            '--flow-ba', self._path('f.flo'),
                            '--flow-ab', self._path('f.flo'),
                            '--radius', '-1', '--out', self._path('out'))
        self.assertEqual(code, 2)

    # -- fit -- #

    def test_fit_too_few_matches(self):
        path = self._write('few.csv', text.write_matches(
            [(0., 0.), (1., 0.), (0., 1.)], [(0., 0.), (1., 0.), (0., 1.)]))
        code, _ = self._run('fit', '--matches', path,
                            '--out', self._path('out'))
        self.assertEqual(code, 2)

    def test_fit_homography_reproducible(self):
        path = self._homography_matches()
        for name in ('run1', 'run2'):
            code, _ = self._run('fit', '--matches', path, '--seed', '5',
                                '--out', self._path(name))
            self.assertEqual(code, 0)
        for name in ('model.txt', 'inliers.txt', manifest.FILENAME):
            self.assertEqual(self._read('run1', name),
                             self._read('run2', name))
        mask = text.read_mask(self._read('run1', 'inliers.txt').decode())
        np.testing.assert_array_equal(mask, [True] * 40 + [False] * 10)
        h = text.read_homography(self._read('run1', 'model.txt').decode())
        np.testing.assert_allclose(h.m, Homography(GT_H).m, atol=1e-6)

    # -- eval -- #

    def test_eval_dense(self):
        world = PlanarScene.fronto_parallel()
        flo.save_flo(world.flow_ba(), self._path('gt.flo'))
        code, out = self._run('eval', '--pred', self._path('gt.flo'),
                              '--gt', self._path('gt.flo'),
                              '--out', self._path('out'))
        self.assertEqual(code, 0)
        self.assertIn('aepe', out)
        row, = self._rows('out', 'metrics.csv')
        self.assertEqual(float(row['aepe']), 0.)
        self.assertEqual(float(row['f1']), 0.)
        self.assertEqual(float(row['acc@1']), 1.)

    def test_eval_unknown_metric(self):
        flo.save_flo(FlowField.zeros(PixelGrid(4, 4)), self._path('f.flo'))
        code, _ = self._run('eval', '--pred', self._path('f.flo'),
                            '--gt', self._path('f.flo'),
                            '--metrics', 'aepe,psnr',
                            '--out', self._path('out'))
        self.assertEqual(code, 2)

    def test_eval_matches(self):
        path = self._homography_matches(n=20, outliers=5)
        gt_h = self._write('gt_h.txt', text.write_matrix(GT_H))
        code, _ = self._run('eval', '--matches', path, '--gt-h', gt_h,
                            '--est-h', gt_h, '--size', '64x48',
                            '--out', self._path('out'))
        self.assertEqual(code, 0)
        row, = self._rows('out', 'metrics.csv')
        self.assertEqual(int(row['num_matches']), 25)
        self.assertAlmostEqual(float(row['mma@10']), .8)
        self.assertAlmostEqual(float(row['corner_error']), 0.)
        self.assertEqual(row['corner_correct'], '1')

    def test_eval_matches_default_metrics(self):
        path = self._homography_matches(n=20, outliers=5)
        gt_h = self._write('gt_h.txt', text.write_matrix(GT_H))
        code, _ = self._run('eval', '--matches', path, '--gt-h', gt_h,
                            '--out', self._path('out'))
        self.assertEqual(code, 0)
        row, = self._rows('out', 'metrics.csv')
        self.assertAlmostEqual(float(row['mma@10']), .8)
        self.assertNotIn('corner_error', row)
        code, _ = self._run('eval', '--est-h', gt_h, '--gt-h', gt_h,
                            '--size', '64x48', '--out', self._path('corners'))
        self.assertEqual(code, 0)
        row, = self._rows('corners', 'metrics.csv')
        self.assertNotIn('mma@10', row)
        self.assertEqual(row['corner_correct'], '1')
        # corners requested by name still need the estimate and the size
        code, _ = self._run('eval', '--matches', path, '--gt-h', gt_h,
                            '--metrics', 'mma,corners',
                            '--out', self._path('both'))
        self.assertEqual(code, 2)

    def test_eval_mma_needs_matches(self):
        gt_h = self._write('gt_h.txt', text.write_matrix(GT_H))
        code, _ = self._run('eval', '--est-h', gt_h, '--gt-h', gt_h,
                            '--size', '64x48', '--metrics', 'mma',
                            '--out', self._path('out'))
        self.assertEqual(code, 2)

    def test_eval_pose(self):
        est = geometry.RelativePose(
            geometry.rotation_about_axis((0., 1., 0.), np.radians(5.)),
            [1., 0., 0.])
        gt = geometry.RelativePose(np.eye(3), [1., 0., 0.])
        est_path = self._write('est.txt', text.write_pose(est))
        gt_path = self._write('gt.txt', text.write_pose(gt))
        code, _ = self._run('eval', '--est-pose', est_path,
                            '--gt-pose', gt_path, '--out', self._path('out'))
        self.assertEqual(code, 0)
        row, = self._rows('out', 'metrics.csv')
        self.assertAlmostEqual(float(row['rot_err']), 5., places=4)
        self.assertAlmostEqual(float(row['trans_err']), 0., places=4)
        self.assertEqual(row['pose@10'], '1')

    # -- warp -- #

    def test_warp(self):
        image = np.arange(48, dtype=np.uint8).reshape(6, 8) * 5
        pnm.save_pnm(image, self._path('b.pgm'))
        flo.save_flo(FlowField.constant(PixelGrid(8, 6), (1., 0.)),
                     self._path('f.flo'))
        code, _ = self._run('warp', '--image', self._path('b.pgm'),
                            '--flow', self._path('f.flo'),
                            '--blend', self._path('b.pgm'),
                            '--out', self._path('out'))
        self.assertEqual(code, 0)
        warped = pnm.load_pnm(self._path('out', 'warped.pgm'))
        np.testing.assert_array_equal(warped[:, :7], image[:, 1:])
        np.testing.assert_array_equal(warped[:, 7], 0)
        self.assertTrue(os.path.isfile(self._path('out', 'blended.pgm')))

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
