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
"""Command line interface of `EpiFlow`.

Each subcommand reads its inputs from files, writes its results and a
``manifest.ini`` file in the ``--out`` directory, and returns an exit code:
``0`` on success, ``2`` on a usage or validation error, ``3`` on a
numerical failure and ``4`` on an I/O or decoding error::

    $ epiflow fit --matches matches.csv --model homography --out run/
    $ epiflow -v optimize --cams cams.txt --pose pose.txt --size 64x48 \\
          --out run/
"""
import argparse
import os
import sys

import numpy as np
from loguru import logger

import epiflow
from epiflow import (error, flow_field, flow_optimizer, geometry, io,
                     matcher, metrics, model_fit, supervision,
                     synth_transform, tools)
from epiflow.io import flo, pnm, text
from epiflow.tools import config, manifest

LOG_FORMAT = '{level}: {message}'
LOG_LEVELS = ('WARNING', 'INFO', 'DEBUG')

DENSE_METRICS = ('aepe', 'f1', 'acc')
MATCH_METRICS = ('mma', 'corners')


# ------------- #
# -- Helpers -- #
# ------------- #

def _setup_logging(verbosity):
    logger.remove()
    level = LOG_LEVELS[min(verbosity, len(LOG_LEVELS) - 1)]
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    logger.enable('epiflow')


def _existing(path):
    """Return `path` if it is an existing file.

    :raise: :class:`epiflow.error.ValidationError`
    """
    if not os.path.isfile(path):
        raise error.ValidationError("No such file: '{0}'".format(path))
    return path


def _out_dir(path):
    if os.path.exists(path) and not os.path.isdir(path):
        raise error.ValidationError(
            "The output path '{0}' is not a directory".format(path))
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


def _split_config(path, classes):
    """Read the `path` key=value file and dispatch its keys to the
    configuration `classes`. A key no class knows about is an error.

    :return: the list of configuration instances, in the order of `classes`
    """
    options = config.load(_existing(path)) if path else {}
    unknown = [key for key in options
               if not any(key in cls.OPTIONS for cls in classes)]
    if unknown:
        raise error.ValidationError(
            "Unknown configuration keys in '{0}': {1}".format(
                path, ', '.join(sorted(unknown))))
    return [cls.from_mapping(options) for cls in classes]


def _fundamental(args, inputs):
    """Return the fundamental matrix given by ``--fmat`` or by ``--cams``
    and ``--pose``.
    """
    if args.fmat:
        inputs['fmat'] = _existing(args.fmat)
        return io.load(args.fmat, text.read_fundamental)
    if not args.pose or not args.cams:
        raise error.ValidationError(
            "Either --fmat or both --cams and --pose are required")
    inputs['cams'] = _existing(args.cams)
    inputs['pose'] = _existing(args.pose)
    ka, kb = io.load(args.cams, text.read_cameras)
    pose = io.load(args.pose, text.read_pose)
    return geometry.fundamental_from_pose(ka, kb, pose)


def _load_flow(path, inputs, name):
    inputs[name] = _existing(path)
    return flo.load_flo(path)


def _write_manifest(args, options, inputs, seed=0):
    run = manifest.RunManifest(args.command, options, seed=seed)
    for name, path in sorted(inputs.items()):
        run.add_input(name, path)
    manifest.save(run, args.out)


def _report_row(report):
    row = {'total': report.total}
    for term in supervision.TERMS:
        if term in report.per_term:
            row[term] = report.per_term[term]
            row['count_{0}'.format(term)] = report.count[term]
    row['reduction'] = report.reduction
    return row


# ----------------- #
# -- Subcommands -- #
# ----------------- #

def cmd_sed_eval(args):
    """Evaluate the SED loss of a flow and write its per-pixel map."""
    inputs = {}
    flow = _load_flow(args.flow, inputs, 'flow')
    f = _fundamental(args, inputs)
    loss_cfg, = _split_config(args.config, [supervision.LossConfig])
    _out_dir(args.out)
    report, _ = supervision.loss_sed(flow, f, loss_cfg)
    xs = flow.grid.coordinates()
    values, _, ok = geometry.sed_many(f, xs, xs + flow.filled)
    valid = ok & flow.valid
    sed_map = np.stack([np.where(valid, values, 0.),
                        np.zeros(flow.shape)], axis=-1)
    flo.save_flo(flow_field.FlowField(sed_map, valid),
                 os.path.join(args.out, 'sed_map.flo'))
    metrics.write_csv([_report_row(report)],
                      os.path.join(args.out, 'loss.csv'))
    logger.info("SED loss {0:.6g} over {1} pixels", report.total,
                report.count[supervision.SED])
    _write_manifest(args, dict(loss_cfg), inputs)


def _initial_model(path, grid, cfg, inputs, name):
    if path:
        field = _load_flow(path, inputs, name)
        if field.grid != grid:
            raise error.ValidationError(
                "The initial flow '{0}' is {1}x{2}, expected {3}x{4}".format(
                    path, field.width, field.height, grid.width, grid.height))
        return flow_optimizer.FlowModel.from_field(field, cfg.spacing,
                                                   cfg.kind)
    if cfg.kind == flow_optimizer.CONSTANT:
        return flow_optimizer.FlowModel.constant()
    return flow_optimizer.FlowModel.grid(grid, cfg.spacing)


def cmd_optimize(args):
    """Optimize the four flows of a triplet under the enabled losses."""
    inputs = {}
    opt_cfg, loss_cfg, ranges = _split_config(
        args.config, [flow_optimizer.OptimizerConfig,
                      supervision.LossConfig,
                      synth_transform.SamplerRanges])
    width, height = tools.parse_size(args.size)
    grid = flow_field.PixelGrid(width, height)
    f = _fundamental(args, inputs) if opt_cfg.sed else None
    t = None
    if opt_cfg.use_bit:
        if args.transform:
            inputs['transform'] = _existing(args.transform)
            t = io.load(args.transform, text.read_transform)
            if (t.width, t.height) != (width, height):
                raise error.ValidationError(
                    "The transform domain is {0}x{1}, expected {2}x{3}".format(
                        t.width, t.height, width, height))
        else:
            sampler = synth_transform.TransformSampler(
                args.seed, width, height, ranges)
            t = synth_transform.sample_transform(sampler)
    gt = {}
    for name in ('ba', 'ab'):
        path = getattr(args, 'gt_{0}'.format(name))
        if path:
            gt[name] = _load_flow(path, inputs, 'gt_{0}'.format(name))
    models = dict(
        (name, _initial_model(getattr(args, 'init_{0}'.format(name)), grid,
                              opt_cfg, inputs, 'init_{0}'.format(name)))
        for name in flow_optimizer.KEYS)
    _out_dir(args.out)
    models, trace = flow_optimizer.optimize_triplet(
        models, f, t, opt_cfg, loss_cfg, grid, grid, gt)
    for name in flow_optimizer.KEYS:
        field = flow_optimizer.evaluate_model(models[name], grid)
        flo.save_flo(field, os.path.join(args.out,
                                         'flow_{0}.flo'.format(name)))
    flow_optimizer.write_trace_csv(trace, os.path.join(args.out, 'trace.csv'))
    if t is not None:
        io.write_text(os.path.join(args.out, 'transform.txt'),
                      text.write_transform(t))
    options = dict(opt_cfg)
    options.update(loss_cfg)
    options.update(ranges)
    options['size'] = '{0}x{1}'.format(width, height)
    _write_manifest(args, options, inputs, args.seed)


def cmd_match(args):
    """Match two keypoint sets with the guidance of a pair of flows."""
    inputs = {}
    fba = _load_flow(args.flow_ba, inputs, 'flow_ba')
    fab = _load_flow(args.flow_ab, inputs, 'flow_ab')
    inputs['kpts_a'] = _existing(args.kpts_a)
    inputs['kpts_b'] = _existing(args.kpts_b)
    a = io.load_keypoints(args.kpts_a, fba.width, fba.height)
    b = io.load_keypoints(args.kpts_b, fab.width, fab.height)
    if args.radius < 0:
        raise error.ValidationError(
            "The radius must be non-negative (got {0})".format(args.radius))
    _out_dir(args.out)
    matches = matcher.match(a, b, fba, fab, args.radius,
                            stage2=not args.no_stage2,
                            workers=tools.resolve_threads(args.threads))
    io.write_text(os.path.join(args.out, 'matches.csv'),
                  text.write_match_set(matches, a, b))
    logger.info("{0} matches ({1} flow-guided)", len(matches),
                len(matches.select(matcher.STAGE_LOCAL)))
    _write_manifest(args, {'radius': args.radius,
                           'stage2': not args.no_stage2}, inputs)


def _metric_names(value, allowed):
    names = [name.strip() for name in value.split(',') if name.strip()]
    unknown = [name for name in names if name not in allowed]
    if unknown or not names:
        raise error.ValidationError(
            "Unknown metrics '{0}' (choose among {1})".format(
                value, ', '.join(allowed)))
    return names


def _eval_dense(args, inputs):
    pred = _load_flow(args.pred, inputs, 'pred')
    gt = _load_flow(args.gt, inputs, 'gt')
    names = _metric_names(args.metrics or ','.join(DENSE_METRICS),
                          DENSE_METRICS)
    row = {}
    if 'aepe' in names:
        row['aepe'] = metrics.aepe(pred, gt)
    if 'f1' in names:
        row['f1'] = metrics.f1_outlier_rate(pred, gt)
    if 'acc' in names:
        for threshold, value in sorted(metrics.accuracy_at(pred, gt).items()):
            row['acc@{0:g}'.format(threshold)] = value
    return row


def _eval_matches(args, inputs):
    default = [name for name, given in
               (('mma', args.matches), ('corners', args.est_h or args.size))
               if given]
    names = _metric_names(args.metrics or ','.join(default), MATCH_METRICS)
    if not args.gt_h:
        raise error.ValidationError("--gt-h is required with --matches")
    inputs['gt_h'] = _existing(args.gt_h)
    gt_h = io.load(args.gt_h, text.read_homography)
    row = {}
    if 'mma' in names:
        if not args.matches:
            raise error.ValidationError("The mma metric needs --matches")
        inputs['matches'] = _existing(args.matches)
        pa, pb = io.load(args.matches, text.read_matches)
        row.update(metrics.mma(pa, pb, gt_h,
                               num_features=args.num_features).as_row())
    if 'corners' in names:
        if not args.est_h or not args.size:
            raise error.ValidationError(
                "The corner metric needs --est-h and --size")
        inputs['est_h'] = _existing(args.est_h)
        est_h = io.load(args.est_h, text.read_homography)
        width, height = tools.parse_size(args.size)
        average, correct = metrics.corner_correctness(est_h, gt_h, width,
                                                      height, args.eps)
        row['corner_error'] = average
        row['corner_correct'] = int(correct)
    return row


def _eval_pose(args, inputs):
    inputs['est_pose'] = _existing(args.est_pose)
    inputs['gt_pose'] = _existing(args.gt_pose)
    est = io.load(args.est_pose, text.read_pose)
    gt = io.load(args.gt_pose, text.read_pose)
    rot_err, trans_err, correct = metrics.pose_angular_errors(est, gt)
    row = {'rot_err': rot_err, 'trans_err': trans_err}
    for threshold, value in sorted(correct.items()):
        row['pose@{0:g}'.format(threshold)] = int(value)
    return row


def cmd_eval(args):
    """Compute a metric table for flows, matches or poses."""
    inputs = {}
    if args.pred or args.gt:
        if not (args.pred and args.gt):
            raise error.ValidationError("--pred and --gt go together")
        row = _eval_dense(args, inputs)
    elif args.matches or args.est_h:
        row = _eval_matches(args, inputs)
    elif args.est_pose or args.gt_pose:
        if not (args.est_pose and args.gt_pose):
            raise error.ValidationError("--est-pose and --gt-pose go together")
        row = _eval_pose(args, inputs)
    else:
        raise error.ValidationError(
            "Nothing to evaluate: give --pred/--gt, --matches/--gt-h or "
            "--est-pose/--gt-pose")
    _out_dir(args.out)
    sys.stdout.write(metrics.format_table([row]))
    metrics.write_csv([row], os.path.join(args.out, 'metrics.csv'))
    _write_manifest(args, {'metrics': args.metrics or ''}, inputs)


def cmd_fit(args):
    """Fit a homography, a fundamental matrix or a pose to matches."""
    inputs = {'matches': _existing(args.matches)}
    cfg, = _split_config(args.config, [model_fit.RansacConfig])
    if args.threshold is not None:
        cfg['threshold'] = args.threshold
    if args.seed is not None:
        cfg['seed'] = args.seed
    pa, pb = io.load(args.matches, text.read_matches)
    _out_dir(args.out)
    if args.model == 'homography':
        h, inliers = model_fit.fit_homography_ransac(pa, pb, cfg)
        content = text.write_matrix(h)
    else:
        f, inliers = model_fit.fit_fundamental_ransac(pa, pb, cfg)
        content = text.write_matrix(f)
        if args.model == 'pose':
            if not args.cams:
                raise error.ValidationError("--cams is required for a pose")
            inputs['cams'] = _existing(args.cams)
            ka, kb = io.load(args.cams, text.read_cameras)
            pose = model_fit.pose_from_essential(f, ka, kb, pa[inliers],
                                                 pb[inliers])
            content = text.write_pose(pose)
    logger.info("{0}: {1} inliers of {2}", args.model, int(inliers.sum()),
                len(inliers))
    io.write_text(os.path.join(args.out, 'model.txt'), content)
    io.write_text(os.path.join(args.out, 'inliers.txt'),
                  text.write_mask(inliers))
    options = dict(cfg)
    options['model'] = args.model
    _write_manifest(args, options, inputs, cfg.seed)


def cmd_warp(args):
    """Warp image B onto the grid of A with the flow ``f_BA``."""
    inputs = {'image': _existing(args.image)}
    image = pnm.load_pnm(args.image)
    flow = _load_flow(args.flow, inputs, 'flow')
    _out_dir(args.out)
    warped = flow_field.warp_image(image, flow)
    extension = '.pgm' if warped.ndim == 2 else '.ppm'
    pnm.save_pnm(warped, os.path.join(args.out, 'warped' + extension))
    if args.blend:
        inputs['blend'] = _existing(args.blend)
        other = pnm.load_pnm(args.blend)
        if other.shape != warped.shape:
            raise error.ValidationError(
                "Can not blend images of shapes {0} and {1}".format(
                    other.shape, warped.shape))
        blended = (other.astype(float) + warped.astype(float)) / 2.
        pnm.save_pnm(blended, os.path.join(args.out, 'blended' + extension))
    _write_manifest(args, {}, inputs)


def cmd_sample_transform(args):
    """Draw seeded synthetic transforms."""
    width, height = tools.parse_size(args.size)
    ranges, = _split_config(args.config, [synth_transform.SamplerRanges])
    if args.draws < 1:
        raise error.ValidationError("At least one draw is required")
    sampler = synth_transform.TransformSampler(args.seed, width, height,
                                               ranges)
    records = [text.write_transform(synth_transform.sample_transform(sampler))
               for _ in range(args.draws)]
    _out_dir(args.out)
    io.write_text(os.path.join(args.out, 'transform.txt'), ''.join(records))
    options = dict(ranges)
    options.update({'size': '{0}x{1}'.format(width, height),
                    'draws': args.draws})
    _write_manifest(args, options, {}, args.seed)


# ------------ #
# -- Parser -- #
# ------------ #

def _add_geometry(parser):
    parser.add_argument('--cams', help="camera intrinsics file")
    group = parser.add_mutually_exclusive_group()
    group.add_argument('--pose', help="relative pose file")
    group.add_argument('--fmat', help="fundamental matrix file")


def build_parser():
    parser = argparse.ArgumentParser(
        prog='epiflow',
        description="Weakly supervised flow toolkit.")
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + epiflow.__version__)
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="more logging (-v: info, -vv: debug)")
    parser.add_argument('--threads', type=int, default=None,
                        help="worker threads (default: $EPIFLOW_THREADS or 1)")
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    sub = commands.add_parser('sed-eval', help=cmd_sed_eval.__doc__)
    sub.add_argument('--flow', required=True, help="f_BA flow (.flo)")
    _add_geometry(sub)
    sub.add_argument('--config', help="loss configuration file")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_sed_eval)

    sub = commands.add_parser('optimize', help=cmd_optimize.__doc__)
    _add_geometry(sub)
    sub.add_argument('--transform', help="transform record (default: drawn "
                                         "from --seed)")
    sub.add_argument('--size', required=True, help="WIDTHxHEIGHT")
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--config', help="optimizer and loss configuration file")
    for name in flow_optimizer.KEYS:
        sub.add_argument('--init-{0}'.format(name),
                         help="initial f_{0} flow (.flo)".format(name.upper()))
    sub.add_argument('--gt-ba', help="ground truth f_BA (.flo)")
    sub.add_argument('--gt-ab', help="ground truth f_AB (.flo)")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_optimize)

    sub = commands.add_parser('match', help=cmd_match.__doc__)
    sub.add_argument('--kpts-a', required=True, help=".epkp or .csv file")
    sub.add_argument('--kpts-b', required=True, help=".epkp or .csv file")
    sub.add_argument('--flow-ba', required=True,
                     help="flow sending A to B, on the grid of A (.flo)")
    sub.add_argument('--flow-ab', required=True,
                     help="flow sending B to A, on the grid of B (.flo)")
    sub.add_argument('--radius', type=float, default=5.)
    sub.add_argument('--no-stage2', action='store_true',
                     help="only keep the flow-guided matches")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_match)

    sub = commands.add_parser('eval', help=cmd_eval.__doc__)
    sub.add_argument('--pred', help="predicted flow (.flo)")
    sub.add_argument('--gt', help="ground truth flow (.flo)")
    sub.add_argument('--matches', help="xa,ya,xb,yb CSV file")
    sub.add_argument('--gt-h', help="ground truth homography file")
    sub.add_argument('--est-h', help="estimated homography file")
    sub.add_argument('--size', help="WIDTHxHEIGHT of image A (corners)")
    sub.add_argument('--eps', type=float, default=5.)
    sub.add_argument('--num-features', type=int, default=0)
    sub.add_argument('--est-pose', help="estimated pose file")
    sub.add_argument('--gt-pose', help="ground truth pose file")
    sub.add_argument('--metrics', help="comma separated metric names")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser('fit', help=cmd_fit.__doc__)
    sub.add_argument('--matches', required=True, help="xa,ya,xb,yb CSV file")
    sub.add_argument('--model', default='homography',
                     choices=('homography', 'fundamental', 'pose'))
    sub.add_argument('--cams', help="camera intrinsics file (pose only)")
    sub.add_argument('--threshold', type=float, default=None)
    sub.add_argument('--seed', type=int, default=None)
    sub.add_argument('--config', help="RANSAC configuration file")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_fit)

    sub = commands.add_parser('warp', help=cmd_warp.__doc__)
    sub.add_argument('--image', required=True, help="image B (.pgm/.ppm)")
    sub.add_argument('--flow', required=True, help="f_BA flow (.flo)")
    sub.add_argument('--blend', help="image A, averaged with the result")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_warp)

    sub = commands.add_parser('sample-transform',
                              help=cmd_sample_transform.__doc__)
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--size', default='64x48', help="WIDTHxHEIGHT")
    sub.add_argument('--draws', type=int, default=1)
    sub.add_argument('--config', help="sampler ranges file")
    sub.add_argument('--out', required=True)
    sub.set_defaults(func=cmd_sample_transform)
    return parser


def main(argv=None):
    """Run the command line interface and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    _setup_logging(args.verbose)
    try:
        tools.resolve_threads(args.threads)
        args.func(args)
    except error.Error as exc:
        logger.error("{0}", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("{0}", exc)
        return 4
    return 0

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
