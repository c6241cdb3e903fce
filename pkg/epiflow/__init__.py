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
"""The `epiflow` package estimates and evaluates dense flows between two
images using only their epipolar geometry as supervision.

It provides:

    - epipolar geometry (:mod:`epiflow.geometry`),
    - dense flow fields (:mod:`epiflow.flow_field`),
    - supervision losses with analytic gradients (:mod:`epiflow.supervision`),
    - random affine/thin-plate spline transforms
      (:mod:`epiflow.synth_transform`),
    - a direct flow optimizer (:mod:`epiflow.flow_optimizer`),
    - a flow-guided sparse matcher (:mod:`epiflow.matcher`),
    - geometric model estimators (:mod:`epiflow.model_fit`),
    - evaluation metrics (:mod:`epiflow.metrics`),
    - file formats (:mod:`epiflow.io`).

The library does not log anything unless asked to:

    >>> from loguru import logger
    >>> logger.enable('epiflow')
"""
from loguru import logger

__author__ = 'The EpiFlow Authors'
__licence__ = 'LGPL v3'
__version__ = '0.3.1'

from epiflow import error

logger.disable('epiflow')

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
