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
"""This module contains all exceptions raised by `EpiFlow` when an error
occurred.

Exceptions are grouped in three families, each one bound to an exit code
of the command line interface:

    - :class:`ValidationError` (exit code ``2``),
    - :class:`NumericalError` (exit code ``3``),
    - :class:`FormatError` (exit code ``4``).
"""


class Error(Exception):
    """Base class for exception."""
    exit_code = 1


# ---------------------- #
# -- Validation errors -- #
# ---------------------- #

class ValidationError(Error):
    """Exception raised when arguments or preconditions are not valid."""
    exit_code = 2


class ZeroTranslation(ValidationError):
    """Exception raised when a translation has (almost) no length."""
    pass


class OutOfBounds(ValidationError):
    """Exception raised when a pixel lies outside of a grid."""
    pass


class InsufficientMatches(ValidationError):
    """Exception raised when too few correspondences are supplied to fit
    a model.
    """
    pass


class NoLossEnabled(ValidationError):
    """Exception raised when the optimizer has no loss term to minimize."""
    pass


class EmptyMask(ValidationError):
    """Exception raised when a dense metric has no pixel to evaluate."""
    pass


class EmptySet(ValidationError):
    """Exception raised when an accuracy has no correspondence to evaluate."""
    pass


class EmptyMatches(ValidationError):
    """Exception raised when a match metric has no match to evaluate."""
    pass


# --------------------- #
# -- Numerical errors -- #
# --------------------- #

class NumericalError(Error):
    """Exception raised when a computation could not produce a result."""
    exit_code = 3


class DegenerateLine(NumericalError):
    """Exception raised when an epipolar line has a null normal (the point
    lies at, or very close to, the epipole).
    """
    pass


class EmptySupport(NumericalError):
    """Exception raised when no pixel contributes to a loss."""
    pass


class NoConvergence(NumericalError):
    """Exception raised when an iterative inversion did not converge."""
    pass


class SamplingExhausted(NumericalError):
    """Exception raised when too many random draws were rejected."""
    pass


class DivergenceDetected(NumericalError):
    """Exception raised when the optimized loss explodes."""
    pass


class NoModel(NumericalError):
    """Exception raised when RANSAC did not find a model with enough
    inliers.
    """
    pass


class DegenerateConfiguration(NumericalError):
    """Exception raised when correspondences do not constrain a model."""
    pass


class CheiralityAmbiguous(NumericalError):
    """Exception raised when no pose candidate puts a strict majority of
    points in front of both cameras.
    """
    pass


# ------------------ #
# -- Format errors -- #
# ------------------ #

class FormatError(Error):
    """Exception raised when a file can not be decoded."""
    exit_code = 4


class BadMagic(FormatError):
    """Exception raised when a file does not start with the expected tag."""
    pass


class TruncatedPayload(FormatError):
    """Exception raised when a file is shorter than its header declares."""
    pass


class NonPositiveDims(FormatError):
    """Exception raised when a header declares a null or negative size."""
    pass

# vim:expandtab:smartindent:tabstop=4:softtabstop=4:shiftwidth=4:
