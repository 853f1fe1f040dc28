"""
Custom exception classes for the ph3lab toolkit.

This module defines the exception hierarchy used throughout the lab so that
callers can tell a numerical precondition failure (horizon too small, frame
degenerate) apart from an input problem (bad manifest, bad map spec).
"""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Base exception for all lab-related errors."""
    pass


class ConfigurationError(LabError):
    """Raised when there's an issue with configuration."""
    pass


class StorageError(LabError):
    """Raised when report files cannot be written."""
    pass


class SpecFileError(LabError):
    """Raised when a map spec or manifest file cannot be parsed."""
    pass


class ManifestError(LabError):
    """Raised when an experiment manifest is invalid."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class NotPartiallyHyperbolicLinearization(LabError):
    """Raised when a linear part has no (s, c, u) modulus split."""
    pass


class VerificationFailed(LabError):
    """Raised when finite-time rate inequalities fail on a grid sample."""

    def __init__(self, message: str, sample: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.sample = sample or {}


class NumericalUnderflow(LabError):
    """Raised when a cocycle stretch factor degenerates."""
    pass


class DegenerateSplitting(LabError):
    """Raised when center-stable and center-unstable planes nearly coincide."""
    pass


class HorizonTooSmall(LabError):
    """Raised when a leaf could not be grown to the requested arc length."""
    pass


class TangencyViolation(LabError):
    """Raised when a leaf vertex fails the tangency test."""
    pass


class GeometryInvariantError(LabError):
    """Raised when intrinsic leaf distance falls below ambient distance."""
    pass


class InsufficientScale(LabError):
    """Raised when a leaf provides no vertex pairs at the requested scale."""
    pass


class NotOnLeaf(LabError):
    """Raised when two points do not lie on a common strong leaf."""
    pass


class TailNotCertified(LabError):
    """Raised when the Jacobian-ratio product tail cannot be bounded."""
    pass


class PlaqueCollision(LabError):
    """Raised when plaques of a foliated box come too close to each other."""
    pass


class NoIntersection(LabError):
    """Raised when a traced leaf never crosses its target leaf."""
    pass


class AmbiguousIntersection(LabError):
    """Raised when a traced leaf crosses its target leaf more than once."""
    pass


class NewtonDiverged(LabError):
    """Raised (and usually recorded) when a Newton solve fails to converge."""
    pass


class DegenerateJacobian(LabError):
    """Raised when A^p - I is singular and periodic points form continua."""
    pass


class ComplexPair(LabError):
    """Raised when Df^p at a periodic point has a non-real eigenvalue pair."""
    pass
