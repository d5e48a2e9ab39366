"""Shared exception types.

Every error raised by this package derives from :class:`OpnormLabError`, so
callers (including the CLI) can distinguish our failures from genuine bugs.
Usage/parameter problems additionally derive from ``ValueError`` and runtime
failures from ``RuntimeError``, matching what numpy-based code would raise
naturally.
"""

from __future__ import annotations


class OpnormLabError(Exception):
    """Base class for all package errors."""


class ParameterError(OpnormLabError, ValueError):
    """A parameter is outside its documented range or of the wrong kind."""


class ConfigError(OpnormLabError, ValueError):
    """A config file or merged run configuration is invalid."""


class DataError(OpnormLabError, ValueError):
    """Input data is unusable (empty, non-finite, wrong dtype...)."""


class ShapeError(OpnormLabError, ValueError):
    """Array dimensions are incompatible with the requested operation."""


class ScaleError(OpnormLabError, ValueError):
    """Problem size exceeds a guard meant to keep an oracle trustworthy."""


class ConvergenceError(OpnormLabError, RuntimeError):
    """An iterative method failed to reach its tolerance.

    Carries the last estimate so callers can still inspect how far the
    iteration got.
    """

    def __init__(self, message: str, last_estimate: float | None = None):
        super().__init__(message)
        self.last_estimate = last_estimate


class InsufficientTailError(OpnormLabError, ValueError):
    """Too few usable tail points to fit (e.g. bounded or degenerate samples)."""


class NotSubGaussianError(OpnormLabError, ValueError):
    """Requested sub-Gaussian constants for a law that has none."""


class DegenerateEnsembleError(OpnormLabError, ValueError):
    """The requested statistic is meaningless for this ensemble."""
