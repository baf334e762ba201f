"""Exception types raised by the cascade modelling pipeline.

Everything derives from ValueError so that callers who do not care about
the distinction can catch one class; the harness catches specific types to
record per-cascade failure reasons.
"""

__all__ = [
    "CascadeFormatError",
    "UndefinedRateError",
    "NoBinsError",
    "UnderdeterminedFitError",
    "DegenerateShapeError",
    "StepTooCoarseError",
    "RebinError",
    "BinMismatchError",
    "RegressionFitError",
    "SupercriticalError",
    "ConfigMismatchError",
]


class CascadeFormatError(ValueError):
    """A cascade file could not be parsed into a valid event sequence."""


class UndefinedRateError(ValueError):
    """Events occurred in a window whose exposure denominator is zero."""


class NoBinsError(ValueError):
    """The observation window is shorter than one estimation bin."""


class UnderdeterminedFitError(ValueError):
    """Fewer usable rate estimates than free parameters."""


class DegenerateShapeError(ValueError):
    """The rate shape vanishes on every usable bin midpoint."""


class StepTooCoarseError(ValueError):
    """The implicit integral step lost diagonal dominance; reduce the step."""


class RebinError(ValueError):
    """Requested activity bins do not align with the forecast grid."""


class BinMismatchError(ValueError):
    """Predicted and actual activity series have different shapes."""


class RegressionFitError(ValueError):
    """A regression baseline could not be fitted (no rows, or collinear design)."""


class SupercriticalError(ValueError):
    """Estimated branching at the observation end implies a diverging cascade."""


class ConfigMismatchError(ValueError):
    """Evaluation results being compared were produced under different settings."""
