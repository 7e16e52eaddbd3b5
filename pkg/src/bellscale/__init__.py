"""Scalable multiqubit Bell inequalities built from paired CHSH partitions."""

from bellscale.bell_core import (
    BellExpression,
    CorrelationTerm,
    MeasurementSettings,
    build_bell_expression,
    canonical_settings,
    canonical_sign,
    term_count,
)
from bellscale.errors import (
    BellError,
    CalibrationError,
    ConvergenceError,
    StructureError,
)

__version__ = "0.1.0"

__all__ = [
    "BellError",
    "BellExpression",
    "CalibrationError",
    "ConvergenceError",
    "CorrelationTerm",
    "MeasurementSettings",
    "StructureError",
    "build_bell_expression",
    "canonical_settings",
    "canonical_sign",
    "term_count",
]
