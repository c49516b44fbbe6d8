"""Gaussian approximation of the small jumps of Levy processes in total variation.

Submodules
----------
levy_model  triplets, measures, truncated moments and thresholds
sampler     seeded simulation of increments
spectral    characteristic function, FFT density, numerical TV oracle
bounds      explicit upper/lower TV bounds and the eps* table
jumptest    tests for the presence of small jumps, calibration, MC harness
cli         command-line front end
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CalibrationError,
    CapabilityError,
    DataError,
    DegenerateError,
    DomainError,
    InfeasibleError,
    IntegrabilityError,
    LevyTVError,
    NumericError,
    ResolutionError,
    SizeError,
)
from .levy_model import (  # noqa: E402
    AtomMeasure,
    Band,
    DensityMeasure,
    LevyTriplet,
    MomentTable,
    StableMeasure,
    ThresholdSet,
    drift_beps,
    intensity,
    moment_table,
    thresholds,
)

__all__ = [
    "AtomMeasure", "Band", "DensityMeasure", "LevyTriplet", "MomentTable", "StableMeasure",
    "ThresholdSet", "drift_beps", "intensity", "moment_table", "thresholds",
    "CalibrationError", "CapabilityError", "DataError", "DegenerateError", "DomainError",
    "InfeasibleError", "IntegrabilityError", "LevyTVError", "NumericError", "ResolutionError",
    "SizeError", "__version__",
]
