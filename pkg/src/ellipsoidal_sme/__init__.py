"""Recursive ellipsoidal set-membership state estimation.

Ellipsoids may be degenerate (singular shape matrix). The time update adds
zonotope-bounded process noise under a pseudo-volume or trace criterion; the
measurement update fuses strips, half-spaces and hyperplanes under a
worst-case scale, pseudo-volume or trace criterion.
"""

from .correction import (CaseKind, CaseLabel, CorrectionCriterion, Measurement,
                         MeasurementKind, correct)
from .errors import EstimationError
from .estimator import EstimatorConfig, EstimatorState, init_state, step
from .geometry import Ellipsoid, contains, pseudo_volume, ssal
from .numerics import DEFAULT_TOL, Tolerances
from .prediction import PredictionCriterion, ProcessModel, predict

__all__ = [
    "CaseKind", "CaseLabel", "CorrectionCriterion", "DEFAULT_TOL", "Ellipsoid",
    "EstimationError", "EstimatorConfig", "EstimatorState", "Measurement", "MeasurementKind",
    "PredictionCriterion", "ProcessModel", "Tolerances", "contains", "correct", "init_state",
    "predict", "pseudo_volume", "ssal", "step",
]
