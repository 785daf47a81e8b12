"""Exception hierarchy shared by the estimator modules."""


class EstimationError(Exception):
    """Base class for every error raised by this package."""


class NotSpsd(EstimationError):
    """A matrix expected to be symmetric positive semi-definite is not."""


class DegenerateLeadingCoefficient(EstimationError):
    """The cubic coefficient is negligible relative to the others."""


class DegenerateDirection(EstimationError):
    """A noise generator has no component in the metric of the shape matrix."""


class ZeroTrace(EstimationError):
    """Trace-based step size requested for a shape matrix with zero trace."""


class NoRootInUnit(EstimationError):
    """An optimality condition has no admissible root in [0, 1)."""


class NonPositiveScale(EstimationError):
    """The scale factor dropped to zero or below during a fusion."""


class InconsistentMeasurement(EstimationError):
    """A measurement does not intersect the current ellipsoid."""


class InvalidBounds(EstimationError):
    """Measurement bounds are unordered or both infinite."""


class SingularTransition(EstimationError):
    """A state-transition matrix needed for a gramian is singular."""


class ValidationError(EstimationError):
    """Scenario content is well formed but violates a modelling assumption."""


class ParseError(EstimationError):
    """Scenario file could not be decoded."""
