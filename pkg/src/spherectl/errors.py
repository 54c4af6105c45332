"""Exception types raised across the package."""


class SphereCtlError(Exception):
    """Base class for all package errors."""


class InputError(SphereCtlError, ValueError):
    """Malformed input: wrong dimension, zero-length direction, bad range."""


class GeodesicUndefinedError(SphereCtlError):
    """Geodesic requested between (numerically) antipodal points."""


class InfeasibleStateError(SphereCtlError):
    """State lies inside (or on the boundary of) the unsafe set."""


class BoundaryContactError(InfeasibleStateError):
    """Separation reached zero; the damping gain is undefined there."""


class NearBoundaryJacobianError(InfeasibleStateError):
    """Planner Jacobian requested too close to an obstacle boundary."""


class ConfigurationError(SphereCtlError):
    """Scenario geometry violates a structural requirement (e.g. overlapping tubes)."""


class NumericalBlowupError(SphereCtlError):
    """Integrator produced NaN or Inf."""


class ScenarioValidationError(SphereCtlError):
    """Scenario failed one or more load-time invariants.

    ``errors`` holds every failure found, not only the first.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class AmbiguousClosestPointWarning(UserWarning):
    """Two well-separated boundary points are equally close."""
