"""Exception hierarchy shared across the package."""


class SoftBoltzError(Exception):
    """Base class for all package errors."""


class GeometryError(SoftBoltzError):
    """Position outside the domain closure, or an ill-posed domain."""


class DegenerateVelocityError(SoftBoltzError):
    """Velocity magnitude below the machine threshold for ray tracing."""


class AdmissibilityError(SoftBoltzError, ValueError):
    """Parameter outside its admissible range."""


class QuadratureError(SoftBoltzError):
    """A refinement or consistency check on a quadrature failed."""


class InterpolationRangeError(SoftBoltzError):
    """Requested velocity outside the lattice box in 'error' range mode."""


class CompatibilityError(SoftBoltzError):
    """Source/boundary data violate the zero-mass compatibility condition."""


class ConvergenceError(SoftBoltzError):
    """An iterative stage failed to contract.

    ``stage`` carries solver-specific context (e.g. the offending coupling
    interval) so the caller can refine the schedule.
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class FitError(SoftBoltzError):
    """Decay-fit preconditions violated (non-monotone tail, too few points)."""


class ConfigError(SoftBoltzError):
    """Run-configuration parse or validation failure."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
