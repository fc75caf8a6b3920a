"""
Custom exceptions for XCCY HJM Helper package.
"""


class XccyHjmError(Exception):
    """Base exception for the cross-currency HJM engine."""
    pass


class ExponentialMomentUnbounded(XccyHjmError):
    """Raised when a jump family cannot integrate e^{beta'xi} or a tilt overflows."""
    pass


class EmptyGrid(XccyHjmError):
    """Raised when a time grid has no steps or is not strictly increasing."""
    pass


class ReversedInterval(XccyHjmError):
    """Raised when an interval [t, T] has T < t."""
    pass


class GridExhausted(XccyHjmError):
    """Raised when no pillar remains to cover a requested maturity or step."""
    pass


class MissingState(XccyHjmError):
    """Raised when a simulation result does not carry a requested quantity."""
    pass


class ZeroTotalWeight(XccyHjmError):
    """Raised when importance weights sum to zero."""
    pass


class BeforePeriodStart(XccyHjmError):
    """Raised when an index quantity is requested before t = delta_f."""
    pass


class ScheduleOffGrid(XccyHjmError):
    """Raised when schedule dates are not observation times of the simulation."""
    pass


class UncollateralizedUnsupported(XccyHjmError):
    """Raised when a stream without full collateralization reaches the MC pricer."""
    pass


class DegenerateSensitivity(XccyHjmError):
    """Raised when the spread sensitivity of a swap is zero."""
    pass


class AdmissibilityViolation(XccyHjmError):
    """Raised when a market model fails the admissibility checks."""
    pass


class SimulationError(XccyHjmError):
    """Custom exception for unexpected simulation failures."""
    pass


class ConfigSchemaError(XccyHjmError):
    """Custom exception for scenario document errors. Carries the dotted field path."""

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(f"{prefix}{message}")


class VerificationFailure(XccyHjmError):
    """Raised by the verify command when at least one check fails."""
    pass


class ExportError(XccyHjmError):
    """Custom exception for CSV and Excel export errors."""
    pass
