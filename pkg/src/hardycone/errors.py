"""Exception types raised across the package."""


class HardyError(Exception):
    """Base class for every error raised by hardycone."""


class DegenerateStateError(HardyError, ValueError):
    """Profile and its derivative vanish together, so the ODE is singular."""


class AxisSingularityError(HardyError, ValueError):
    """The profile ODE was evaluated on the cone axis (theta <= 0)."""


class EigenvalueVanishesError(HardyError, ValueError):
    """The cone exponent is zero: gamma = pi with p + 1 <= N."""


class BracketError(HardyError, RuntimeError):
    """The eigenvalue search bracket does not enclose a sign change."""


class NonMonotoneError(BracketError):
    """First-zero angle is not monotone in lambda on the coarse scan."""


class OutsideDomainError(HardyError, ValueError):
    """A point (or angle) lies outside the set an operation is defined on."""


class OutsideConeError(OutsideDomainError):
    """The point's angle to the cone axis exceeds the aperture."""


class SingularPointError(HardyError, ValueError):
    """Evaluation at the cone vertex."""


class ApertureOrderError(HardyError, ValueError):
    """beta >= gamma, so the profile value at beta is not positive."""


class ConeTooNarrowError(HardyError, ValueError):
    """Requested aperture is narrower than the domain's exterior cone angle."""


class ResolutionError(HardyError, ValueError):
    """Grid spacing too coarse: empty or disconnected interior mask."""


class DegenerateFieldError(HardyError, ValueError):
    """Grid field with a zero weighted p-mass."""


class NormalizationError(HardyError, ValueError):
    """Field values outside the range an operation requires."""


class GeometryError(HardyError, RuntimeError):
    """A sampled boundary cone fails to contain the domain."""
