"""Exception and warning types shared by the package."""
from __future__ import annotations


class MinitrapError(Exception):
    """Base class for all package errors."""


class GeometryError(MinitrapError, ValueError):
    """Invalid conductor geometry or construction parameters.

    ``field`` names the offending parameter when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class SingularityError(MinitrapError):
    """Field requested within the exclusion radius of a filament."""

    def __init__(self, message: str, element_index: int | None = None, group: str | None = None):
        super().__init__(message)
        self.element_index = element_index
        self.group = group


class NearZeroFieldError(MinitrapError):
    """|B| too small for |B| to be differentiable."""


class ConvergenceError(MinitrapError):
    """A numerical refinement did not reach its tolerance.

    ``estimate`` carries the best value obtained.
    """

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class PhysicsError(MinitrapError):
    """The configuration does not describe a usable trap."""


class NoMinimumError(PhysicsError):
    """Minimum search left its bounding box."""


class NoTrapError(PhysicsError):
    """No escape direction is bounded by a barrier."""


class AntiTrappedError(PhysicsError):
    """Negative curvature at the putative minimum."""


class NotAchievableError(PhysicsError):
    """A root-solve found no sign change in its bracket."""


class TransitionError(MinitrapError, ValueError):
    """Spectroscopic transition outside the domain of the formula."""


class AuditError(MinitrapError):
    """Power audit missing data for an element."""


class ConfigError(MinitrapError):
    """Malformed or inconsistent workbench configuration."""


class MajoranaWarning(UserWarning):
    """Trajectory or configuration enters a near-zero-field region."""


class ModelValidityWarning(UserWarning):
    """Model evaluated outside its range of validity."""


class ChordConvergenceWarning(UserWarning):
    """Arc chordization hit its refinement limit."""
