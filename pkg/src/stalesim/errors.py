"""Exception types shared across the package."""


class StalesimError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveDepth(StalesimError):
    """Point is on or behind the camera plane (z <= 0)."""


class InvalidConfig(StalesimError):
    """A configuration value is out of range or inconsistent."""


class EmptyBuffer(StalesimError):
    """No radar returns fall inside the requested buffer window."""


class InsufficientHistory(StalesimError):
    """The frame store has no frame close enough to the requested time."""


class NoCommonPoints(StalesimError):
    """No points survive image-bounds filtering under both projections."""


class DivergenceDetected(StalesimError):
    """Training loss became non-finite."""


class BaselineZero(StalesimError):
    """F1 normalization is undefined because the baseline F1 is zero."""
