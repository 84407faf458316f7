"""Exception types shared across the package."""


class FiberUQError(Exception):
    """Base class for all package errors."""


class FieldIOError(FiberUQError):
    """Raised when a field/volume/trait file cannot be read or written."""


class TraitError(FiberUQError):
    """Raised for invalid trait polygons (too few vertices, self-intersection, zero area)."""


class DegenerateSamplesError(FiberUQError):
    """Raised when a sample set has no spread and a bandwidth cannot be derived."""


class InternalConsistencyError(FiberUQError):
    """Raised when a closed-form integral lands outside [0,1] by more than the allowed slack."""


class GridMismatchError(FiberUQError):
    """Raised when two volumes that must share a grid do not."""


class ModelConfigError(FiberUQError):
    """Raised for inconsistent noise-model configurations."""
