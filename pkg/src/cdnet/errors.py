"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible shapes for the requested operation."""


class TapeReuseError(RuntimeError):
    """A computation tape was asked to replay its adjoints a second time."""


class ClassCoverageError(ValueError):
    """A dataset lacks the per-class samples an operation requires."""


class IntervalCollapseError(ValueError):
    """A generator parameter interval became empty after knob adjustments."""


class DataFormatError(ValueError):
    """A data file violates the expected on-disk layout."""
