"""Exception types shared across the package."""


class StreetscapeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StreetscapeError):
    """Bad argument or configuration supplied by the caller."""


class DimensionMismatchError(ValidationError):
    """Two grids that must share dimensions do not."""


class SchemaError(ValidationError):
    """A document is syntactically valid but violates the expected schema."""


class GeometryError(ValidationError):
    """A polygon or transform is geometrically degenerate."""


class LabelResolutionError(ValidationError):
    """An annotation label cannot be resolved to a class id."""


class FormatError(StreetscapeError):
    """A binary payload is not in the expected format."""


class BackendError(StreetscapeError):
    """A segmentation backend failed or is misconfigured."""
