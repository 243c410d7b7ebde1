from .export import (
    ExportError,
    ExportManifest,
    PARITY_TOLERANCE,
    ParityError,
    export,
    load_checkpoint,
)

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportManifest",
    "PARITY_TOLERANCE",
    "ParityError",
    "export",
    "load_checkpoint",
]
