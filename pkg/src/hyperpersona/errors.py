"""Exception types shared across the package."""


class HyperPersonaError(Exception):
    """Base class for all package errors."""


class SchemaError(HyperPersonaError):
    """A required column or field is missing from an input file."""


class RowError(HyperPersonaError):
    """A data row could not be parsed; carries the offending row index."""

    def __init__(self, message: str, row_index: int):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class EmptyCorpusError(HyperPersonaError):
    """An input corpus contains no data rows."""


class EmptyDocumentError(HyperPersonaError):
    """A document has no content left after normalization."""


class ConfigurationError(HyperPersonaError):
    """A configuration value is out of its legal range."""


class DimensionError(HyperPersonaError):
    """Operand shapes or dimensions are incompatible."""


class FormatError(HyperPersonaError):
    """A binary file does not carry the expected magic or version."""


class CorruptionError(HyperPersonaError):
    """A binary file is truncated or fails its integrity checks."""


class BundleValidationError(HyperPersonaError):
    """An embedding bundle does not pair with its segmentation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "bundle validation failed: " + "; ".join(str(v) for v in self.violations)
        )


class DegenerateGraphError(HyperPersonaError):
    """A level restriction produced a graph with no nodes."""


class NumericError(HyperPersonaError):
    """A numeric operation produced NaN/Inf or violated a contract."""


class IndexRangeError(HyperPersonaError):
    """An index (edge endpoint, segment id) is out of range."""


class StageError(HyperPersonaError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
