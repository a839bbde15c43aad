"""Exception types shared across the engine.

Each error carries a short machine-parseable ``category`` string that the
CLI prints on failure.
"""


class MultivecError(Exception):
    """Base class for all engine errors."""

    category = "error"


class FormatError(MultivecError):
    """A file does not conform to its declared format.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    category = "format-error"

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class DimensionError(MultivecError):
    """Embedding dimensionality disagrees with the index or query."""

    category = "dimension-mismatch"


class UnknownDocumentError(MultivecError):
    """A document id is not present in the index."""

    category = "unknown-document"


class ConfigError(MultivecError):
    """Invalid configuration values."""

    category = "config-error"
