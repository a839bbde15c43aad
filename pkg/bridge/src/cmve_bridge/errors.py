"""Error hierarchy with stable machine-readable categories.

The CLI prints ``error:<category>: <message>`` so scripts can branch on
the category without parsing prose. Categories mirror the retrieval
engine's conventions so mixed pipelines see one vocabulary.
"""

from __future__ import annotations


class BridgeError(Exception):
    """Base class; ``category`` is a stable lowercase-hyphen token."""

    category = "bridge-error"


class ConfigError(BridgeError):
    """Invalid job parameters or an unusable checkpoint."""

    category = "config-error"


class FormatError(BridgeError):
    """Malformed input rows or inconsistent embedding dimensions."""

    category = "format-error"
