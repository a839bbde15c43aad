"""Bridge from transformer checkpoints to the CMVE1 embedding container."""

from .encode import CheckpointEncoder
from .errors import BridgeError, ConfigError, FormatError
from .export import ExportJob, ExportResult, export_corpus, export_queries
from .format import MAGIC, write_cmve, write_id_map

__all__ = [
    "BridgeError",
    "CheckpointEncoder",
    "ConfigError",
    "ExportJob",
    "ExportResult",
    "FormatError",
    "MAGIC",
    "export_corpus",
    "export_queries",
    "write_cmve",
    "write_id_map",
]
