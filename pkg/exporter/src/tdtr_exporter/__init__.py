"""Trace exporter: torch training hooks writing the TDTR container."""

__version__ = "0.1.0"

from .capture import ExportSpec, TraceCapture, export_epoch_traces  # noqa: F401
from .writer import Record, write_tdtr  # noqa: F401
