"""
Time-series store for scalar observations.

Public API surface:
  - TimeseriesStore: create_stream, append, read_window, aggregate,
    completeness, get_meta, list_streams, bind_point
  - Models: StreamMeta, Observation, Window, AppendReport, Bucket
  - Tables: UNIT_TABLE, QUALITATIVE_CODES, QUALITY_CODES
"""

from .models import (
    QUALITATIVE_CODES,
    QUALITY_CODES,
    UNIT_TABLE,
    AppendReport,
    Bucket,
    Observation,
    StreamMeta,
    Window,
    encode_qualitative,
    to_epoch,
    to_iso,
    units_match,
)
from .store import TimeseriesStore, merge

__all__ = [
    "QUALITATIVE_CODES",
    "QUALITY_CODES",
    "UNIT_TABLE",
    "AppendReport",
    "Bucket",
    "Observation",
    "StreamMeta",
    "TimeseriesStore",
    "Window",
    "encode_qualitative",
    "merge",
    "to_epoch",
    "to_iso",
    "units_match",
]
