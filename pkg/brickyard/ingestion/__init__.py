"""
Ingestion: wire formats, point mapping and data health.

Public API surface:
  - parse_dch_payload / serialize_dch_payload: DCH JSON payloads
  - parse_nem12(text, site_utc_offset) -> Nem12Result (.to_payload())
  - MappingTable, MappingRule, map_and_ingest -> IngestReport
  - run_health_checks(streams, stream_id, window, now, policy) -> [HealthFinding]
"""

from .dch import DchObservation, DchPayload, DchPoint, parse_dch_payload, serialize_dch_payload
from .health import HealthFinding, HealthPolicy, run_health_checks
from .mapping import IngestReport, MappingRule, MappingTable, map_and_ingest
from .nem12 import QUALITY_MAP, UOM_MAP, Nem12Channel, Nem12Day, Nem12Result, parse_nem12

__all__ = [
    "QUALITY_MAP",
    "UOM_MAP",
    "DchObservation",
    "DchPayload",
    "DchPoint",
    "HealthFinding",
    "HealthPolicy",
    "IngestReport",
    "MappingRule",
    "MappingTable",
    "Nem12Channel",
    "Nem12Day",
    "Nem12Result",
    "map_and_ingest",
    "parse_dch_payload",
    "parse_nem12",
    "run_health_checks",
    "serialize_dch_payload",
]
