"""
Point classification: (gateway, source point name) → stream (+ model point).

Ingestion never drops data silently: observations of a source point with no
rule are counted and the point is listed as unmapped in the report.
"""

import threading
from pathlib import Path
from typing import Iterable, Optional

from pydantic import BaseModel, Field

from ..exceptions import DuplicateError, InvalidArgumentError, NotFoundError
from ..logger import get_module_logger
from ..storage import JsonStore
from ..timeseries.models import Observation
from ..timeseries.store import TimeseriesStore
from .dch import DchPayload

logger = get_module_logger("ingestion.mapping")


class MappingRule(BaseModel):
    gateway: str
    source: str                     # source point name
    stream_id: str
    point: Optional[str] = None     # model point IRI

    @property
    def key(self) -> tuple[str, str]:
        return self.gateway, self.source


class IngestReport(BaseModel):
    gateway: str
    ingested: int = 0               # observations accepted (inserted + replaced)
    inserted: int = 0
    replaced: int = 0
    unmapped: list[str] = Field(default_factory=list)
    unmapped_observations: int = 0
    streams: dict[str, int] = Field(default_factory=dict)   # stream id → observations accepted


class MappingTable:
    """Persisted rule set; the (gateway, source) side is unique."""

    def __init__(self, root: Optional[Path] = None):
        self._docs = JsonStore(root) if root else None
        self._rules: dict[tuple[str, str], MappingRule] = {}
        self._lock = threading.Lock()

    def add_rule(self, rule: MappingRule, streams: TimeseriesStore) -> MappingRule:
        if not streams.has_stream(rule.stream_id):
            raise NotFoundError(f"Stream not found: {rule.stream_id}", details={"stream_id": rule.stream_id})
        with self._lock:
            if rule.key in self._rules:
                raise DuplicateError(f"Source point {rule.source!r} of {rule.gateway} is already mapped",
                                     details={"gateway": rule.gateway, "source": rule.source})
            self._rules[rule.key] = rule
            self._save()
        if rule.point:
            streams.bind_point(rule.stream_id, rule.point)
        logger.info(f"Mapped {rule.gateway}:{rule.source} -> {rule.stream_id}")
        return rule

    def rules_for(self, gateway: str) -> list[MappingRule]:
        return [r for k, r in sorted(self._rules.items()) if k[0] == gateway]

    def all_rules(self) -> list[MappingRule]:
        return [r for _, r in sorted(self._rules.items())]

    def _save(self) -> None:
        if self._docs is not None:
            self._docs.put("mappings", [r.model_dump() for r in self.all_rules()])

    def restore(self) -> None:
        if self._docs is None:
            return
        for doc in self._docs.get("mappings") or []:
            rule = MappingRule(**doc)
            self._rules[rule.key] = rule


def map_and_ingest(payload: DchPayload, rules: Iterable[MappingRule], streams: TimeseriesStore) -> IngestReport:
    """
    Append every mapped point's observations to its stream.

    All rule streams are checked and all observations converted before the
    first append, so a bad rule or timestamp stores nothing.

    Raises:
        NotFoundError: a rule names an unknown stream
    """
    by_source = {r.source: r for r in rules if r.gateway == payload.gateway}
    report = IngestReport(gateway=payload.gateway)

    batches: dict[str, list[Observation]] = {}
    for i, point in enumerate(payload.points):
        rule = by_source.get(point.name)
        if rule is None:
            if point.name not in report.unmapped:
                report.unmapped.append(point.name)
            report.unmapped_observations += len(point.observations)
            continue
        if not streams.has_stream(rule.stream_id):
            raise NotFoundError(f"Mapping for {point.name!r} names unknown stream {rule.stream_id}",
                                details={"stream_id": rule.stream_id, "source": point.name})
        try:
            batches.setdefault(rule.stream_id, []).extend(o.to_observation() for o in point.observations)
        except ValueError as e:
            raise InvalidArgumentError(f"Point {point.name!r}: {e}", details={"path": f"$.points[{i}]"})

    for stream_id, batch in batches.items():
        appended = streams.append(stream_id, batch)
        report.inserted += appended.inserted
        report.replaced += appended.replaced
        report.streams[stream_id] = len(batch)
        report.ingested += len(batch)

    if report.unmapped:
        logger.warning(f"Payload from {payload.gateway}: unmapped points {report.unmapped}")
    logger.info(f"Ingested {report.ingested} observations from {payload.gateway} "
                f"({report.inserted} new, {report.replaced} replaced)")
    return report
