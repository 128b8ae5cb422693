"""
Platform: wires every store and service together under one data directory.

Layout under data_dir:
  graphs/    named-graph snapshots (written on flush)
  streams/   stream metadata + append logs
  queries/   stored query versions
  state/     registry, mappings, apps, installs documents

The library surface is this object; the HTTP service is a thin adapter
over it. Stream access follows the directory: reading needs reader and
writing needs modeler on the stream's owner scope (the platform scope for
unowned streams).
"""

import time
from pathlib import Path
from typing import Any, Optional, Union

from .apps import AppService, AppStore
from .briql import BriqlService, Limits, QueryStore
from .config import PlatformConfig
from .directory import PLATFORM_SCOPE, AccessDecision, Directory
from .exceptions import AuthenticationError, AuthorizationError, InvalidArgumentError, NotFoundError
from .graph import GraphStore, default_ontology
from .ingestion import (
    HealthFinding,
    HealthPolicy,
    IngestReport,
    MappingRule,
    MappingTable,
    map_and_ingest,
    parse_dch_payload,
    parse_nem12,
    run_health_checks,
)
from .logger import get_module_logger, setup_logger
from .timeseries import Observation, StreamMeta, TimeseriesStore, Window

logger = get_module_logger("platform")


class Platform:
    """
    Every module, constructed from one config.

    Args:
        config: Platform configuration
        persist: Keep state under config.data_dir (False = memory only)
    """

    def __init__(self, config: Optional[PlatformConfig] = None, persist: bool = True):
        self.config = config or PlatformConfig()
        root = Path(self.config.data_dir) if persist else None

        def sub(name: str) -> Optional[Path]:
            return root / name if root else None

        self.ontology = default_ontology()
        self.graphs = GraphStore(self.ontology, root=sub("graphs"))
        self.streams = TimeseriesStore(root=sub("streams"))
        self.directory = Directory(self.graphs, root=sub("state"), stream_exists=self.streams.has_stream)
        self.queries = QueryStore(root=sub("queries"))
        self.briql = BriqlService(self.graphs, self.directory, self.queries,
                                  Limits(max_bindings=self.config.max_bindings,
                                         max_seconds=self.config.max_query_seconds))
        self.mappings = MappingTable(root=sub("state"))
        self.apps = AppStore(self.queries, root=sub("state"))
        self.app_service = AppService(self.apps, self.briql, self.streams, root=sub("state"),
                                      run_seconds=self.config.app_run_seconds)

    @classmethod
    def open(cls, config: Optional[PlatformConfig] = None, persist: bool = True) -> "Platform":
        """Build, restore persisted state and apply bootstrap grants."""
        platform = cls(config, persist)
        log_file = platform.config.log_file
        setup_logger(level=platform.config.log_level, log_file=str(log_file) if log_file else None)
        if persist:
            platform.graphs.restore()
            platform.streams.restore()
            platform.directory.restore()
            platform.mappings.restore()
            platform.apps.restore()
            platform.app_service.restore()
        for principal, grants in platform.config.bootstrap_grants.items():
            for grant in grants:
                platform.directory.bootstrap_grant(principal, grant.scope, grant.role)
        logger.info(f"Platform open (data dir: {platform.config.data_dir if persist else 'memory'})")
        return platform

    def flush(self) -> None:
        """Write graph snapshots and compact stream logs."""
        self.graphs.flush()
        self.streams.flush()

    def authenticate(self, token: Optional[str]) -> str:
        """Bearer token → principal id."""
        if not token or token not in self.config.tokens:
            raise AuthenticationError("Missing or unknown bearer token")
        return self.config.tokens[token]

    # --- streams ---

    def _stream_scope(self, stream_id: str) -> Optional[str]:
        if not self.streams.has_stream(stream_id):
            return None
        return self.streams.get_meta(stream_id).owner or PLATFORM_SCOPE

    def require_stream(self, principal: str, stream_ids: list[str], role: str) -> None:
        """Like Directory.require; unknown streams are denied the same way."""
        denied = []
        for stream_id in stream_ids:
            scope = self._stream_scope(stream_id)
            if scope is None or self.directory.check_access(principal, scope, role) is AccessDecision.DENY:
                denied.append(stream_id)
        if denied:
            raise AuthorizationError(f"{role} access denied", denied=denied)

    def create_stream(self, principal: str, meta: Union[StreamMeta, dict]) -> StreamMeta:
        meta = meta if isinstance(meta, StreamMeta) else StreamMeta.model_validate(meta)
        self.directory.require(principal, [meta.owner or PLATFORM_SCOPE], "modeler")
        self.streams.create_stream(meta)
        return self.streams.get_meta(meta.stream_id)

    def list_streams(self, principal: str) -> list[StreamMeta]:
        return [m for m in self.streams.list_streams()
                if self.directory.check_access(principal, m.owner or PLATFORM_SCOPE, "reader") is AccessDecision.ALLOW]

    def read_stream(self, principal: str, stream_id: str, window: Window,
                    bucket_seconds: Optional[int] = None, fn: str = "sum") -> list:
        self.require_stream(principal, [stream_id], "reader")
        if bucket_seconds:
            return self.streams.aggregate(stream_id, window, bucket_seconds, fn)
        return self.streams.read_window(stream_id, window)

    def append(self, principal: str, stream_id: str, observations: list[Union[Observation, dict]]):
        self.require_stream(principal, [stream_id], "modeler")
        return self.streams.append(stream_id, observations)

    def _point_properties(self, point: Optional[str]) -> dict[str, Any]:
        if not point:
            return {}
        for target in sorted(set(self.directory.sites) | set(self.directory.buildings)):
            try:
                graph_id = self.directory.resolve_model(target).graph_id
            except NotFoundError:
                continue
            properties = self.graphs.entity_properties(graph_id, point)
            if properties:
                return properties
        return {}

    def stream_health(self, principal: str, stream_id: str, window: Window, now: Optional[int] = None,
                      policy: Optional[HealthPolicy] = None) -> list[HealthFinding]:
        """Health findings; range limits come from the bound point's properties in a published model."""
        self.require_stream(principal, [stream_id], "reader")
        meta = self.streams.get_meta(stream_id)
        return run_health_checks(self.streams, stream_id, window, int(time.time()) if now is None else now,
                                 policy, self._point_properties(meta.point))

    # --- ingestion ---

    def add_mapping(self, principal: str, rule: Union[MappingRule, dict]) -> MappingRule:
        rule = rule if isinstance(rule, MappingRule) else MappingRule.model_validate(rule)
        self.require_stream(principal, [rule.stream_id], "modeler")
        return self.mappings.add_rule(rule, self.streams)

    def _ingest(self, principal: str, payload, rules: list[MappingRule]) -> IngestReport:
        names = {p.name for p in payload.points}
        touched = sorted({r.stream_id for r in rules if r.gateway == payload.gateway and r.source in names})
        self.require_stream(principal, touched, "modeler")
        return map_and_ingest(payload, rules, self.streams)

    def ingest_dch(self, principal: str, document) -> IngestReport:
        payload = parse_dch_payload(document)
        return self._ingest(principal, payload, self.mappings.rules_for(payload.gateway))

    def ingest_nem12(self, principal: str, text: str, stream_id: Optional[str] = None,
                     site_utc_offset: float = 0) -> IngestReport:
        """
        Ingest a NEM12 document.

        With stream_id the document must hold exactly one channel, which goes
        to that stream; otherwise channels map through the "nem12" rules.
        """
        result = parse_nem12(text, site_utc_offset)
        payload = result.to_payload()
        if stream_id is None:
            return self._ingest(principal, payload, self.mappings.rules_for(payload.gateway))
        if len(result.channels) != 1:
            raise InvalidArgumentError(
                f"Document has {len(result.channels)} channels; map them instead of naming one stream",
                details={"channels": [c.source_name for c in result.channels]},
            )
        rule = MappingRule(gateway=payload.gateway, source=result.channels[0].source_name, stream_id=stream_id)
        return self._ingest(principal, payload, [rule])
