"""
Application lifecycle: install (discovery + bind) and sandboxed runs.

Install:
  1. reader access on the target; the target's active published model
  2. discovery query invoked against that model as the installer
  3. zero solutions → state "failed-discovery", naming the variables with
     no candidates; otherwise bindings keep only streams the installer reads
  4. the entrypoint's bind hook freezes whatever else the run needs

Run:
  at most one run per installation at a time; the entrypoint gets scoped
  handles only, and every violation is recorded on the RunResult.
"""

import threading
import time
from pathlib import Path
from typing import Any, Optional

from rdflib import URIRef

from ..briql.parser import parse_query
from ..briql.planner import plan
from ..briql.schemas import BriqlResponse, StoredQueryRef
from ..briql.service import BriqlService
from ..directory.models import PLATFORM_SCOPE, AccessDecision
from ..directory.registry import Directory, new_id
from ..exceptions import (
    AuthorizationError,
    DiscoveryError,
    EntrypointError,
    InvalidArgumentError,
    NotFoundError,
    RunInProgressError,
    SandboxViolation,
)
from ..graph.namespaces import REF
from ..graph.store import from_node
from ..logger import get_module_logger
from ..storage import JsonStore
from ..timeseries.store import TimeseriesStore
from .models import Binding, Installation, RunResult
from .registry import AppStore, BindContext, RunContext, get_procedure
from .sandbox import StreamReader, StreamWriter, ViolationLog, run_sandboxed

logger = get_module_logger("apps.service")


class AppService:
    """
    Installs and runs registered applications.

    Args:
        apps: Package store
        briql: Query service (discovery runs through it, as the installer)
        streams: Time-series store
        root: Optional directory for the "installs" document
        run_seconds: Wall-time limit per run
    """

    def __init__(self, apps: AppStore, briql: BriqlService, streams: TimeseriesStore,
                 root: Optional[Path] = None, run_seconds: float = 300.0):
        self.apps = apps
        self.briql = briql
        self.directory: Directory = briql.directory
        self.streams = streams
        self.run_seconds = run_seconds
        self._docs = JsonStore(root) if root else None
        self._installs: dict[str, Installation] = {}
        self._results: dict[str, RunResult] = {}
        self._run_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()

    def stream_readable(self, principal: str, stream_id: str) -> bool:
        """Reader on the stream's owner scope (the platform scope for unowned streams)."""
        if not self.streams.has_stream(stream_id):
            return False
        owner = self.streams.get_meta(stream_id).owner or PLATFORM_SCOPE
        return self.directory.check_access(principal, owner, "reader") is AccessDecision.ALLOW

    # --- install ---

    def _unmatched(self, query, graph_id: str) -> list[str]:
        planned = plan(query, self.briql.graphs, [graph_id])
        empty = [step.variable for step in planned.steps if step.candidates == 0]
        # Every variable has candidates: the paths exclude all combinations
        return empty or sorted({r for p in query.paths for r in (p.from_ref, p.to_ref)})

    def _bindings(self, principal: str, response: BriqlResponse, graph_id: str,
                  diagnostics: list[str]) -> dict[str, Binding]:
        graph = self.briql.graphs.snapshot(graph_id)
        bindings: dict[str, Binding] = {}
        for column in response.columns:
            indices = sorted({row[column] for row in response.solutions})
            entities = sorted({response.entities[i].id for i in indices})
            streams: set[str] = set()
            for i in indices:
                record = response.entities[i]
                streams.update(p.stream for p in record.points or [] if p.stream)
                streams.update(str(from_node(v)) for v in graph.objects(URIRef(record.id), REF.timeseries))
            kept = []
            for stream_id in sorted(streams):
                if self.stream_readable(principal, stream_id):
                    kept.append(stream_id)
                else:
                    diagnostics.append(f"Stream {stream_id} of {column} is not readable by {principal}; not bound")
            bindings[column] = Binding(variable=column, entities=entities, streams=kept)
        return bindings

    def install(self, principal: str, app_id: str, target: str, config: Optional[dict] = None,
                version: Optional[int] = None) -> Installation:
        """
        Bind an application to a site or building.

        Raises:
            AuthorizationError: no reader grant on target
            NotFoundError: unknown app, or target has no published model
            InvalidArgumentError: config rejected by the entrypoint's config model
        """
        self.directory.require(principal, [target], "reader")
        if not self.directory.is_target(target):
            raise AuthorizationError("reader access denied", denied=[target])
        package = self.apps.get_app(app_id, version)
        proc = get_procedure(package.entrypoint)
        parsed_config = proc.parse_config(config)
        model = self.directory.resolve_model(target)

        if isinstance(package.discovery, StoredQueryRef):
            query = self.briql.resolve_query(package.discovery)
        else:
            query = parse_query(package.discovery)
        response = self.briql.invoke(query, [model.model_id], principal=principal)

        installation = Installation(
            install_id=new_id("inst"),
            app_id=package.app_id,
            version=package.version,
            target=target,
            model_id=model.model_id,
            principal=principal,
            config=parsed_config.model_dump(mode="json"),
        )
        diagnostics: list[str] = []
        if not response.solutions:
            missing = self._unmatched(query, model.graph_id)
            installation.state = "failed-discovery"
            diagnostics.append(f"Model {model.model_id} has no match for: {', '.join(missing)}")
            installation.extras["unmatched"] = missing
        else:
            installation.bindings = self._bindings(principal, response, model.graph_id, diagnostics)
            streams = {s for b in installation.bindings.values() for s in b.streams}
            if proc.bind is not None:
                context = BindContext(
                    target=target,
                    target_kind="site" if target in self.directory.sites else "building",
                    model_id=model.model_id,
                    graph=self.briql.graphs.snapshot(model.graph_id),
                    ontology=self.briql.graphs.ontology,
                    response=response,
                    bindings=installation.bindings,
                    config=parsed_config,
                    readable=lambda s: self.stream_readable(principal, s),
                )
                try:
                    outcome = proc.bind(context)
                except DiscoveryError as e:
                    installation.state = "failed-discovery"
                    diagnostics.append(e.message)
                else:
                    unreadable = [s for s in outcome.streams if not self.stream_readable(principal, s)]
                    if unreadable:
                        installation.state = "failed-discovery"
                        diagnostics.append(f"Bind hook needs unreadable streams: {', '.join(unreadable)}")
                    else:
                        installation.extras.update(outcome.extras)
                        streams.update(outcome.streams)
                    diagnostics.extend(outcome.diagnostics)
            if installation.state == "bound":
                installation.streams = sorted(streams)

        installation.diagnostics = diagnostics
        with self._lock:
            self._installs[installation.install_id] = installation
            self._save()
        logger.info(f"Installed {package.app_id} v{package.version} on {target} as "
                    f"{installation.install_id}: {installation.state}")
        return installation.model_copy(deep=True)

    def get_installation(self, principal: str, install_id: str) -> Installation:
        installation = self._installs.get(install_id)
        # Unknown ids are denied like forbidden ones
        if installation is None or self.directory.check_access(principal, installation.target, "reader") is AccessDecision.DENY:
            raise AuthorizationError("reader access denied", denied=[install_id])
        return installation

    def list_installations(self, principal: str) -> list[Installation]:
        return [i.model_copy() for _, i in sorted(self._installs.items())
                if self.directory.check_access(principal, i.target, "reader") is AccessDecision.ALLOW]

    # --- run ---

    def run(self, principal: str, install_id: str, as_of: Optional[int] = None) -> RunResult:
        """
        Execute the entrypoint of a bound installation in the sandbox.

        Args:
            principal: Acting principal (reader on the installation's target)
            install_id: Installation to run
            as_of: Reference time; observations at or after it are invisible

        Raises:
            InvalidArgumentError: installation is not bound
            RunInProgressError: another run of this installation is active
        """
        installation = self.get_installation(principal, install_id)
        if installation.state != "bound":
            raise InvalidArgumentError(f"Installation {install_id} is {installation.state}",
                                       details={"install_id": install_id, "state": installation.state})
        with self._lock:
            run_lock = self._run_locks.setdefault(install_id, threading.Lock())
        if not run_lock.acquire(blocking=False):
            raise RunInProgressError(f"Installation {install_id} is already running", details={"install_id": install_id})
        try:
            return self._run_locked(installation, int(time.time()) if as_of is None else int(as_of))
        finally:
            run_lock.release()

    def _run_locked(self, installation: Installation, as_of: int) -> RunResult:
        package = self.apps.get_app(installation.app_id, installation.version)
        proc = get_procedure(package.entrypoint)
        violations = ViolationLog()
        reader = StreamReader(self.streams, installation.streams, as_of, violations)
        writer = StreamWriter(self.streams, installation.install_id, installation.target, violations)
        context = RunContext(
            install_id=installation.install_id,
            as_of=as_of,
            bindings={k: v.model_copy(deep=True) for k, v in installation.bindings.items()},
            config=proc.parse_config(installation.config),
            extras=dict(installation.extras),
            reader=reader,
            writer=writer,
        )

        status = "ok"
        value: Any = None
        error = None
        try:
            value = run_sandboxed(lambda: proc.run(context), violations, self.run_seconds, [reader, writer])
        except SandboxViolation:
            status = "sandbox_violation"
        except EntrypointError as e:
            status = "failed"
            error = e.to_response()["error"]
            logger.error(f"Run of {installation.install_id} failed: {e.message}")
        if violations.entries:
            status = "sandbox_violation"
            value = None

        with self._lock:
            installation.runs += 1
            result = RunResult(
                install_id=installation.install_id,
                run=installation.runs,
                as_of=as_of,
                status=status,
                result=value if isinstance(value, dict) or value is None else {"value": value},
                outputs=list(writer.written),
                violations=list(violations.entries),
                error=error,
            )
            self._results[installation.install_id] = result
            self._save()
        logger.info(f"Run {result.run} of {installation.install_id}: {status}")
        return result

    def result(self, principal: str, install_id: str) -> RunResult:
        """Latest run result."""
        self.get_installation(principal, install_id)
        if install_id not in self._results:
            raise NotFoundError(f"Installation {install_id} has not run", details={"install_id": install_id})
        return self._results[install_id]

    # --- persistence ---

    def _save(self) -> None:
        if self._docs is not None:
            self._docs.put("installs", {
                "installations": {k: v.model_dump(mode="json") for k, v in self._installs.items()},
                "results": {k: v.model_dump(mode="json") for k, v in self._results.items()},
            })

    def restore(self) -> None:
        if self._docs is None:
            return
        doc = self._docs.get("installs") or {}
        with self._lock:
            self._installs = {k: Installation.model_validate(v) for k, v in doc.get("installations", {}).items()}
            self._results = {k: RunResult.model_validate(v) for k, v in doc.get("results", {}).items()}
        logger.info(f"Restored {len(self._installs)} installations")
