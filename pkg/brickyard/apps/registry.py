"""
Procedure registry and app store.

An application entrypoint is a registered analytic procedure:

    @procedure("mv.option_c", config_model=MvConfig, bind=bind_mv)
    def run_mv(ctx: RunContext) -> dict: ...

`bind` runs once at install time with the discovery response and the
published model graph; whatever it returns is frozen into the installation.
`run` sees only the installation's frozen state plus sandbox handles.

Packages are immutable once registered; re-registering an app id yields the
next version.
"""

import json
import re
import threading
import zipfile
from pathlib import Path
from typing import Any, Callable, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rdflib import Graph

from ..briql.parser import canonical_json, parse_query
from ..briql.schemas import BriqlResponse, StoredQueryRef
from ..exceptions import InvalidArgumentError, NotFoundError, ParseError
from ..graph.ontology import Ontology
from ..logger import get_module_logger
from ..storage import JsonStore
from .models import AppPackage, Binding

logger = get_module_logger("apps.registry")

APP_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


class BindContext(BaseModel):
    """What a bind hook may look at during install."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    target: str
    target_kind: str                                # "site" or "building"
    model_id: str
    graph: Graph
    ontology: Ontology
    response: BriqlResponse
    bindings: dict[str, Binding]
    config: BaseModel
    readable: Callable[[str], bool]                 # stream id → installer may read it


class BindOutcome(BaseModel):
    extras: dict[str, Any] = Field(default_factory=dict)
    streams: list[str] = Field(default_factory=list)     # additional streams the run reads
    diagnostics: list[str] = Field(default_factory=list)


class RunContext(BaseModel):
    """The only things an entrypoint receives."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    install_id: str
    as_of: int
    bindings: dict[str, Binding]
    config: BaseModel
    extras: dict[str, Any]
    reader: Any
    writer: Any


class Procedure(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    entrypoint: str
    run: Callable[[RunContext], Any]
    config_model: type[BaseModel]
    bind: Optional[Callable[[BindContext], BindOutcome]] = None

    def parse_config(self, values: Optional[dict]) -> BaseModel:
        try:
            return self.config_model.model_validate(values or {})
        except ValidationError as e:
            raise InvalidArgumentError(f"Invalid app config: {e.error_count()} error(s)",
                                       details={"errors": e.errors(include_url=False, include_context=False)})


PROCEDURES: dict[str, Procedure] = {}


def procedure(entrypoint: str, config_model: type[BaseModel], bind=None):
    """Register a run function under an entrypoint id."""
    def decorator(fn):
        PROCEDURES[entrypoint] = Procedure(entrypoint=entrypoint, run=fn, config_model=config_model, bind=bind)
        return fn
    return decorator


def get_procedure(entrypoint: str) -> Procedure:
    if entrypoint not in PROCEDURES:
        raise InvalidArgumentError(f"Unknown entrypoint: {entrypoint}", details={"entrypoint": entrypoint})
    return PROCEDURES[entrypoint]


class AppStore:
    """
    Versioned application packages.

    Args:
        queries: Stored query store used to check discovery references
        root: Optional directory for the "apps" document
    """

    def __init__(self, queries, root: Optional[Path] = None):
        self.queries = queries
        self._docs = JsonStore(root) if root else None
        self._apps: dict[str, list[AppPackage]] = {}
        self._lock = threading.Lock()

    def register_app(self, package: Union[AppPackage, dict]) -> tuple[str, int]:
        """
        Validate and store the next version of a package.

        Raises:
            InvalidArgumentError: bad manifest or unknown entrypoint
            QueryValidationError: discovery query invalid
            NotFoundError: discovery references a missing stored query
        """
        if not isinstance(package, AppPackage):
            try:
                package = AppPackage.model_validate(package)
            except ValidationError as e:
                raise InvalidArgumentError(f"Invalid app package: {e.error_count()} error(s)",
                                           details={"errors": e.errors(include_url=False, include_context=False)})
        if not APP_ID.match(package.app_id):
            raise InvalidArgumentError(f"Invalid app id: {package.app_id!r}", details={"app_id": package.app_id})
        proc = get_procedure(package.entrypoint)

        if isinstance(package.discovery, StoredQueryRef):
            self.queries.get_query(package.discovery.query_id, package.discovery.version)
            discovery: Union[StoredQueryRef, dict] = package.discovery
        else:
            discovery = json.loads(canonical_json(parse_query(package.discovery)))

        with self._lock:
            versions = self._apps.setdefault(package.app_id, [])
            stored = package.model_copy(update={
                "version": len(versions) + 1,
                "discovery": discovery,
                "config_schema": package.config_schema or proc.config_model.model_json_schema(),
            })
            versions.append(stored)
            self._save()
        logger.info(f"Registered app {stored.app_id} v{stored.version} ({stored.entrypoint})")
        return stored.app_id, stored.version

    def get_app(self, app_id: str, version: Optional[int] = None) -> AppPackage:
        versions = self._apps.get(app_id)
        if not versions:
            raise NotFoundError(f"App not found: {app_id}", details={"app_id": app_id})
        if version is None:
            return versions[-1]
        if not 1 <= version <= len(versions):
            raise NotFoundError(f"App {app_id} has no version {version}", details={"app_id": app_id, "version": version})
        return versions[version - 1]

    def list_apps(self) -> list[AppPackage]:
        return [versions[-1] for _, versions in sorted(self._apps.items())]

    def _save(self) -> None:
        if self._docs is not None:
            self._docs.put("apps", {
                app_id: [p.model_dump(mode="json") for p in versions] for app_id, versions in self._apps.items()
            })

    def restore(self) -> None:
        if self._docs is None:
            return
        doc = self._docs.get("apps") or {}
        with self._lock:
            self._apps = {app_id: [AppPackage.model_validate(p) for p in versions] for app_id, versions in doc.items()}
        logger.info(f"Restored {len(self._apps)} apps")


def load_app_archive(path: Union[str, Path]) -> AppPackage:
    """
    Read a package archive: a zip holding manifest.json and discovery.briql.

    The discovery document replaces any "discovery" in the manifest.

    Raises:
        ParseError: unreadable archive or manifest
    """
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as archive:
            names = set(archive.namelist())
            if "manifest.json" not in names:
                raise ParseError(f"{path.name}: manifest.json missing", details={"archive": str(path)})
            manifest = json.loads(archive.read("manifest.json").decode("utf-8"))
            if "discovery.briql" in names:
                manifest["discovery"] = json.loads(canonical_json(parse_query(archive.read("discovery.briql"))))
    except (OSError, zipfile.BadZipFile, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"Cannot read app archive {path}: {e}", details={"archive": str(path)})
    try:
        return AppPackage.model_validate(manifest)
    except ValidationError as e:
        raise ParseError(f"Invalid manifest in {path.name}: {e.error_count()} error(s)",
                         details={"errors": e.errors(include_url=False, include_context=False)})
