"""
Application packaging, install-time binding and sandboxed execution.

Public API surface:
  - AppStore: register_app, get_app, list_apps
  - AppService: install, run, result, get_installation, list_installations
  - procedure / PROCEDURES: the entrypoint registry
  - load_app_archive: zip archive (manifest.json + discovery.briql) → AppPackage
  - Models: AppPackage, ResourceRequest, Installation, Binding, RunResult

Importing the package registers the reference M&V application ("mv.option_c").
"""

from .models import AppPackage, Binding, Installation, ResourceRequest, RunResult
from .registry import (
    PROCEDURES,
    AppStore,
    BindContext,
    BindOutcome,
    Procedure,
    RunContext,
    get_procedure,
    load_app_archive,
    procedure,
)
from .sandbox import StreamReader, StreamWriter, ViolationLog, install_network_guard, run_sandboxed
from .service import AppService
from . import mv  # noqa: F401  registers the reference entrypoint

__all__ = [
    "PROCEDURES",
    "AppPackage",
    "AppService",
    "AppStore",
    "BindContext",
    "BindOutcome",
    "Binding",
    "Installation",
    "Procedure",
    "ResourceRequest",
    "RunContext",
    "RunResult",
    "StreamReader",
    "StreamWriter",
    "ViolationLog",
    "get_procedure",
    "install_network_guard",
    "load_app_archive",
    "mv",
    "procedure",
    "run_sandboxed",
]
