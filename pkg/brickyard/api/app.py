"""
HTTP service: a thin adapter from routes to Platform operations.

Every route except /healthz is authenticated by middleware before the
request reaches a handler, so a missing token is rejected before any store
is touched. Bodies are read raw and validated by the library, which keeps
error codes identical to library calls. Responses are the library results
rendered with model_dump(mode="json", by_alias=True).
"""

import json
import socket
from contextlib import asynccontextmanager
from typing import Any, Optional

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ValidationError
from starlette.concurrency import run_in_threadpool

from ..briql.schemas import StoredQueryRef
from ..config import PlatformConfig
from ..exceptions import (
    AuthenticationError,
    InvalidArgumentError,
    PayloadError,
    PlatformError,
    QueryValidationError,
    ServiceStartError,
)
from ..logger import get_module_logger
from ..platform import Platform
from ..timeseries.models import Window, to_epoch

logger = get_module_logger("api.app")

OPEN_PATHS = {"/healthz"}


def render(value: Any) -> Any:
    """Library result → JSON-ready body."""
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json", by_alias=True)
    if isinstance(value, (list, tuple)):
        return [render(v) for v in value]
    if isinstance(value, dict):
        return {k: render(v) for k, v in value.items()}
    return value


def _bearer(authorization: Optional[str]) -> Optional[str]:
    if not authorization:
        return None
    parts = authorization.split()
    if len(parts) == 2 and parts[0].lower() == "bearer":
        return parts[1].strip()
    return None


async def _json_body(request: Request) -> Any:
    raw = await request.body()
    try:
        return json.loads(raw or b"{}")
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise PayloadError(f"Request body is not JSON: {e}")


def _field(body: dict, name: str, kind=str, required: bool = True, default=None):
    if not isinstance(body, dict):
        raise InvalidArgumentError("Request body must be a JSON object")
    if name not in body or body[name] is None:
        if required:
            raise InvalidArgumentError(f"Missing field: {name}", details={"path": f"$.{name}"})
        return default
    value = body[name]
    if kind is not None and not isinstance(value, kind):
        raise InvalidArgumentError(f"Field {name} has the wrong type", details={"path": f"$.{name}"})
    return value


def _window(start: Optional[str], end: Optional[str]) -> Window:
    if start is None or end is None:
        raise InvalidArgumentError("start and end are required", details={"start": start, "end": end})
    try:
        return Window(start=start, end=end)
    except ValidationError as e:
        raise InvalidArgumentError(f"Invalid window: {e.errors(include_url=False)[0]['msg']}",
                                   details={"start": start, "end": end})


def _model_id(target: str, version: Optional[int]) -> str:
    return f"{target}@{version}" if version is not None else target


def create_app(platform: Platform) -> FastAPI:
    """Routes over an opened Platform; shutdown flushes it."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        platform.flush()
        logger.info("Service stopped; state flushed")

    app = FastAPI(title="brickyard", lifespan=lifespan)
    app.state.platform = platform

    @app.middleware("http")
    async def authenticate(request: Request, call_next):
        if request.url.path not in OPEN_PATHS:
            try:
                request.state.principal = platform.authenticate(_bearer(request.headers.get("authorization")))
            except AuthenticationError as e:
                return JSONResponse(status_code=e.status, content=e.to_response())
        return await call_next(request)

    @app.exception_handler(PlatformError)
    async def platform_error(request: Request, exc: PlatformError):
        level = logger.error if exc.status >= 500 else logger.info
        level(f"{request.method} {request.url.path} -> {exc.code}: {exc.message}")
        return JSONResponse(status_code=exc.status, content=exc.to_response())

    @app.exception_handler(RequestValidationError)
    async def request_invalid(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        path = "$." + ".".join(str(p) for p in first.get("loc", ()))
        error = InvalidArgumentError(f"Invalid request: {first.get('msg', 'invalid')}", details={"path": path})
        return JSONResponse(status_code=error.status, content=error.to_response())

    def who(request: Request) -> str:
        return request.state.principal

    # --- health ---

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    # --- directory ---

    @app.post("/orgs")
    async def create_org(request: Request):
        body = await _json_body(request)
        return render(await run_in_threadpool(platform.directory.create_org, who(request), _field(body, "name")))

    @app.get("/orgs")
    async def list_orgs(request: Request):
        return render(platform.directory.list_orgs(who(request)))

    @app.post("/orgs/{org_id}/sites")
    async def create_site(org_id: str, request: Request):
        body = await _json_body(request)
        site = await run_in_threadpool(
            platform.directory.create_site, who(request), org_id, _field(body, "name"),
            _field(body, "location", dict), _field(body, "address", required=False, default=""),
            _field(body, "cadastral_ref", required=False),
        )
        return render(site)

    @app.get("/orgs/{org_id}/sites")
    async def list_sites(org_id: str, request: Request):
        return render(platform.directory.list_sites(who(request), org_id))

    @app.post("/sites/{site_id}/buildings")
    async def create_building(site_id: str, request: Request):
        body = await _json_body(request)
        return render(await run_in_threadpool(platform.directory.create_building, who(request), site_id,
                                              _field(body, "name")))

    @app.get("/sites/{site_id}/buildings")
    async def list_buildings(site_id: str, request: Request):
        return render(platform.directory.list_buildings(who(request), site_id))

    @app.post("/grants")
    async def grant(request: Request):
        body = await _json_body(request)
        return render(platform.directory.grant(who(request), _field(body, "grantee"), _field(body, "scope"),
                                               _field(body, "role")))

    # --- models ---

    @app.put("/targets/{target}/model/draft")
    async def upload_draft(target: str, request: Request):
        document = (await request.body()).decode("utf-8", errors="replace")
        return render(await run_in_threadpool(platform.directory.upload_draft, who(request), target, document))

    @app.get("/targets/{target}/model/versions")
    async def model_versions(target: str, request: Request):
        return render(platform.directory.model_versions(who(request), target))

    def _latest(principal: str, target: str, version: Optional[int]) -> str:
        if version is not None:
            return _model_id(target, version)
        versions = platform.directory.model_versions(principal, target)
        if not versions:
            raise InvalidArgumentError(f"{target} has no model versions", details={"target": target})
        return versions[-1].model_id

    @app.post("/targets/{target}/model/validate")
    async def validate_model(target: str, request: Request, version: Optional[int] = None):
        principal = who(request)
        model_id = _latest(principal, target, version)
        return render(await run_in_threadpool(platform.directory.validate_model, principal, model_id))

    @app.post("/targets/{target}/model/publish")
    async def publish_model(target: str, request: Request, version: Optional[int] = None):
        principal = who(request)
        model_id = _latest(principal, target, version)
        return render(await run_in_threadpool(platform.directory.publish_model, principal, model_id))

    # --- queries ---

    @app.post("/queries")
    async def store_query(request: Request):
        body = await _json_body(request)
        query_id, version = await run_in_threadpool(
            platform.briql.store_query, who(request), _field(body, "body", None), _field(body, "query_id"),
            _field(body, "org_id"),
        )
        return {"query_id": query_id, "version": version}

    @app.get("/queries/{query_id}")
    async def get_query(query_id: str, request: Request, version: Optional[int] = None):
        return render(platform.briql.get_query(query_id, version))

    @app.post("/queries:invoke")
    async def invoke(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise QueryValidationError("Invocation body must be a JSON object", reason="invalid_value")
        ref = body.get("query_ref")
        if ref is not None:
            try:
                query = StoredQueryRef.model_validate(ref)
            except ValidationError:
                raise QueryValidationError("Invalid query_ref", reason="invalid_value", path="$.query_ref")
        else:
            query = _field(body, "query", None)
        models = _field(body, "models", list)
        args = _field(body, "args", dict, required=False, default={})
        result = await run_in_threadpool(platform.briql.invoke, query, models, args, who(request))
        return render(result)

    @app.get("/entities/{entity_id:path}:describe")
    async def describe(entity_id: str, request: Request):
        models = request.query_params.getlist("model")
        return render(await run_in_threadpool(platform.briql.describe, entity_id, models, who(request)))

    # --- ingestion and streams ---

    @app.post("/mappings")
    async def add_mapping(request: Request):
        return render(platform.add_mapping(who(request), await _json_body(request)))

    @app.post("/ingest/dch-json")
    async def ingest_dch(request: Request):
        raw = await request.body()
        return render(await run_in_threadpool(platform.ingest_dch, who(request), raw))

    @app.post("/ingest/nem12")
    async def ingest_nem12(request: Request, stream: Optional[str] = None, utc_offset: float = 0.0):
        text = (await request.body()).decode("utf-8", errors="replace")
        return render(await run_in_threadpool(platform.ingest_nem12, who(request), text, stream, utc_offset))

    @app.post("/streams")
    async def create_stream(request: Request):
        return render(platform.create_stream(who(request), await _json_body(request)))

    @app.get("/streams")
    async def list_streams(request: Request):
        return render(platform.list_streams(who(request)))

    @app.get("/streams/{stream_id:path}/observations")
    async def read_stream(stream_id: str, request: Request, start: Optional[str] = None, end: Optional[str] = None,
                          bucket: Optional[int] = None, fn: str = "sum"):
        window = _window(start, end)
        return render(await run_in_threadpool(platform.read_stream, who(request), stream_id, window, bucket, fn))

    @app.post("/streams/{stream_id:path}/observations")
    async def append(stream_id: str, request: Request):
        body = await _json_body(request)
        observations = body.get("observations") if isinstance(body, dict) else body
        if not isinstance(observations, list):
            raise InvalidArgumentError("Expected a list of observations", details={"path": "$.observations"})
        return render(await run_in_threadpool(platform.append, who(request), stream_id, observations))

    @app.get("/streams/{stream_id:path}/health")
    async def stream_health(stream_id: str, request: Request, start: Optional[str] = None,
                            end: Optional[str] = None, now: Optional[int] = None):
        window = _window(start, end)
        return render(await run_in_threadpool(platform.stream_health, who(request), stream_id, window, now))

    # --- apps ---

    @app.post("/apps")
    async def register_app(request: Request):
        body = await _json_body(request)
        app_id, version = await run_in_threadpool(platform.apps.register_app, body)
        return {"app_id": app_id, "version": version}

    @app.get("/apps")
    async def list_apps(request: Request):
        return render(platform.apps.list_apps())

    @app.post("/apps/{app_id}/installs")
    async def install(app_id: str, request: Request):
        body = await _json_body(request)
        installation = await run_in_threadpool(
            platform.app_service.install, who(request), app_id, _field(body, "target"),
            _field(body, "config", dict, required=False, default={}),
            _field(body, "version", int, required=False),
        )
        return render(installation)

    @app.get("/installs/{install_id}")
    async def get_installation(install_id: str, request: Request):
        return render(platform.app_service.get_installation(who(request), install_id))

    @app.post("/installs/{install_id}:run")
    async def run(install_id: str, request: Request):
        body = await _json_body(request)
        as_of = _field(body, "as_of", (int, str), required=False)
        if isinstance(as_of, str):
            try:
                as_of = to_epoch(as_of)
            except ValueError:
                raise InvalidArgumentError(f"Invalid as_of: {as_of!r}", details={"path": "$.as_of"})
        return render(await run_in_threadpool(platform.app_service.run, who(request), install_id, as_of))

    @app.get("/installs/{install_id}/result")
    async def result(install_id: str, request: Request):
        return render(platform.app_service.result(who(request), install_id))

    return app


def _check_port(host: str, port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as e:
            raise ServiceStartError(f"Cannot bind {host}:{port}: {e}", details={"host": host, "port": port})


def serve(config: PlatformConfig) -> None:
    """Open the platform and serve until interrupted; shutdown flushes state."""
    try:
        platform = Platform.open(config)
    except OSError as e:
        raise ServiceStartError(f"Data directory {config.data_dir} is unusable: {e}",
                                details={"data_dir": str(config.data_dir)})
    _check_port(config.host, config.port)
    logger.info(f"Serving on http://{config.host}:{config.port}")
    uvicorn.run(create_app(platform), host=config.host, port=config.port, log_level=config.log_level.lower())
