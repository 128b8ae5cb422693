"""
Command-line client for the brickyard service.

Every subcommand is one HTTP call; results print as JSON on stdout and
errors print the service's error body on stderr.

Exit codes:
  0 ok            2 usage            3 validation (400/422)
  4 authorization (401/403, sandbox violation)
  5 not found     6 conflict or server-side failure     7 transport

Usage:
    brickyard --token T org create --name "Example org"
    brickyard --token T model upload --target site-1a2b3c4d --file fixtures/figure2_hvac.ttl
    brickyard --token T query invoke --file fixtures/example.briql --model site-1a2b3c4d
    brickyard --token T ingest nem12 --file fixtures/sample_nem12.csv --stream nmi-1
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional
from urllib.parse import quote

import httpx
from dotenv import load_dotenv

from ..apps.registry import load_app_archive

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_AUTH = 4
EXIT_NOT_FOUND = 5
EXIT_CONFLICT = 6
EXIT_TRANSPORT = 7

DEFAULT_URL = "http://127.0.0.1:8340"


def exit_code_for(status: int) -> int:
    if status in (400, 422):
        return EXIT_VALIDATION
    if status in (401, 403):
        return EXIT_AUTH
    if status == 404:
        return EXIT_NOT_FOUND
    return EXIT_CONFLICT


class CliFailure(Exception):
    def __init__(self, code: int, body: Any):
        super().__init__(str(body))
        self.code = code
        self.body = body


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": f"Cannot read {path}: {e}"}})


def _read_json(path: str) -> Any:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": f"{path} is not JSON: {e}"}})


def _pairs(items: Optional[list[str]]) -> dict[str, str]:
    result = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": f"Expected name=value, got {item!r}"}})
        result[name] = value
    return result


def _builtin_package(name: str) -> dict:
    from ..apps.mv import mv_package
    if name != "mv":
        raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": f"Unknown builtin app: {name}"}})
    return mv_package().model_dump(mode="json", by_alias=True)


def build_request(args: argparse.Namespace) -> tuple[str, str, dict]:
    """(method, path, httpx request kwargs) for a parsed command line."""
    cmd = (args.group, getattr(args, "action", None))

    if cmd == ("org", "create"):
        return "POST", "/orgs", {"json": {"name": args.name}}
    if cmd == ("org", "list"):
        return "GET", "/orgs", {}
    if cmd == ("site", "create"):
        body = {"name": args.name, "location": {"lat": args.lat, "lon": args.lon}, "address": args.address or "",
                "cadastral_ref": args.cadastral_ref}
        return "POST", f"/orgs/{quote(args.org, safe='')}/sites", {"json": body}
    if cmd == ("site", "list"):
        return "GET", f"/orgs/{quote(args.org, safe='')}/sites", {}
    if cmd == ("building", "create"):
        return "POST", f"/sites/{quote(args.site, safe='')}/buildings", {"json": {"name": args.name}}
    if cmd == ("building", "list"):
        return "GET", f"/sites/{quote(args.site, safe='')}/buildings", {}
    if cmd == ("grant", None):
        return "POST", "/grants", {"json": {"grantee": args.grantee, "scope": args.scope, "role": args.role}}

    if args.group == "model":
        if args.action == "describe":
            return "GET", f"/entities/{quote(args.entity, safe='')}:describe", {"params": [("model", m) for m in args.model]}
        target = quote(args.target, safe="")
        params = {"version": args.version} if getattr(args, "version", None) is not None else {}
        if args.action == "upload":
            return "PUT", f"/targets/{target}/model/draft", {
                "content": _read(args.file).encode("utf-8"), "headers": {"content-type": "text/turtle"}}
        if args.action == "versions":
            return "GET", f"/targets/{target}/model/versions", {}
        return "POST", f"/targets/{target}/model/{args.action}", {"params": params}

    if args.group == "query":
        if args.action == "store":
            return "POST", "/queries", {"json": {"query_id": args.id, "org_id": args.org, "body": _read(args.file)}}
        if args.action == "get":
            params = {"version": args.version} if args.version is not None else {}
            return "GET", f"/queries/{quote(args.id, safe='')}", {"params": params}
        body: dict = {"models": args.model, "args": _pairs(args.arg)}
        if args.ref:
            query_id, _, version = args.ref.partition("@")
            body["query_ref"] = {"query_id": query_id, "version": int(version) if version else None}
        elif args.file:
            body["query"] = _read(args.file)
        else:
            raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": "query invoke needs --file or --ref"}})
        return "POST", "/queries:invoke", {"json": body}

    if cmd == ("ingest", "dch-json"):
        return "POST", "/ingest/dch-json", {"content": _read(args.file).encode("utf-8"),
                                            "headers": {"content-type": "application/json"}}
    if cmd == ("ingest", "nem12"):
        params: dict = {"utc_offset": args.utc_offset}
        if args.stream:
            params["stream"] = args.stream
        return "POST", "/ingest/nem12", {"content": _read(args.file).encode("utf-8"), "params": params,
                                         "headers": {"content-type": "text/csv"}}
    if cmd == ("mapping", "add"):
        return "POST", "/mappings", {"json": {"gateway": args.gateway, "source": args.source,
                                              "stream_id": args.stream, "point": args.point}}

    if args.group == "stream":
        if args.action == "create":
            body = {"stream_id": args.id, "quantity_kind": args.quantity_kind, "unit": args.unit,
                    "owner": args.owner, "expected_interval": args.interval, "point": args.point}
            return "POST", "/streams", {"json": body}
        if args.action == "list":
            return "GET", "/streams", {}
        stream = quote(args.id, safe="/")
        if args.action == "append":
            return "POST", f"/streams/{stream}/observations", {"json": {"observations": _read_json(args.file)}}
        params = {"start": args.start, "end": args.end}
        if args.action == "read":
            if args.bucket:
                params.update({"bucket": args.bucket, "fn": args.fn})
            return "GET", f"/streams/{stream}/observations", {"params": params}
        if args.now is not None:
            params["now"] = args.now
        return "GET", f"/streams/{stream}/health", {"params": params}

    if args.group == "app":
        if args.action == "register":
            if args.builtin:
                package = _builtin_package(args.builtin)
            elif args.file and args.file.endswith(".zip"):
                package = load_app_archive(args.file).model_dump(mode="json", by_alias=True)
            elif args.file:
                package = _read_json(args.file)
            else:
                raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": "app register needs --file or --builtin"}})
            return "POST", "/apps", {"json": package}
        if args.action == "list":
            return "GET", "/apps", {}
        if args.action == "install":
            body = {"target": args.target, "config": _read_json(args.config_file) if args.config_file else {},
                    "version": args.version}
            return "POST", f"/apps/{quote(args.app, safe='')}/installs", {"json": body}
        install = quote(args.install, safe="")
        if args.action == "run":
            return "POST", f"/installs/{install}:run", {"json": {"as_of": args.as_of}}
        return "GET", f"/installs/{install}/result", {}

    raise CliFailure(EXIT_USAGE, {"error": {"code": "usage", "message": "unknown command"}})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brickyard", description="brickyard platform client")
    parser.add_argument("--url", default=None, help=f"Service URL (default: $BRICKYARD_URL or {DEFAULT_URL})")
    parser.add_argument("--token", default=None, help="Bearer token (default: $BRICKYARD_TOKEN)")
    groups = parser.add_subparsers(dest="group", required=True)

    serve = groups.add_parser("serve", help="Run the service")
    serve.add_argument("--config", help="JSON config file (default: $BRICKYARD_CONFIG)")

    def actions(name: str, help_text: str):
        sub = groups.add_parser(name, help=help_text)
        return sub.add_subparsers(dest="action", required=True)

    org = actions("org", "Organisations")
    org.add_parser("create").add_argument("--name", required=True)
    org.add_parser("list")

    site = actions("site", "Sites")
    p = site.add_parser("create")
    p.add_argument("--org", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--address")
    p.add_argument("--cadastral-ref")
    site.add_parser("list").add_argument("--org", required=True)

    building = actions("building", "Buildings")
    p = building.add_parser("create")
    p.add_argument("--site", required=True)
    p.add_argument("--name", required=True)
    building.add_parser("list").add_argument("--site", required=True)

    p = groups.add_parser("grant", help="Grant a role on a scope")
    p.add_argument("--grantee", required=True)
    p.add_argument("--scope", required=True)
    p.add_argument("--role", required=True, choices=["reader", "modeler", "admin"])

    model = actions("model", "Model lifecycle")
    p = model.add_parser("upload")
    p.add_argument("--target", required=True)
    p.add_argument("--file", required=True)
    for name in ("validate", "publish"):
        p = model.add_parser(name)
        p.add_argument("--target", required=True)
        p.add_argument("--version", type=int)
    model.add_parser("versions").add_argument("--target", required=True)
    p = model.add_parser("describe")
    p.add_argument("--entity", required=True)
    p.add_argument("--model", action="append", required=True)

    query = actions("query", "BRIQL queries")
    p = query.add_parser("store")
    p.add_argument("--id", required=True)
    p.add_argument("--org", required=True)
    p.add_argument("--file", required=True)
    p = query.add_parser("get")
    p.add_argument("--id", required=True)
    p.add_argument("--version", type=int)
    p = query.add_parser("invoke")
    p.add_argument("--file")
    p.add_argument("--ref", help="Stored query as ID or ID@VERSION")
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--arg", action="append", help="variable=entity IRI")

    ingest = actions("ingest", "Data ingestion")
    ingest.add_parser("dch-json").add_argument("--file", required=True)
    p = ingest.add_parser("nem12")
    p.add_argument("--file", required=True)
    p.add_argument("--stream")
    p.add_argument("--utc-offset", type=float, default=0.0)

    mapping = actions("mapping", "Source point mappings")
    p = mapping.add_parser("add")
    p.add_argument("--gateway", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--point")

    stream = actions("stream", "Time series")
    p = stream.add_parser("create")
    p.add_argument("--id", required=True)
    p.add_argument("--quantity-kind", required=True)
    p.add_argument("--unit", required=True)
    p.add_argument("--owner")
    p.add_argument("--interval", type=int)
    p.add_argument("--point")
    stream.add_parser("list")
    p = stream.add_parser("append")
    p.add_argument("--id", required=True)
    p.add_argument("--file", required=True, help="JSON list of observations")
    for name in ("read", "health"):
        p = stream.add_parser(name)
        p.add_argument("--id", required=True)
        p.add_argument("--start", required=True)
        p.add_argument("--end", required=True)
        if name == "read":
            p.add_argument("--bucket", type=int)
            p.add_argument("--fn", default="sum")
        else:
            p.add_argument("--now", type=int)

    app = actions("app", "Applications")
    p = app.add_parser("register")
    p.add_argument("--file", help="manifest.json or package .zip")
    p.add_argument("--builtin", help="Bundled application (mv)")
    app.add_parser("list")
    p = app.add_parser("install")
    p.add_argument("--app", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config-file")
    p.add_argument("--version", type=int)
    p = app.add_parser("run")
    p.add_argument("--install", required=True)
    p.add_argument("--as-of", type=int)
    app.add_parser("result").add_argument("--install", required=True)

    return parser


def _emit(stream, value: Any) -> None:
    print(json.dumps(value, indent=2, sort_keys=True, ensure_ascii=False), file=stream)


def _serve(config_path: Optional[str]) -> int:
    from ..config import load_config
    from ..exceptions import PlatformError
    from .app import serve

    try:
        serve(load_config(config_path))
    except PlatformError as e:
        _emit(sys.stderr, e.to_response())
        return EXIT_CONFLICT if e.status >= 500 else EXIT_VALIDATION
    return EXIT_OK


def main(argv: Optional[list[str]] = None, client: Optional[httpx.Client] = None,
         stdout=None, stderr=None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments (default: sys.argv[1:])
        client: HTTP client to use (tests pass a TestClient); built from --url otherwise
        stdout / stderr: Output streams
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    if args.group == "serve":
        return _serve(args.config)

    token = args.token or os.environ.get("BRICKYARD_TOKEN")
    headers = {"authorization": f"Bearer {token}"} if token else {}
    try:
        method, path, kwargs = build_request(args)
    except CliFailure as e:
        _emit(stderr, e.body)
        return e.code
    except Exception as e:         # archive / query errors raised while packing locally
        body = e.to_response() if hasattr(e, "to_response") else {"error": {"code": "usage", "message": str(e)}}
        _emit(stderr, body)
        return exit_code_for(getattr(e, "status", 400))

    kwargs.setdefault("headers", {}).update(headers)
    own_client = client is None
    if own_client:
        client = httpx.Client(base_url=args.url or os.environ.get("BRICKYARD_URL", DEFAULT_URL), timeout=600.0)
    try:
        response = client.request(method, path, **kwargs)
    except httpx.TransportError as e:
        _emit(stderr, {"error": {"code": "transport", "message": str(e)}})
        return EXIT_TRANSPORT
    finally:
        if own_client:
            client.close()

    try:
        body = response.json()
    except ValueError:
        body = {"error": {"code": "transport", "message": response.text[:500]}}
        _emit(stderr, body)
        return EXIT_TRANSPORT

    if response.status_code >= 400:
        _emit(stderr, body)
        return exit_code_for(response.status_code)
    _emit(stdout, body)
    if (args.group, getattr(args, "action", None)) == ("app", "run") and isinstance(body, dict):
        return {"ok": EXIT_OK, "sandbox_violation": EXIT_AUTH}.get(body.get("status"), EXIT_CONFLICT)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
