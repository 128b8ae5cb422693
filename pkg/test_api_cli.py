#!/usr/bin/env python3
"""
Tests for the HTTP service and the command-line client.

The CLI is driven through main() with a TestClient standing in for the
network, so every command exercises the real routes.
"""

import io
import json
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest
from fastapi.testclient import TestClient

from brickyard import Platform
from brickyard.api import create_app, exit_code_for, main, render
from brickyard.config import load_config
from brickyard.exceptions import InvalidArgumentError
from brickyard.timeseries import Window
from conftest import FIXTURES

T0 = 1_704_067_200
DAY = 86400


@pytest.fixture
def client(platform):
    return TestClient(create_app(platform))


def auth(token: str = "tok-admin") -> dict:
    return {"authorization": f"Bearer {token}"}


def cli(client, *argv, token="tok-admin"):
    """Run one CLI command; returns (exit code, stdout JSON, stderr JSON)."""
    out, err = io.StringIO(), io.StringIO()
    code = main(["--token", token, *argv], client=client, stdout=out, stderr=err)
    parse = lambda s: json.loads(s) if s.strip() else None   # noqa: E731
    return code, parse(out.getvalue()), parse(err.getvalue())


def new_site(client, name="HVAC site") -> tuple[str, str]:
    _, org, _ = cli(client, "org", "create", "--name", f"Org for {name}")
    _, site, _ = cli(client, "site", "create", "--org", org["org_id"], "--name", name,
                     "--lat", "-33.87", "--lon", "151.21")
    return org["org_id"], site["site_id"]


def publish(client, site_id: str, fixture: str) -> None:
    code, _, err = cli(client, "model", "upload", "--target", site_id, "--file", str(FIXTURES / fixture))
    assert code == 0, err
    code, _, err = cli(client, "model", "publish", "--target", site_id)
    assert code == 0, err


# --- HTTP surface ---

def test_healthz_is_open(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


@pytest.mark.parametrize("headers", [{}, auth("tok-nobody"), {"authorization": "Basic tok-admin"}])
def test_missing_or_unknown_token(client, headers):
    response = client.get("/orgs", headers=headers)
    assert response.status_code == 401
    assert response.json()["error"]["code"] == "unauthenticated"


def test_invalid_query_reports_path(client):
    _, site_id = new_site(client)
    variable = {"name": "a", "colour": "red", "brick_type": {"match": "isa", "type": "AHU"}}
    body = {"query": {"variables": [variable]}, "models": [site_id]}
    response = client.post("/queries:invoke", json=body, headers=auth())
    assert response.status_code == 400
    error = response.json()["error"]
    assert error["code"] == "query_invalid"
    assert error["detail"]["reason"] == "unknown_key"
    assert error["detail"]["path"] == "$.variables[0].colour"


def test_malformed_bodies(client):
    response = client.post("/orgs", content=b"{not json", headers=auth())
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "payload_invalid"

    response = client.post("/orgs", json={"title": "x"}, headers=auth())
    assert response.status_code == 400
    assert response.json()["error"]["detail"]["path"] == "$.name"


def test_stream_routes(client):
    _, site_id = new_site(client)
    created = client.post("/streams", json={"stream_id": "site/oat", "quantity_kind": "Temperature",
                                            "unit": "degC", "owner": site_id}, headers=auth())
    assert created.status_code == 200
    report = client.post("/streams/site/oat/observations", headers=auth(),
                         json={"observations": [{"t": T0, "v": 20.0}, {"t": T0 + 60, "v": 21.0}]})
    assert report.json()["inserted"] == 2

    read = client.get("/streams/site/oat/observations", headers=auth(),
                      params={"start": "2024-01-01T00:00:00Z", "end": str(T0 + 3600)})
    assert [o["v"] for o in read.json()] == [20.0, 21.0]
    assert client.get("/streams/site/oat/observations", headers=auth(),
                      params={"start": T0 + 10, "end": T0}).status_code == 400
    assert client.get("/streams/site/oat/observations", headers=auth("tok-bob"),
                      params={"start": T0, "end": T0 + 60}).status_code == 403


def test_render_models_and_containers():
    window = Window(start=T0, end=T0 + 1)
    assert render({"w": [window]}) == {"w": [{"start": T0, "end": T0 + 1}]}


@pytest.mark.parametrize("status, code", [(400, 3), (422, 3), (401, 4), (403, 4), (404, 5), (409, 6),
                                          (429, 6), (500, 6)])
def test_exit_codes(status, code):
    assert exit_code_for(status) == code


# --- CLI ---

def test_cli_query_on_published_model(client):
    _, site_id = new_site(client)
    publish(client, site_id, "figure2_hvac.ttl")

    code, body, _ = cli(client, "query", "invoke", "--file", str(FIXTURES / "example.briql"), "--model", site_id)
    assert code == 0
    assert len(body["solutions"]) == 2
    assert body["columns"] == ["ahu", "room"]


def test_cli_stored_query_and_describe(client):
    org_id, site_id = new_site(client)
    publish(client, site_id, "figure2_hvac.ttl")
    code, stored, _ = cli(client, "query", "store", "--id", "ahu-rooms", "--org", org_id,
                          "--file", str(FIXTURES / "example.briql"))
    assert (code, stored) == (0, {"query_id": "ahu-rooms", "version": 1})

    code, body, _ = cli(client, "query", "invoke", "--ref", "ahu-rooms@1", "--model", site_id,
                        "--arg", "ahu=urn:fixture:hvac#ahu1")
    assert code == 0
    assert len(body["solutions"]) == 1

    code, described, _ = cli(client, "model", "describe", "--entity", "urn:fixture:hvac#ahu0", "--model", site_id)
    assert code == 0
    assert described["id"] == "urn:fixture:hvac#ahu0"


def test_cli_publish_refused(client, tmp_path):
    _, site_id = new_site(client)
    draft = tmp_path / "bad.ttl"
    draft.write_text("@prefix : <urn:x#> .\n:thing a brick:Flux_Capacitor .\n", encoding="utf-8")
    assert cli(client, "model", "upload", "--target", site_id, "--file", str(draft))[0] == 0

    code, out, err = cli(client, "model", "publish", "--target", site_id)
    assert code == 3
    assert out is None
    assert err["error"]["code"] == "validation_failed"
    assert err["error"]["detail"]["findings"][0]["code"] == "unknown_class"


def test_cli_access_and_lookup_failures(client):
    org_id, _ = new_site(client)
    code, _, err = cli(client, "site", "create", "--org", org_id, "--name", "x", "--lat", "0", "--lon", "0",
                       token="tok-bob")
    assert code == 4
    assert err["error"]["code"] == "forbidden"
    assert cli(client, "org", "list", token="tok-bob")[1] == []
    assert cli(client, "query", "get", "--id", "no-such-query")[0] == 5
    assert cli(client, "query", "invoke", "--model", "x")[0] == 2
    assert cli(client, "stream", "append", "--id", "s", "--file", "/nonexistent.json")[0] == 2


def test_cli_transport_failure():
    err = io.StringIO()
    code = main(["--url", "http://127.0.0.1:9", "--token", "t", "org", "list"], stdout=io.StringIO(), stderr=err)
    assert code == 7
    assert json.loads(err.getvalue())["error"]["code"] == "transport"


def test_cli_nem12_ingest(client):
    _, site_id = new_site(client)
    code, _, _ = cli(client, "stream", "create", "--id", "nem/e1", "--quantity-kind", "Energy", "--unit", "kWh",
                     "--owner", site_id, "--interval", "1800")
    assert code == 0
    code, report, _ = cli(client, "ingest", "nem12", "--file", str(FIXTURES / "sample_nem12.csv"),
                          "--stream", "nem/e1")
    assert code == 0
    assert report["ingested"] == 96

    code, buckets, _ = cli(client, "stream", "read", "--id", "nem/e1", "--start", str(T0),
                           "--end", str(T0 + 2 * DAY), "--bucket", str(DAY))
    assert [b["value"] for b in buckets] == [pytest.approx(114.0), pytest.approx(93.0)]


def test_cli_savings_end_to_end(client, tmp_path):
    """Publish the metering model, load daily data, install and run the bundled M&V app."""
    _, site_id = new_site(client, "Metering campus")
    publish(client, site_id, "figure4_metering.ttl")

    baseline_days, analysis_days = 35, 5
    switch = T0 + baseline_days * DAY
    end = switch + analysis_days * DAY
    series = {"metering/site_oat": [], "metering/supply_1_kwh": [], "metering/supply_2_kwh": [],
              "metering/b060g_kwh": []}
    for day in range(baseline_days + analysis_days):
        t = T0 + day * DAY
        temperature = 5.0 + day % 20
        load = 100.0 + 4.0 * max(0.0, 15.0 - temperature) - (10.0 if t >= switch else 0.0)
        series["metering/site_oat"].append({"t": t, "v": temperature})
        series["metering/supply_1_kwh"].append({"t": t, "v": load})
        series["metering/supply_2_kwh"].append({"t": t, "v": 24.0})
        series["metering/b060g_kwh"].append({"t": t, "v": 12.0})

    for stream_id, observations in series.items():
        kind, unit = ("Temperature", "degC") if stream_id.endswith("oat") else ("Energy", "kWh")
        assert cli(client, "stream", "create", "--id", stream_id, "--quantity-kind", kind, "--unit", unit,
                   "--owner", site_id, "--interval", str(DAY))[0] == 0
        data = tmp_path / f"{stream_id.replace('/', '_')}.json"
        data.write_text(json.dumps(observations), encoding="utf-8")
        assert cli(client, "stream", "append", "--id", stream_id, "--file", str(data))[0] == 0

    code, registered, _ = cli(client, "app", "register", "--builtin", "mv")
    assert code == 0
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"baseline": {"start": T0, "end": switch},
                                  "analysis": {"start": switch, "end": end}}), encoding="utf-8")
    code, installation, err = cli(client, "app", "install", "--app", registered["app_id"], "--target", site_id,
                                  "--config-file", str(config))
    assert code == 0, err
    assert installation["state"] == "bound"

    code, run, _ = cli(client, "app", "run", "--install", installation["install_id"], "--as-of", str(end))
    assert code == 0, run
    assert run["result"]["savings_kwh"] == pytest.approx(50.0, abs=1e-6)
    assert run["result"]["baseline_days"] == baseline_days

    code, latest, _ = cli(client, "app", "result", "--install", installation["install_id"])
    assert (code, latest) == (0, run)
    assert cli(client, "app", "result", "--install", installation["install_id"], token="tok-bob")[0] == 4


# --- configuration ---

def test_config_file_then_environment(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"port": 9000, "tokens": {"a": "alice"}, "max_bindings": 10}), encoding="utf-8")
    config = load_config(path, env={"BRICKYARD_PORT": "9100", "BRICKYARD_MAX_QUERY_SECONDS": "2.5"})
    assert (config.port, config.max_bindings, config.max_query_seconds) == (9100, 10, 2.5)
    assert config.tokens == {"a": "alice"}

    by_env = load_config(env={"BRICKYARD_CONFIG": str(path)})
    assert by_env.port == 9000
    assert by_env.log_file is None
    assert load_config(env={"BRICKYARD_LOG_FILE": str(tmp_path / "b.log")}).log_file == tmp_path / "b.log"


@pytest.mark.parametrize("env", [
    {"BRICKYARD_PORT": "eighty"},
    {"BRICKYARD_PORT": "70000"},
    {"BRICKYARD_TOKENS": "{not json"},
    {"BRICKYARD_CONFIG": "/nonexistent/brickyard.json"},
])
def test_config_errors(env):
    with pytest.raises(InvalidArgumentError):
        load_config(env=env)


def test_log_file_receives_platform_events(tmp_path):
    log_path = tmp_path / "brickyard.log"
    config = load_config(env={"BRICKYARD_LOG_FILE": str(log_path), "BRICKYARD_DATA_DIR": str(tmp_path / "data")})
    Platform.open(config, persist=False)
    root = logging.getLogger("brickyard")
    try:
        for handler in root.handlers:
            handler.flush()
        assert "Platform open" in log_path.read_text(encoding="utf-8")
    finally:
        for handler in [h for h in root.handlers if isinstance(h, logging.FileHandler)]:
            root.removeHandler(handler)
            handler.close()
