#!/usr/bin/env python3
"""
Tests for the application lifecycle: package registration and versioning,
install-time discovery and binding, sandboxed runs and their results.

Test entrypoints are registered here under "test.*" ids.
"""

import json
import socket
import sys
import threading
import time
import zipfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest
from pydantic import BaseModel, Field

from brickyard.apps import AppService, load_app_archive, procedure
from brickyard.exceptions import (
    AuthorizationError,
    InvalidArgumentError,
    NotFoundError,
    ParseError,
    QueryValidationError,
    RunInProgressError,
    SandboxViolation,
)
from brickyard.platform import Platform
from brickyard.timeseries import Window
from conftest import LOCATION, fixture_text, make_config, publish_fixture

DAY = 1_704_067_200
H = "urn:fixture:hvac#"

OUTSIDE_AIR_QUERY = {
    "variables": [{
        "name": "ahu", "output": True, "brick_type": {"match": "isa", "type": "AHU"},
        "fetch": ["id", "pointinfo"],
        "fetch_points": [{"match": "tags", "tags": ["Outside", "Temperature", "Sensor"]}],
    }],
}


class TotalConfig(BaseModel):
    scale: float = Field(default=1.0, gt=0)


@procedure("test.totaliser", config_model=TotalConfig)
def totaliser(ctx):
    total, count = 0.0, 0
    for stream_id in ctx.reader.streams:
        t, v, _ = ctx.reader.arrays(stream_id)
        total += float(v.sum()) * ctx.config.scale
        count += len(t)
    ctx.writer.write("total", [{"t": ctx.as_of - 1, "v": total}])
    return {"total": total, "count": count, "streams": ctx.reader.streams}


@procedure("test.hostile", config_model=TotalConfig)
def hostile(ctx):
    try:
        ctx.reader.arrays("hvac/temp_142")
    except SandboxViolation:
        pass
    socket.create_connection(("192.0.2.1", 80), timeout=1)
    return {"escaped": True}


@procedure("test.foreign_write", config_model=TotalConfig)
def foreign_write(ctx):
    ctx.writer.append("hvac/ahu0_oa", [{"t": DAY, "v": 99.0}])


@procedure("test.crash", config_model=TotalConfig)
def crash(ctx):
    raise ValueError("division by lunch")


@procedure("test.slow", config_model=TotalConfig)
def slow(ctx):
    time.sleep(1.0)


STARTED, RELEASE = threading.Event(), threading.Event()


@procedure("test.blocking", config_model=TotalConfig)
def blocking(ctx):
    STARTED.set()
    RELEASE.wait(5)
    return {}


def package(app_id: str, entrypoint: str, discovery=None) -> dict:
    return {"app_id": app_id, "name": app_id.title(), "discovery": discovery or OUTSIDE_AIR_QUERY, "entrypoint": entrypoint}


def hvac_streams(platform, site_id: str, ahu1_owner=None) -> None:
    """Outside-air streams for both air handlers with a little data."""
    for stream_id, owner in (("hvac/ahu0_oa", site_id), ("hvac/ahu1_oa", ahu1_owner or site_id),
                             ("hvac/temp_142", site_id)):
        platform.create_stream("admin", {"stream_id": stream_id, "quantity_kind": "Temperature",
                                         "unit": "degC", "owner": owner})
    platform.append("admin", "hvac/ahu0_oa", [{"t": DAY, "v": 10.0}, {"t": DAY + 1800, "v": 12.0}])
    platform.append("admin", "hvac/ahu1_oa", [{"t": DAY, "v": 1.0}])


@pytest.fixture
def totaliser_install(platform, hvac_site):
    """A bound totaliser installation on the HVAC site."""
    _, site_id, _ = hvac_site
    hvac_streams(platform, site_id)
    platform.apps.register_app(package("totaliser", "test.totaliser"))
    return platform.app_service.install("admin", "totaliser", site_id)


# --- registration ---

def test_register_versions_and_schema(platform, hvac_site):
    """Re-registering yields the next version; the config schema defaults to the entrypoint's."""
    assert platform.apps.register_app(package("totaliser", "test.totaliser")) == ("totaliser", 1)
    assert platform.apps.register_app(package("totaliser", "test.totaliser")) == ("totaliser", 2)
    latest = platform.apps.get_app("totaliser")
    assert latest.version == 2
    assert "scale" in latest.config_schema["properties"]
    assert platform.apps.get_app("totaliser", 1).version == 1
    assert [a.app_id for a in platform.apps.list_apps()] == ["totaliser"]
    with pytest.raises(NotFoundError):
        platform.apps.get_app("totaliser", 3)


def test_register_rejects_bad_packages(platform, hvac_site):
    with pytest.raises(NotFoundError):
        platform.apps.register_app(package("dangling", "test.totaliser", {"query_id": "no-such-query"}))
    with pytest.raises(InvalidArgumentError):
        platform.apps.register_app(package("nowhere", "test.does_not_exist"))
    with pytest.raises(QueryValidationError):
        platform.apps.register_app(package("broken", "test.totaliser", {"variables": []}))
    with pytest.raises(InvalidArgumentError):
        platform.apps.register_app(package("bad id!", "test.totaliser"))
    assert platform.apps.list_apps() == []


def test_register_with_stored_query(platform, hvac_site):
    org_id, _, _ = hvac_site
    platform.briql.store_query("admin", OUTSIDE_AIR_QUERY, "outside-air", org_id)
    assert platform.apps.register_app(package("totaliser", "test.totaliser", {"query_id": "outside-air", "version": 1})) == ("totaliser", 1)


def test_load_app_archive(tmp_path):
    """A zip with manifest.json and a (repairable) discovery document."""
    archive = tmp_path / "totaliser.zip"
    with zipfile.ZipFile(archive, "w") as zf:
        zf.writestr("manifest.json", json.dumps({"app_id": "totaliser", "name": "Totaliser", "entrypoint": "test.totaliser",
                                                 "discovery": {}}))
        zf.writestr("discovery.briql", fixture_text("example.briql"))
    loaded = load_app_archive(archive)
    assert loaded.app_id == "totaliser"
    assert [v["name"] for v in loaded.discovery["variables"]] == ["ahu", "room"]

    (tmp_path / "junk.zip").write_bytes(b"not a zip")
    with pytest.raises(ParseError):
        load_app_archive(tmp_path / "junk.zip")


# --- install ---

def test_install_binds_readable_streams(totaliser_install):
    installation = totaliser_install
    assert installation.state == "bound"
    assert installation.bindings["ahu"].entities == [H + "ahu0", H + "ahu1"]
    assert installation.bindings["ahu"].streams == ["hvac/ahu0_oa", "hvac/ahu1_oa"]
    assert installation.streams == ["hvac/ahu0_oa", "hvac/ahu1_oa"]
    assert installation.model_id.endswith("@1")


def test_install_drops_unreadable_streams(platform, hvac_site):
    """A stream the installer cannot read is left out and named in the diagnostics."""
    _, site_id, _ = hvac_site
    hvac_streams(platform, site_id, ahu1_owner="platform")
    platform.directory.grant("admin", "alice", site_id, "reader")
    platform.apps.register_app(package("totaliser", "test.totaliser"))

    installation = platform.app_service.install("alice", "totaliser", site_id)
    assert installation.state == "bound"
    assert installation.streams == ["hvac/ahu0_oa"]
    assert any("hvac/ahu1_oa" in d for d in installation.diagnostics)


def test_install_failed_discovery(platform, hvac_site):
    """No electrical meter in an HVAC-only model: the installation records what was missing."""
    _, site_id, _ = hvac_site
    meters = {"variables": [{"name": "meter", "output": True,
                             "brick_type": {"match": "isa", "type": "Electrical_Meter"}}]}
    platform.apps.register_app(package("meters", "test.totaliser", meters))
    installation = platform.app_service.install("admin", "meters", site_id)
    assert installation.state == "failed-discovery"
    assert installation.extras["unmatched"] == ["meter"]
    assert "no match for: meter" in installation.diagnostics[0]
    with pytest.raises(InvalidArgumentError):
        platform.app_service.run("admin", installation.install_id, as_of=DAY)


def test_install_access_and_inputs(platform, hvac_site):
    org_id, site_id, _ = hvac_site
    platform.apps.register_app(package("totaliser", "test.totaliser"))
    with pytest.raises(AuthorizationError):
        platform.app_service.install("bob", "totaliser", site_id)
    with pytest.raises(AuthorizationError):
        platform.app_service.install("admin", "totaliser", org_id)
    with pytest.raises(InvalidArgumentError):
        platform.app_service.install("admin", "totaliser", site_id, config={"scale": -1})
    with pytest.raises(NotFoundError):
        platform.app_service.install("admin", "nothing", site_id)

    empty_site = platform.directory.create_site("admin", org_id, "Empty", LOCATION)
    with pytest.raises(NotFoundError):
        platform.app_service.install("admin", "totaliser", empty_site.site_id)


def test_installation_visibility(platform, totaliser_install):
    install_id = totaliser_install.install_id
    assert platform.app_service.get_installation("admin", install_id).install_id == install_id
    with pytest.raises(AuthorizationError) as info:
        platform.app_service.get_installation("bob", install_id)
    assert info.value.denied == [install_id]
    with pytest.raises(AuthorizationError) as unknown:
        platform.app_service.get_installation("admin", "inst-missing")
    assert unknown.value.denied == ["inst-missing"]
    assert platform.app_service.list_installations("bob") == []


# --- runs ---

def test_run_reads_only_before_as_of(platform, totaliser_install):
    """Observations at or after as_of are invisible; output goes under the install prefix."""
    service = platform.app_service
    install_id = totaliser_install.install_id
    with pytest.raises(NotFoundError):
        service.result("admin", install_id)

    early = service.run("admin", install_id, as_of=DAY + 1800)
    assert early.status == "ok"
    assert early.result["total"] == pytest.approx(11.0)
    assert early.result["count"] == 2
    assert early.outputs == [f"{install_id}/total"]
    assert platform.streams.get_meta(f"{install_id}/total").owner == totaliser_install.target

    late = service.run("admin", install_id, as_of=DAY + 3600)
    assert late.result["total"] == pytest.approx(23.0)
    assert late.run == 2
    assert service.result("admin", install_id) == late


def test_runs_are_deterministic(platform, totaliser_install):
    """The same inputs give the same result document, apart from the run counter."""
    service = platform.app_service
    first = service.run("admin", totaliser_install.install_id, as_of=DAY + 7200)
    second = service.run("admin", totaliser_install.install_id, as_of=DAY + 7200)
    assert first.model_dump(exclude={"run"}) == second.model_dump(exclude={"run"})


def test_hostile_entrypoint_is_contained(platform, totaliser_install):
    """Reading an unbound stream and opening a socket both surface as violations."""
    platform.apps.register_app(package("hostile", "test.hostile"))
    installation = platform.app_service.install("admin", "hostile", totaliser_install.target)
    result = platform.app_service.run("admin", installation.install_id, as_of=DAY + 3600)

    assert result.status == "sandbox_violation"
    assert result.result is None
    assert any("hvac/temp_142" in v for v in result.violations)
    assert any("network" in v for v in result.violations)
    assert len(result.violations) == 2


def test_foreign_write_is_a_violation(platform, totaliser_install):
    platform.apps.register_app(package("writer", "test.foreign_write"))
    installation = platform.app_service.install("admin", "writer", totaliser_install.target)
    result = platform.app_service.run("admin", installation.install_id, as_of=DAY + 3600)
    assert result.status == "sandbox_violation"
    assert platform.streams.read_window("hvac/ahu0_oa", Window(start=DAY, end=DAY + 86400))[0].v == 10.0


def test_crash_and_timeout_are_failures(platform, totaliser_install):
    service = platform.app_service
    platform.apps.register_app(package("crash", "test.crash"))
    crashed = service.run("admin", service.install("admin", "crash", totaliser_install.target).install_id, as_of=DAY)
    assert crashed.status == "failed"
    assert crashed.error["code"] == "entrypoint_failed"
    assert crashed.error["detail"]["exception"] == "ValueError"

    platform.apps.register_app(package("slow", "test.slow"))
    service.run_seconds = 0.2
    timed_out = service.run("admin", service.install("admin", "slow", totaliser_install.target).install_id, as_of=DAY)
    assert timed_out.status == "failed"
    assert timed_out.error["detail"]["timeout"] == 0.2


def test_one_run_at_a_time(platform, totaliser_install):
    service = platform.app_service
    platform.apps.register_app(package("blocking", "test.blocking"))
    install_id = service.install("admin", "blocking", totaliser_install.target).install_id
    results = []
    worker = threading.Thread(target=lambda: results.append(service.run("admin", install_id, as_of=DAY)))
    worker.start()
    try:
        assert STARTED.wait(5)
        with pytest.raises(RunInProgressError):
            service.run("admin", install_id, as_of=DAY)
    finally:
        RELEASE.set()
        worker.join(5)
    assert results[0].status == "ok"


def test_network_outside_sandbox_is_untouched():
    """The socket guard only bites inside sandbox threads."""
    from brickyard.apps import install_network_guard
    install_network_guard()
    with pytest.raises(OSError):
        socket.create_connection(("127.0.0.1", 9), timeout=0.5)


def test_installations_survive_restart(tmp_path):
    platform = Platform.open(make_config(tmp_path), persist=True)
    _, site_id, _ = publish_fixture(platform, "figure2_hvac.ttl", "HVAC")
    hvac_streams(platform, site_id)
    platform.apps.register_app(package("totaliser", "test.totaliser"))
    installation = platform.app_service.install("admin", "totaliser", site_id)
    first = platform.app_service.run("admin", installation.install_id, as_of=DAY + 3600)
    platform.flush()

    reopened = Platform.open(make_config(tmp_path), persist=True)
    assert reopened.app_service.get_installation("admin", installation.install_id).streams == installation.streams
    assert reopened.app_service.result("admin", installation.install_id) == first
    again = reopened.app_service.run("admin", installation.install_id, as_of=DAY + 3600)
    assert again.run == 2
    assert again.result == first.result
