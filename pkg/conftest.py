"""
Shared pytest fixtures.

Platforms are memory-only unless a test asks for tmp_path persistence.
Principals: "admin" holds admin on the platform scope; "alice" and "bob"
start with no grants.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from brickyard.config import GrantSpec, PlatformConfig
from brickyard.graph import GraphStore, default_ontology
from brickyard.platform import Platform

FIXTURES = Path(__file__).parent / "fixtures"

TOKENS = {"tok-admin": "admin", "tok-alice": "alice", "tok-bob": "bob"}
LOCATION = {"lat": -33.87, "lon": 151.21}


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def make_config(data_dir, **overrides) -> PlatformConfig:
    values = {
        "data_dir": data_dir,
        "tokens": dict(TOKENS),
        "bootstrap_grants": {"admin": [GrantSpec(scope="platform", role="admin")]},
    }
    values.update(overrides)
    return PlatformConfig(**values)


@pytest.fixture(scope="session")
def ontology():
    return default_ontology()


@pytest.fixture
def graphs(ontology):
    return GraphStore(ontology)


@pytest.fixture
def platform(tmp_path):
    return Platform.open(make_config(tmp_path), persist=False)


def publish_fixture(platform: Platform, fixture: str, site_name: str = "Campus", org_id=None):
    """Create an org (unless given) and site, upload and publish a fixture model; returns (org_id, site_id, version)."""
    directory = platform.directory
    if org_id is None:
        org_id = directory.create_org("admin", f"Org for {site_name}").org_id
    site = directory.create_site("admin", org_id, site_name, LOCATION)
    draft = directory.upload_draft("admin", site.site_id, fixture_text(fixture))
    version = directory.publish_model("admin", draft.model_id)
    return org_id, site.site_id, version


@pytest.fixture
def hvac_site(platform):
    """Figure-2 HVAC model published on a fresh site."""
    return publish_fixture(platform, "figure2_hvac.ttl", "HVAC site")


@pytest.fixture
def metering_site(platform):
    """Figure-4 metering model published on a fresh site."""
    return publish_fixture(platform, "figure4_metering.ttl", "Metering campus")
