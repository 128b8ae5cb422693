#!/usr/bin/env python3
"""
Tests for ingestion: the NEM12 reader, DCH JSON payloads, point mapping
with unmapped reporting, and the data-health checks.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from brickyard.exceptions import AuthorizationError, DuplicateError, InvalidArgumentError, Nem12Error, PayloadError
from brickyard.ingestion import HealthPolicy, parse_dch_payload, parse_nem12, run_health_checks, serialize_dch_payload
from brickyard.timeseries import TimeseriesStore, Window
from conftest import fixture_text

DAY = 1_704_067_200          # 2024-01-01T00:00:00Z
HALF_HOUR = 1800
H = "urn:fixture:hvac#"

HEADER = "100,NEM12,202401031200,MDPUSER,RETAILER\n"


def nem12_channel(suffix: str, values: list[float], date: str = "20240101", quality: str = "A") -> str:
    cells = ",".join(f"{v:.3f}" for v in values)
    return (f"200,6001234567,E1,E1,{suffix},N1,MTR0001,KWH,30,20240201\n"
            f"300,{date},{cells},{quality},,,20240102083000,20240102090000\n")


# --- NEM12 ---

def test_sample_document_parses():
    """Two days of half-hourly kWh: 96 observations with per-day quality."""
    result = parse_nem12(fixture_text("sample_nem12.csv"))
    assert result.header.sender == "MDPUSER"
    assert len(result.channels) == 1
    channel = result.channels[0]
    assert channel.source_name == "6001234567/E1"
    assert channel.quantity == ("Energy", "kWh")
    assert result.observation_count == 96
    assert channel.observations[0].t == DAY
    assert channel.observations[1].t == DAY + HALF_HOUR
    assert {o.q for o in channel.observations[:48]} == {"actual"}
    assert {o.q for o in channel.observations[48:]} == {"substituted"}
    assert sum(o.v for o in channel.observations[:48]) == pytest.approx(114.0)
    assert sum(o.v for o in channel.observations[48:]) == pytest.approx(93.0)


def test_site_offset_shifts_to_utc():
    """Local midnight at UTC+10 is 14:00 UTC the day before."""
    result = parse_nem12(fixture_text("sample_nem12.csv"), site_utc_offset=10)
    assert result.channels[0].observations[0].t == DAY - 10 * 3600


def test_value_count_must_match_interval():
    text = HEADER + nem12_channel("E1", [1.0] * 47) + "900\n"
    with pytest.raises(Nem12Error) as info:
        parse_nem12(text)
    assert info.value.line == 3
    assert info.value.details["found"] == 47
    assert info.value.details["expected"] == 48


@pytest.mark.parametrize("text, line", [
    (HEADER + nem12_channel("E1", [1.0] * 48) + "400,1,48,F14,76,,\n900\n", 4),
    (HEADER + "300,20240101," + ",".join(["1"] * 48) + ",A,,,,\n900\n", 2),
    ("200,6001234567,E1,E1,E1,N1,MTR0001,KWH,30,20240201\n900\n", 1),
    (HEADER + nem12_channel("E1", [1.0] * 48, quality="Z") + "900\n", 3),
    (HEADER + nem12_channel("E1", [1.0] * 48) + "900\n100,NEM12,1,2,3\n", 5),
])
def test_grammar_violations_are_line_numbered(text, line):
    with pytest.raises(Nem12Error) as info:
        parse_nem12(text)
    assert info.value.line == line


def test_missing_end_record():
    with pytest.raises(Nem12Error):
        parse_nem12(HEADER + nem12_channel("E1", [1.0] * 48))


# --- platform ingestion ---

def nem_stream(platform, site_id: str, stream_id: str = "nem/e1") -> str:
    platform.create_stream("admin", {"stream_id": stream_id, "quantity_kind": "Energy", "unit": "kWh",
                                     "expected_interval": HALF_HOUR, "owner": site_id})
    return stream_id


def test_nem12_into_named_stream(platform, hvac_site):
    """A single-channel document lands in the named stream; re-sending replaces."""
    _, site_id, _ = hvac_site
    sid = nem_stream(platform, site_id)
    report = platform.ingest_nem12("admin", fixture_text("sample_nem12.csv"), stream_id=sid)
    assert (report.ingested, report.inserted, report.replaced) == (96, 96, 0)

    daily = platform.read_stream("admin", sid, Window(start=DAY, end=DAY + 2 * 86400), bucket_seconds=86400)
    assert [b.value for b in daily] == [pytest.approx(114.0), pytest.approx(93.0)]

    again = platform.ingest_nem12("admin", fixture_text("sample_nem12.csv"), stream_id=sid)
    assert (again.ingested, again.inserted, again.replaced) == (96, 0, 96)


def test_nem12_multi_channel_needs_mapping(platform, hvac_site):
    _, site_id, _ = hvac_site
    sid = nem_stream(platform, site_id)
    text = HEADER + nem12_channel("E1", [1.0] * 48) + nem12_channel("B1", [0.5] * 48) + "900\n"
    with pytest.raises(InvalidArgumentError):
        platform.ingest_nem12("admin", text, stream_id=sid)

    platform.add_mapping("admin", {"gateway": "nem12", "source": "6001234567/E1", "stream_id": sid})
    report = platform.ingest_nem12("admin", text)
    assert report.ingested == 48
    assert report.unmapped == ["6001234567/B1"]
    assert report.unmapped_observations == 48


def test_ingest_requires_modeler_on_target_stream(platform, hvac_site):
    _, site_id, _ = hvac_site
    sid = nem_stream(platform, site_id)
    platform.directory.grant("admin", "alice", site_id, "reader")
    with pytest.raises(AuthorizationError):
        platform.ingest_nem12("alice", fixture_text("sample_nem12.csv"), stream_id=sid)
    assert platform.read_stream("admin", sid, Window(start=DAY, end=DAY + 2 * 86400)) == []


# --- DCH JSON ---

PAYLOAD = {
    "gateway": "gw-01",
    "points": [
        {"name": "AHU-0 OAT", "observations": [
            {"t": "2024-01-01T00:00:00Z", "v": 21.5},
            {"t": "2024-01-01T10:30:00+10:00", "v": 21.75, "q": "suspect"},
        ]},
        {"name": "Unknown sensor", "observations": [{"t": "2024-01-01T00:00:00Z", "v": 1.0}]},
    ],
}


@pytest.mark.parametrize("document, path", [
    ({"gateway": "gw", "points": [{"name": "x", "observations": [{"t": "2024-01-01T00:00:00", "v": 1}]}]},
     "$.points[0].observations[0].t"),
    ({"gateway": "gw", "points": [{"name": "x", "unit": "degC"}]}, "$.points[0].unit"),
    ({"gateway": "gw", "points": [{"name": "x", "observations": [{"t": "2024-01-01T00:00:00Z", "v": "inf"}]}]},
     "$.points[0].observations[0].v"),
    ({"points": []}, "$.gateway"),
])
def test_payload_errors_carry_paths(document, path):
    with pytest.raises(PayloadError) as info:
        parse_dch_payload(document)
    assert info.value.path == path


def test_payload_malformed_json():
    with pytest.raises(PayloadError) as info:
        parse_dch_payload('{"gateway": "gw", ')
    assert "line" in info.value.details


def test_payload_serialization_is_canonical():
    payload = parse_dch_payload(PAYLOAD)
    text = serialize_dch_payload(payload)
    assert parse_dch_payload(text) == payload
    assert '"t":"2024-01-01T00:30:00Z"' in text


def test_dch_ingest_maps_and_reports(platform, hvac_site):
    """Mapped points are stored and bound to their model point; the rest are reported."""
    _, site_id, _ = hvac_site
    platform.create_stream("admin", {"stream_id": "hvac/ahu0_oa", "quantity_kind": "Temperature",
                                     "unit": "degC", "owner": site_id})
    platform.add_mapping("admin", {"gateway": "gw-01", "source": "AHU-0 OAT", "stream_id": "hvac/ahu0_oa",
                                   "point": H + "ahu0_oa"})
    with pytest.raises(DuplicateError):
        platform.add_mapping("admin", {"gateway": "gw-01", "source": "AHU-0 OAT", "stream_id": "hvac/ahu0_oa"})

    report = platform.ingest_dch("admin", PAYLOAD)
    assert report.ingested == 2
    assert report.streams == {"hvac/ahu0_oa": 2}
    assert report.unmapped == ["Unknown sensor"]
    assert report.unmapped_observations == 1

    rows = platform.read_stream("admin", "hvac/ahu0_oa", Window(start=DAY, end=DAY + 3600))
    assert [(o.t, o.v, o.q) for o in rows] == [(DAY, 21.5, "actual"), (DAY + HALF_HOUR, 21.75, "suspect")]
    assert platform.streams.get_meta("hvac/ahu0_oa").point == H + "ahu0_oa"

    unmapped_only = platform.ingest_dch("admin", {"gateway": "gw-02", "points": PAYLOAD["points"]})
    assert unmapped_only.ingested == 0
    assert unmapped_only.unmapped == ["AHU-0 OAT", "Unknown sensor"]


# --- health ---

def test_stale_run_threshold():
    """Six hours of identical half-hourly readings (13 values) is stale; 12 is not."""
    store = TimeseriesStore()
    for sid, repeats in (("s/13", 13), ("s/12", 12)):
        store.create_stream({"stream_id": sid, "quantity_kind": "Temperature", "unit": "degC",
                             "expected_interval": HALF_HOUR})
        values = [5.0] * repeats + [6.0 + i for i in range(20 - repeats)]
        store.append(sid, [{"t": DAY + i * HALF_HOUR, "v": v} for i, v in enumerate(values)])
    window = Window(start=DAY, end=DAY + 20 * HALF_HOUR)

    stale = run_health_checks(store, "s/13", window, now=window.end)
    assert [(f.kind, f.detail["count"]) for f in stale] == [("stale", 13)]
    assert stale[0].window.start == DAY
    assert run_health_checks(store, "s/12", window, now=window.end) == []


OFFICE_RANGE = {"rangeMin": 5, "rangeMax": 35}


def day_of_readings(edit=None) -> TimeseriesStore:
    """One full day of half-hourly office temperatures, none repeated back to back."""
    values = [20.0 + i % 5 for i in range(48)]
    if edit:
        edit(values)
    store = TimeseriesStore()
    store.create_stream({"stream_id": "office/temp", "quantity_kind": "Temperature", "unit": "degC",
                         "expected_interval": HALF_HOUR})
    store.append("office/temp", [{"t": DAY + i * HALF_HOUR, "v": v} for i, v in enumerate(values)])
    return store


def flatline(values):
    values[10:30] = [5.0] * 20


def freezing(values):
    values[30] = 0.0


FULL_DAY = Window(start=DAY, end=DAY + 86400)


@pytest.mark.parametrize("edit, now, kind", [
    (flatline, FULL_DAY.end, "stale"),                          # 20 identical readings over 10 h
    (freezing, FULL_DAY.end, "out_of_range"),                   # 0 degC under rangeMin 5
    (None, DAY + 47 * HALF_HOUR - 600, "future_timestamp"),     # last reading 10 min past now
])
def test_each_anomaly_gives_exactly_one_finding(edit, now, kind):
    findings = run_health_checks(day_of_readings(edit), "office/temp", FULL_DAY, now=now,
                                 point_properties=OFFICE_RANGE)
    assert [f.kind for f in findings] == [kind]


def test_clean_stream_has_no_findings():
    assert run_health_checks(day_of_readings(), "office/temp", FULL_DAY, now=FULL_DAY.end,
                             point_properties=OFFICE_RANGE) == []


def test_range_check_skipped_without_range_properties():
    store = day_of_readings(freezing)
    assert run_health_checks(store, "office/temp", FULL_DAY, now=FULL_DAY.end) == []
    assert run_health_checks(store, "office/temp", FULL_DAY, now=FULL_DAY.end, point_properties={}) == []


def test_future_timestamps_and_trailing_gap():
    store = TimeseriesStore()
    store.create_stream({"stream_id": "s/f", "quantity_kind": "Temperature", "unit": "degC",
                         "expected_interval": HALF_HOUR})
    now = DAY + 4 * HALF_HOUR
    store.append(store.list_streams()[0].stream_id, [
        {"t": DAY, "v": 1.0}, {"t": DAY + HALF_HOUR, "v": 2.0}, {"t": now + 600, "v": 3.0}])
    findings = run_health_checks(store, "s/f", Window(start=DAY, end=DAY + 86400), now=now,
                                 policy=HealthPolicy(gap_seconds=HALF_HOUR))
    kinds = [(f.kind, f.window.start, f.window.end) for f in findings]
    assert kinds == [("future_timestamp", now + 600, now + 601), ("gap", DAY + 2 * HALF_HOUR, now + 600)]


def test_health_uses_point_range(platform, hvac_site):
    """Range limits come from the bound point's properties; a missing stretch is a gap."""
    _, site_id, _ = hvac_site
    platform.create_stream("admin", {"stream_id": "hvac/temp_g01", "quantity_kind": "Temperature", "unit": "degC",
                                     "expected_interval": HALF_HOUR, "owner": site_id, "point": H + "temp_g01"})
    observations = []
    for i in range(48):
        if 10 <= i <= 13:
            continue
        observations.append({"t": DAY + i * HALF_HOUR, "v": 40.0 if i in (20, 21) else 20.0 + i % 5})
    platform.append("admin", "hvac/temp_g01", observations)

    findings = platform.stream_health("admin", "hvac/temp_g01", Window(start=DAY, end=DAY + 86400),
                                      now=DAY + 86400)
    by_kind = {f.kind: f for f in findings}
    assert set(by_kind) == {"out_of_range", "gap"}
    assert by_kind["out_of_range"].window.start == DAY + 20 * HALF_HOUR
    assert by_kind["out_of_range"].detail["count"] == 2
    assert by_kind["out_of_range"].detail["range_max"] == 35
    assert (by_kind["gap"].window.start, by_kind["gap"].window.end) == (DAY + 10 * HALF_HOUR, DAY + 14 * HALF_HOUR)
