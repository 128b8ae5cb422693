#!/usr/bin/env python3
"""
Tests for the measurement and verification application: metering discovery,
meter point selection, bucketed consumption, baseline fitting and savings,
and a full install-and-run through the platform.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest
from scipy import optimize, stats

from brickyard.apps.mv import (
    ChangePointModel,
    MeterExpression,
    MeterTerm,
    PointChoice,
    compute_net_consumption,
    design_matrix,
    discover_metering,
    estimate_savings,
    fit_baseline,
    fit_fixed,
    mean_temperature,
    mv_package,
    select_meter_point,
)
from brickyard.apps.mv.consumption import bucket_starts, bucket_sums
from brickyard.exceptions import (
    DiscoveryError,
    InsufficientDataError,
    InvalidArgumentError,
    NoUsablePointError,
    UnitMismatchError,
)
from brickyard.timeseries import TimeseriesStore, Window
from conftest import fixture_text, publish_fixture

M = "urn:fixture:metering#"
DAY = 86400
T0 = 1_704_067_200


def load_graph(graphs, text: str, graph_id: str = "g"):
    graphs.create_graph(graph_id)
    graphs.assert_triples(graph_id, graphs.parse_model_document(text))
    return graphs.snapshot(graph_id)


def meter_graph(graphs, *points):
    """One meter with the given (name, class, props) points, each with a stream."""
    lines = [
        "@prefix : <urn:t#> .",
        f":m a brick:Electrical_Meter ; brick:hasPoint {', '.join(':' + p[0] for p in points)} .",
    ]
    for name, cls, props in points:
        extra = "".join(f' ; prop:{k} "{v}"' for k, v in props.items())
        lines.append(f':{name} a brick:{cls} ; ref:timeseries "s/{name}"{extra} .')
    return load_graph(graphs, "\n".join(lines) + "\n")


# --- metering discovery ---

def test_discovery_on_partial_campus(graphs, ontology):
    """Behind-the-meter generation is added back at site level; unconnected generation is excluded."""
    found = discover_metering(load_graph(graphs, fixture_text("figure4_metering.ttl")), ontology)

    assert found.roots == [M + "Supply_1", M + "Supply_2"]
    assert found.site.signed() == {(1, M + "Supply_1"), (1, M + "Supply_2"), (1, M + "B060G")}
    assert found.excluded == [M + "B501G"]
    assert any("B501G" in d for d in found.diagnostics)

    assert found.buildings[M + "Building_501"].signed() == {
        (1, M + "Supply_1"), (1, M + "Supply_2"), (-1, M + "B061"), (-1, M + "B062"),
    }
    assert found.buildings[M + "Building_061"].signed() == {(1, M + "Supply_1"), (-1, M + "B501_Mech")}
    assert found.buildings[M + "Building_062"].signed() == {(1, M + "Supply_2"), (-1, M + "B501_Light")}


def test_discovery_needs_meters(graphs, ontology):
    with pytest.raises(DiscoveryError):
        discover_metering(load_graph(graphs, fixture_text("figure2_hvac.ttl")), ontology)


# --- point selection ---

def test_energy_preferred_over_power(graphs, ontology):
    graph = load_graph(graphs, fixture_text("figure4_metering.ttl"))
    choice = select_meter_point(graph, ontology, M + "Supply_1")
    assert choice.kind == "energy"
    assert choice.streams == ["metering/supply_1_kwh"]


@pytest.mark.parametrize("points, kind, phase, streams", [
    # Complete phase set of energy beats a total power point
    ([("ea", "Active_Energy_Sensor", {"phase": "A"}), ("eb", "Active_Energy_Sensor", {"phase": "B"}),
      ("ec", "Active_Energy_Sensor", {"phase": "C"}), ("p", "Active_Power_Sensor", {})],
     "energy", "per-phase", ["s/ea", "s/eb", "s/ec"]),
    # Incomplete phase set falls back to power
    ([("ea", "Active_Energy_Sensor", {"phase": "A"}), ("eb", "Active_Energy_Sensor", {"phase": "B"}),
      ("p", "Active_Power_Sensor", {})],
     "power", "total", ["s/p"]),
    # Total beats per-phase of the same kind
    ([("ea", "Active_Energy_Sensor", {"phase": "A"}), ("eb", "Active_Energy_Sensor", {"phase": "B"}),
      ("ec", "Active_Energy_Sensor", {"phase": "C"}), ("et", "Active_Energy_Sensor", {})],
     "energy", "total", ["s/et"]),
    # Net beats import; export never qualifies
    ([("imp", "Active_Energy_Sensor", {"sense": "import"}), ("net", "Active_Energy_Sensor", {"sense": "net"}),
      ("exp", "Active_Energy_Sensor", {"sense": "export"})],
     "energy", "total", ["s/net"]),
    # Reactive energy is skipped in favour of real power
    ([("q", "Reactive_Energy_Sensor", {}), ("p", "Active_Power_Sensor", {})],
     "power", "total", ["s/p"]),
])
def test_point_preferences(graphs, ontology, points, kind, phase, streams):
    choice = select_meter_point(meter_graph(graphs, *points), ontology, "urn:t#m")
    assert (choice.kind, choice.phase, choice.streams) == (kind, phase, streams)


def test_no_usable_point(graphs, ontology):
    graph = meter_graph(graphs, ("q", "Reactive_Power_Sensor", {}), ("s", "Apparent_Energy_Sensor", {}),
                        ("x", "Active_Energy_Sensor", {"sense": "export"}))
    with pytest.raises(NoUsablePointError):
        select_meter_point(graph, ontology, "urn:t#m")


# --- consumption ---

def hourly(store, stream_id, values, start=T0, unit="kWh", kind="Energy", interval=3600):
    store.create_stream({"stream_id": stream_id, "quantity_kind": kind, "unit": unit,
                         "expected_interval": interval})
    store.append(stream_id, [{"t": start + i * interval, "v": v} for i, v in enumerate(values) if v is not None])


def term(sign, stream_id, kind="energy", streams=None):
    return MeterTerm(sign=sign, meter=f"urn:t#{stream_id}", choice=PointChoice(
        meter=f"urn:t#{stream_id}", kind=kind, unit="kWh" if kind == "energy" else "kW",
        streams=streams or [stream_id]))


def test_net_consumption_arithmetic():
    """Energy sums, power integrates, signs apply, per-phase streams add."""
    store = TimeseriesStore()
    hourly(store, "main", [2.0] * 48)
    hourly(store, "sub", [1.0] * 192, unit="kW", kind="Power", interval=900)
    for phase in "abc":
        hourly(store, f"gen_{phase}", [100.0] * 48, unit="Wh")

    expression = MeterExpression(terms=[
        term(1, "main"),
        term(-1, "sub", kind="power"),
        term(1, "gen", streams=["gen_a", "gen_b", "gen_c"]),
    ])
    buckets = compute_net_consumption(store, expression, Window(start=T0, end=T0 + 2 * DAY))

    # The last power slice of the window has no closing observation
    assert [b.value for b in buckets] == pytest.approx([48 - 24 + 7.2, 48 - 23.75 + 7.2])
    assert all(b.complete for b in buckets)


def test_bucket_sums_match_store_aggregate():
    """Vectorised energy bucketing agrees with the store's daily sum."""
    rng = np.random.default_rng(7)
    store = TimeseriesStore()
    hourly(store, "main", [float(x) for x in rng.uniform(0.0, 5.0, 72)])
    window = Window(start=T0, end=T0 + 3 * DAY)
    t, v, _ = store.arrays("main", window)
    starts = bucket_starts(window, DAY)
    expected = [b.value for b in store.aggregate("main", window, DAY, "sum")]
    assert list(bucket_sums(t, v, starts, DAY)) == pytest.approx(expected)
    # Points before the first bucket or past the last one are dropped
    assert list(bucket_sums(t, v, starts[1:2], DAY)) == pytest.approx(expected[1:2])


def test_incomplete_days_are_flagged():
    store = TimeseriesStore()
    hourly(store, "main", [1.0] * 24 + [None] * 6 + [1.0] * 18)
    buckets = compute_net_consumption(store, MeterExpression(terms=[term(1, "main")]),
                                      Window(start=T0, end=T0 + 2 * DAY))
    assert [b.coverage for b in buckets] == pytest.approx([1.0, 0.75])
    assert [b.complete for b in buckets] == [True, False]


def test_consumption_rejects_non_energy_units():
    store = TimeseriesStore()
    hourly(store, "oat", [20.0] * 24, unit="degC", kind="Temperature")
    with pytest.raises(UnitMismatchError):
        compute_net_consumption(store, MeterExpression(terms=[term(1, "oat")]), Window(start=T0, end=T0 + DAY))


def test_mean_temperature_converts_and_flags_gaps():
    store = TimeseriesStore()
    hourly(store, "oat", [50.0] * 24 + [None] * 24, unit="degF", kind="Temperature")
    first, second = mean_temperature(store, "oat", Window(start=T0, end=T0 + 2 * DAY))
    assert first.value == pytest.approx(10.0)
    assert first.complete
    assert math.isnan(second.value)
    assert not second.complete


# --- baseline ---

def heating_load(temperature, beta0=100.0, beta_h=4.0, tau_h=15.0):
    return beta0 + beta_h * np.maximum(0.0, tau_h - np.asarray(temperature))


def test_fit_recovers_exact_heating_model():
    temperature = np.linspace(-5.0, 25.0, 60)
    model = fit_baseline(heating_load(temperature), temperature)
    assert model.variant == "heating"
    assert model.beta0 == pytest.approx(100.0, abs=1e-6)
    assert model.beta_h == pytest.approx(4.0, abs=1e-6)
    assert model.tau_h == pytest.approx(15.0, abs=1e-6)
    assert model.r2 == pytest.approx(1.0)


def test_fit_recovers_cooling_model():
    temperature = np.linspace(10.0, 35.0, 50)
    energy = 50.0 + 3.0 * np.maximum(0.0, temperature - 22.0)
    model = fit_baseline(energy, temperature)
    assert model.variant == "cooling"
    assert (model.beta0, model.beta_c, model.tau_c) == pytest.approx((50.0, 3.0, 22.0), abs=1e-6)


def test_fit_is_close_under_noise():
    """Coefficients land within 5% of the truth across seeds."""
    for seed in range(20):
        rng = np.random.default_rng(seed)
        temperature = rng.uniform(-5.0, 25.0, 120)
        energy = heating_load(temperature) + rng.normal(0.0, 2.0, 120)
        model = fit_baseline(energy, temperature)
        assert model.variant in ("heating", "heating+cooling"), seed
        assert abs(model.beta0 - 100.0) <= 5.0, seed
        assert abs(model.beta_h - 4.0) <= 0.2, seed


def test_fixed_fit_matches_bounded_least_squares():
    """Slopes bounded at zero agree with scipy's bounded solver, including pinned slopes."""
    for seed in range(25):
        rng = np.random.default_rng(seed)
        temperature = rng.uniform(0.0, 30.0, 80)
        # Random signs make some unconstrained slopes negative
        energy = (rng.uniform(20, 80) + rng.normal(0, 3, 80)
                  + rng.uniform(-3, 3) * np.maximum(0.0, 12.0 - temperature)
                  + rng.uniform(-3, 3) * np.maximum(0.0, temperature - 20.0))
        coef, sse = fit_fixed(energy, temperature, 12.0, 20.0)

        x = design_matrix(temperature, 12.0, 20.0)
        oracle = optimize.lsq_linear(x, energy, bounds=([-np.inf, 0.0, 0.0], [np.inf, np.inf, np.inf]),
                                     method="bvls")
        oracle_sse = float(((energy - x @ oracle.x) ** 2).sum())
        assert sse == pytest.approx(oracle_sse, rel=1e-6, abs=1e-6), seed
        assert coef == pytest.approx(oracle.x, abs=1e-4), seed
        assert np.all(coef[1:] >= 0)


def test_baseload_when_temperature_is_flat():
    energy = np.arange(40, dtype=float)
    model = fit_baseline(energy, np.full(40, 18.0))
    assert model.variant == "baseload"
    assert model.beta0 == pytest.approx(energy.mean())
    assert model.predict([0.0, 30.0]) == pytest.approx([energy.mean()] * 2)


def test_fit_needs_enough_days():
    with pytest.raises(InsufficientDataError) as info:
        fit_baseline(np.ones(29), np.arange(29.0))
    assert info.value.details["days"] == 29


# --- savings ---

def flat_model(beta0=100.0, rmse=2.0, n=60) -> ChangePointModel:
    return ChangePointModel(variant="baseload", beta0=beta0, n=n, sse=rmse ** 2 * (n - 1), rmse=rmse,
                            r2=0.0, adj_r2=0.0)


def test_savings_arithmetic():
    model = flat_model()
    temps = np.full(10, 18.0)
    assert estimate_savings(model, np.full(10, 100.0), temps).savings_kwh == pytest.approx(0.0)
    assert estimate_savings(model, np.zeros(10), temps).savings_kwh == pytest.approx(1000.0)
    adjusted = estimate_savings(model, np.zeros(10), temps, adjustments=np.full(10, 20.0))
    assert adjusted.savings_kwh == pytest.approx(1200.0)
    assert adjusted.adjustment_kwh == pytest.approx(200.0)


def test_savings_interval_and_extrapolation():
    model = flat_model()
    result = estimate_savings(model, np.full(10, 90.0), np.full(10, 18.0), analysis_days=20)
    half = stats.t.ppf(0.975, 59) * 2.0 * math.sqrt(10 + 100 / 60)
    assert (result.ci_low, result.ci_high) == pytest.approx((100.0 - half, 100.0 + half))
    assert result.extrapolation_factor == pytest.approx(2.0)
    assert result.extrapolated_savings_kwh == pytest.approx(200.0)
    assert result.analysis_coverage == pytest.approx(0.5)
    with pytest.raises(InsufficientDataError):
        estimate_savings(model, [], [])


def test_interval_coverage():
    """About 95% of 95% intervals contain the true savings."""
    rng = np.random.default_rng(2024)
    true_savings, hits = 300.0, 0
    for _ in range(200):
        baseline = 100.0 + rng.normal(0.0, 5.0, 60)
        model = fit_baseline(baseline, np.full(60, 18.0))
        actual = 100.0 - 10.0 + rng.normal(0.0, 5.0, 30)
        result = estimate_savings(model, actual, np.full(30, 18.0))
        hits += result.ci_low <= true_savings <= result.ci_high
    assert 0.91 <= hits / 200 <= 0.99


# --- end to end ---

BASELINE_DAYS, ANALYSIS_DAYS = 60, 30
START = T0
SWITCH = T0 + BASELINE_DAYS * DAY
END = SWITCH + ANALYSIS_DAYS * DAY

METER_STREAMS = ["supply_1_kwh", "supply_1_kw", "supply_2_kwh", "b061_kwh", "b062_kwh",
                 "b501_mech_kwh", "b501_light_kwh", "b060g_kwh", "b501g_kwh"]


def metering_streams(platform, site_id):
    """Hourly data: Supply_1 follows a heating curve and drops 10 kWh/day after the switch."""
    for name in METER_STREAMS:
        kind, unit = ("Power", "kW") if name.endswith("_kw") else ("Energy", "kWh")
        platform.create_stream("admin", {"stream_id": f"metering/{name}", "quantity_kind": kind, "unit": unit,
                                         "expected_interval": 3600, "owner": site_id})
    platform.create_stream("admin", {"stream_id": "metering/site_oat", "quantity_kind": "Temperature",
                                     "unit": "degC", "expected_interval": 3600, "owner": site_id})
    oat, supply_1, supply_2, b060g = [], [], [], []
    for day in range((END - START) // DAY):
        temperature = 5.0 + day % 20
        daily = float(heating_load(temperature)) - (10.0 if START + day * DAY >= SWITCH else 0.0)
        for hour in range(24):
            t = START + day * DAY + hour * 3600
            oat.append({"t": t, "v": temperature})
            supply_1.append({"t": t, "v": daily / 24})
            supply_2.append({"t": t, "v": 1.0})
            b060g.append({"t": t, "v": 0.5})
    platform.append("admin", "metering/site_oat", oat)
    platform.append("admin", "metering/supply_1_kwh", supply_1)
    platform.append("admin", "metering/supply_2_kwh", supply_2)
    platform.append("admin", "metering/b060g_kwh", b060g)


def test_site_savings_end_to_end(platform, metering_site):
    _, site_id, _ = metering_site
    metering_streams(platform, site_id)
    app_id, _ = platform.apps.register_app(mv_package())
    config = {
        "baseline": {"start": START, "end": SWITCH},
        "analysis": {"start": SWITCH, "end": END},
        "exclusions": [{"start": SWITCH, "end": SWITCH + DAY}],
    }
    installation = platform.app_service.install("admin", app_id, site_id, config=config)
    assert installation.state == "bound"
    assert installation.extras["scope"] == "site"
    assert MeterExpression.model_validate(installation.extras["expression"]).describe() == "+Supply_1 +Supply_2 +B060G"
    assert installation.extras["temperature_stream"] == "metering/site_oat"
    assert installation.extras["excluded_meters"] == [M + "B501G"]

    run = platform.app_service.run("admin", installation.install_id, as_of=END)
    assert run.status == "ok", run.error
    result = run.result
    assert result["model"]["variant"] == "heating"
    assert result["model"]["beta0"] == pytest.approx(136.0, abs=1e-6)
    assert result["usable_analysis_days"] == ANALYSIS_DAYS - 1
    assert result["excluded_days"]["analysis"]["calendar"] == 1
    assert result["savings_kwh"] == pytest.approx(290.0, abs=1e-6)
    assert result["extrapolated_savings_kwh"] == pytest.approx(300.0, abs=1e-6)

    output = f"{installation.install_id}/daily_savings"
    assert run.outputs == [output]
    daily = platform.streams.read_window(output, Window(start=SWITCH, end=END))
    assert len(daily) == ANALYSIS_DAYS - 1
    assert all(o.v == pytest.approx(10.0, abs=1e-6) for o in daily)


def test_building_scope_and_unknown_scope(platform, metering_site):
    _, site_id, _ = metering_site
    metering_streams(platform, site_id)
    app_id, _ = platform.apps.register_app(mv_package())
    config = {"baseline": {"start": START, "end": SWITCH}, "analysis": {"start": SWITCH, "end": END},
              "scope_entity": M + "Building_501"}
    installation = platform.app_service.install("admin", app_id, site_id, config=config)
    assert installation.state == "bound"
    assert MeterExpression.model_validate(installation.extras["expression"]).signed() == {
        (1, M + "Supply_1"), (1, M + "Supply_2"), (-1, M + "B061"), (-1, M + "B062"),
    }

    config["scope_entity"] = M + "Nowhere"
    failed = platform.app_service.install("admin", app_id, site_id, config=config)
    assert failed.state == "failed-discovery"
    assert "Nowhere" in failed.diagnostics[0]


def test_overlapping_periods_rejected(platform, metering_site):
    _, site_id, _ = metering_site
    app_id, _ = platform.apps.register_app(mv_package())
    with pytest.raises(InvalidArgumentError):
        platform.app_service.install("admin", app_id, site_id, config={
            "baseline": {"start": START, "end": SWITCH + DAY}, "analysis": {"start": SWITCH, "end": END},
        })
