"""
Whole-facility measurement and verification application.

Install (bind hook):
  discover the metering hierarchy of the published model, pick the site or
  building expression for the installation scope, select a stream for every
  meter and the outside air temperature stream, and freeze all of it.

Run:
  daily net consumption and mean temperature over both periods → drop
  incomplete and calendar-excluded days → fit the change-point baseline →
  estimate savings over the analysis period → write the daily savings stream
  "<install_id>/daily_savings" and return the result document.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from rdflib import URIRef

from ...exceptions import DiscoveryError
from ...graph.namespaces import BRICK, RDF, REF, local_name
from ...graph.store import from_node
from ...logger import get_module_logger
from ...timeseries.models import Window
from ..models import AppPackage
from ..registry import BindContext, BindOutcome, RunContext, procedure
from .baseline import MIN_FIT_DAYS, fit_baseline
from .consumption import DAY, SeriesBucket, compute_net_consumption, mean_temperature
from .metering import MeterExpression, discover_metering
from .points import resolve_expression
from .savings import MvResult, estimate_savings

logger = get_module_logger("apps.mv.app")

ENTRYPOINT = "mv.option_c"
OUTPUT_STREAM = "daily_savings"

DISCOVERY_QUERY = {
    "variables": [
        {"name": "meter", "output": True, "brick_type": {"match": "isa", "type": "Electrical_Meter"},
         "fetch": ["id", "pointinfo"]},
        {"name": "weather", "output": True, "brick_type": {"match": "isa", "type": "Outside_Air_Temperature_Sensor"},
         "fetch": ["id"]},
    ],
    "query": {"paths": []},
}


class Adjustment(BaseModel):
    """Non-routine change: kWh added to predicted consumption, spread over the usable days in window."""
    window: Window
    kwh: float


class MvConfig(BaseModel):
    baseline: Window
    analysis: Window
    confidence: float = Field(default=0.95, gt=0, lt=1)
    completeness_threshold: float = Field(default=0.9, ge=0, le=1)
    exclusions: list[Window] = Field(default_factory=list)       # holidays, shutdowns
    adjustments: list[Adjustment] = Field(default_factory=list)
    scope_entity: Optional[str] = None                            # model entity to measure; defaults from target
    min_days: int = Field(default=MIN_FIT_DAYS, ge=3)

    @model_validator(mode="after")
    def _disjoint(self):
        if self.baseline.start < self.analysis.end and self.analysis.start < self.baseline.end:
            raise ValueError("baseline and analysis windows overlap")
        return self


def _stream_of(ctx: BindContext, entity: str) -> Optional[str]:
    for value in ctx.graph.objects(URIRef(entity), REF.timeseries):
        return str(from_node(value))
    return None


def _scope(ctx: BindContext, config: MvConfig, found) -> tuple[str, MeterExpression]:
    if config.scope_entity:
        if config.scope_entity in found.buildings:
            return config.scope_entity, found.buildings[config.scope_entity]
        if (URIRef(config.scope_entity), RDF.type, BRICK.Site) in ctx.graph:
            return config.scope_entity, found.site
        raise DiscoveryError(f"No meter expression covers {config.scope_entity}",
                             details={"scope_entity": config.scope_entity})
    if ctx.target_kind == "site":
        return "site", found.site
    if len(found.buildings) == 1:
        return next(iter(found.buildings.items()))
    raise DiscoveryError(
        f"Model of {ctx.target} covers {len(found.buildings)} metered buildings; set scope_entity",
        details={"buildings": sorted(found.buildings)},
    )


def bind_mv(ctx: BindContext) -> BindOutcome:
    config: MvConfig = ctx.config
    found = discover_metering(ctx.graph, ctx.ontology)
    scope, expression = _scope(ctx, config, found)
    if not expression.terms:
        raise DiscoveryError(f"Empty meter expression for {scope}", details={"scope": scope})
    expression = resolve_expression(ctx.graph, ctx.ontology, expression)

    weather = [(e, _stream_of(ctx, e)) for e in ctx.bindings["weather"].entities]
    weather = [(e, s) for e, s in weather if s is not None and ctx.readable(s)]
    if not weather:
        raise DiscoveryError("No readable outside air temperature stream", details={"variable": "weather"})
    temperature_entity, temperature_stream = weather[0]

    streams = sorted({s for term in expression.terms for s in term.choice.streams})
    unreadable = [s for s in streams if not ctx.readable(s)]
    if unreadable:
        raise DiscoveryError(f"Meter streams not readable: {', '.join(unreadable)}", details={"streams": unreadable})

    logger.info(f"M&V scope {local_name(scope)}: {expression.describe()}; weather {local_name(temperature_entity)}")
    return BindOutcome(
        extras={
            "scope": scope,
            "expression": expression.model_dump(mode="json"),
            "temperature_point": temperature_entity,
            "temperature_stream": temperature_stream,
            "excluded_meters": found.excluded,
        },
        streams=streams + [temperature_stream],
        diagnostics=found.diagnostics,
    )


def _day_excluded(start: int, exclusions: list[Window]) -> bool:
    return any(w.start < start + DAY and start < w.end for w in exclusions)


def usable_days(energy: list[SeriesBucket], temperature: list[SeriesBucket],
                exclusions: list[Window]) -> tuple[list[int], dict[str, int]]:
    """Indices of days fit for use, and how many were dropped for each reason."""
    keep: list[int] = []
    dropped = {"calendar": 0, "incomplete": 0}
    for i, (e, t) in enumerate(zip(energy, temperature)):
        if _day_excluded(e.start, exclusions):
            dropped["calendar"] += 1
        elif not (e.complete and t.complete):
            dropped["incomplete"] += 1
        else:
            keep.append(i)
    return keep, dropped


def spread_adjustments(starts: list[int], adjustments: list[Adjustment]) -> np.ndarray:
    per_day = np.zeros(len(starts))
    for adj in adjustments:
        inside = [i for i, s in enumerate(starts) if adj.window.start < s + DAY and s < adj.window.end]
        if inside:
            per_day[inside] += adj.kwh / len(inside)
        else:
            logger.warning(f"Adjustment of {adj.kwh} kWh has no usable analysis day; not applied")
    return per_day


def _period(ctx: RunContext, expression: MeterExpression, window: Window, config: MvConfig):
    temperature_stream = ctx.extras["temperature_stream"]
    energy = compute_net_consumption(ctx.reader, expression, window, DAY, config.completeness_threshold)
    temperature = mean_temperature(ctx.reader, temperature_stream, window, DAY, config.completeness_threshold)
    keep, dropped = usable_days(energy, temperature, config.exclusions)
    return (
        [energy[i].start for i in keep],
        np.array([energy[i].value for i in keep]),
        np.array([temperature[i].value for i in keep]),
        len(energy),
        dropped,
    )


@procedure(ENTRYPOINT, config_model=MvConfig, bind=bind_mv)
def run_mv(ctx: RunContext) -> dict:
    config: MvConfig = ctx.config
    expression = MeterExpression.model_validate(ctx.extras["expression"])

    _, base_e, base_t, base_days, base_dropped = _period(ctx, expression, config.baseline, config)
    model = fit_baseline(base_e, base_t, min_days=config.min_days)

    starts, e, t, analysis_days, analysis_dropped = _period(ctx, expression, config.analysis, config)
    adjust = spread_adjustments(starts, config.adjustments)
    result: MvResult = estimate_savings(model, e, t, adjust, config.confidence, analysis_days=analysis_days)
    result = result.model_copy(update={
        "baseline_coverage": len(base_e) / base_days if base_days else 0.0,
        "excluded_days": {"baseline": base_dropped, "analysis": analysis_dropped},
    })

    ctx.writer.write(OUTPUT_STREAM, [{"t": s, "v": v} for s, v in zip(starts, result.daily_savings)],
                     quantity_kind="Energy", unit="kWh")
    return result.model_dump(mode="json")


def mv_package(app_id: str = "mv-option-c", name: str = "Whole-facility savings") -> AppPackage:
    """Package manifest of the reference application."""
    return AppPackage(
        app_id=app_id,
        name=name,
        description="Weather-normalised avoided energy from whole-facility metering",
        discovery=DISCOVERY_QUERY,
        entrypoint=ENTRYPOINT,
    )
