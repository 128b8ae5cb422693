"""
Meter point selection.

Preference order over a meter's points (attached by hasPoint, with a stream):
  1. energy over power
  2. three-phase total over per-phase (per-phase only when phases A, B and C
     are all present; their streams are then summed)
  3. net over import (export never qualifies; an unstated sense counts as net)
  4. real only; reactive and apparent points never qualify
Ties go to the lexically smallest point IRI.
"""

from typing import Any, Optional

from rdflib import Graph, URIRef

from ...exceptions import NoUsablePointError
from ...graph.namespaces import BRICK, PROP, RDF, REF, local_name
from ...graph.ontology import Ontology
from ...graph.store import from_node
from ...logger import get_module_logger
from .metering import MeterExpression, PointChoice

logger = get_module_logger("apps.mv.points")

PHASES = ("A", "B", "C")
SENSE_RANK = {"net": 0, "import": 1}


def _value(graph: Graph, node: URIRef, predicate) -> Optional[Any]:
    for value in graph.objects(node, predicate):
        return from_node(value)
    return None


def classify_point(graph: Graph, ontology: Ontology, point: str) -> Optional[dict]:
    """Kind/complexity/phase/sense of a point, or None when it cannot measure energy."""
    node = URIRef(point)
    stream = _value(graph, node, REF.timeseries)
    if stream is None:
        return None
    classes = {str(c) for c in graph.objects(node, RDF.type) if ontology.has_class(str(c))}
    supers = set().union(*(ontology.superclasses_of(c) for c in classes)) if classes else set()
    quantity = _value(graph, node, REF.quantityKind)

    if str(BRICK.Energy_Sensor) in supers or quantity == "Energy":
        kind = "energy"
    elif str(BRICK.Power_Sensor) in supers or quantity == "Power":
        kind = "power"
    else:
        return None

    complexity = _value(graph, node, PROP.complexity)
    if complexity is None:
        if supers & {str(BRICK.Reactive_Energy_Sensor), str(BRICK.Reactive_Power_Sensor)}:
            complexity = "reactive"
        elif supers & {str(BRICK.Apparent_Energy_Sensor), str(BRICK.Apparent_Power_Sensor)}:
            complexity = "apparent"
        else:
            complexity = "real"

    return {
        "point": point,
        "stream": str(stream),
        "kind": kind,
        "unit": str(_value(graph, node, REF.unit) or ("kWh" if kind == "energy" else "kW")),
        "complexity": str(complexity),
        "phase": str(_value(graph, node, PROP.phase) or "total"),
        "sense": str(_value(graph, node, PROP.sense) or "net"),
    }


def select_meter_point(graph: Graph, ontology: Ontology, meter: str) -> PointChoice:
    """
    Pick the stream(s) that measure a meter's real energy.

    Raises:
        NoUsablePointError: no qualifying point
    """
    points = sorted(str(p) for p in graph.objects(URIRef(meter), BRICK.hasPoint))
    usable = []
    for point in points:
        info = classify_point(graph, ontology, point)
        if info and info["complexity"] == "real" and info["sense"] in SENSE_RANK:
            usable.append(info)

    options: list[tuple[tuple, PointChoice]] = []
    for info in usable:
        if info["phase"] == "total":
            rank = (info["kind"] != "energy", 0, SENSE_RANK[info["sense"]], info["point"])
            options.append((rank, PointChoice(
                meter=meter, kind=info["kind"], unit=info["unit"], phase="total", sense=info["sense"],
                points=[info["point"]], streams=[info["stream"]],
            )))

    groups: dict[tuple[str, str, str], dict[str, dict]] = {}
    for info in usable:
        if info["phase"] in PHASES:
            groups.setdefault((info["kind"], info["sense"], info["unit"]), {}).setdefault(info["phase"], info)
    for (kind, sense, unit), phases in sorted(groups.items()):
        if set(phases) == set(PHASES):
            members = [phases[p] for p in PHASES]
            rank = (kind != "energy", 1, SENSE_RANK[sense], members[0]["point"])
            options.append((rank, PointChoice(
                meter=meter, kind=kind, unit=unit, phase="per-phase", sense=sense,
                points=[m["point"] for m in members], streams=[m["stream"] for m in members],
            )))

    if not options:
        raise NoUsablePointError(f"No usable energy or power point on {local_name(meter)}",
                                 details={"meter": meter, "points": points})
    options.sort(key=lambda o: o[0])
    choice = options[0][1]
    logger.debug(f"{local_name(meter)}: {choice.kind} {choice.phase} via {choice.streams}")
    return choice


def resolve_expression(graph: Graph, ontology: Ontology, expression: MeterExpression) -> MeterExpression:
    """Copy of the expression with a PointChoice on every term."""
    return MeterExpression(terms=[
        term.model_copy(update={"choice": select_meter_point(graph, ontology, term.meter)})
        for term in expression.terms
    ])
