"""
Metering discovery over a model graph.

Works on the electrical subsystem only: electrical meters, electrical
equipment (switchboards, inverters, ...) and generation systems, connected
by feeds edges.

  roots             meters with no upstream meter that are not fed by generation
  generation meters meters with generation equipment upstream
  site              +roots, plus +each generation meter downstream of a root
                    (supplies measure net import, so behind-the-meter
                    generation is added back); other generation meters are
                    excluded with a diagnostic
  building b        +each root serving b, minus each non-generation child
                    meter of those roots that serves only other buildings

Ambiguity (a meter under two roots, a child whose served buildings are
unknown) produces a diagnostic, never a guess.
"""

from typing import Optional

from pydantic import BaseModel, Field
from rdflib import Graph, URIRef

from ...exceptions import DiscoveryError
from ...graph.namespaces import BRICK, RDF, local_name
from ...graph.ontology import Ontology
from ...logger import get_module_logger

logger = get_module_logger("apps.mv.metering")


class PointChoice(BaseModel):
    """Stream(s) selected to measure one meter."""
    meter: str
    kind: str                                   # "energy" or "power"
    unit: str
    phase: str = "total"                        # "total" or "per-phase"
    sense: str = "net"
    points: list[str] = Field(default_factory=list)
    streams: list[str] = Field(default_factory=list)   # summed when per-phase


class MeterTerm(BaseModel):
    sign: int = Field(ge=-1, le=1)
    meter: str
    choice: Optional[PointChoice] = None


class MeterExpression(BaseModel):
    terms: list[MeterTerm] = Field(default_factory=list)

    def signed(self) -> set[tuple[int, str]]:
        return {(t.sign, t.meter) for t in self.terms}

    def describe(self) -> str:
        return " ".join(f"{'+' if t.sign > 0 else '-'}{local_name(t.meter)}" for t in self.terms)


class MeteringDiscovery(BaseModel):
    site: MeterExpression
    buildings: dict[str, MeterExpression] = Field(default_factory=dict)
    roots: list[str] = Field(default_factory=list)
    generation: list[str] = Field(default_factory=list)
    excluded: list[str] = Field(default_factory=list)
    diagnostics: list[str] = Field(default_factory=list)


class _Topology:
    def __init__(self, graph: Graph, ontology: Ontology):
        self.graph = graph
        meter_classes = ontology.subclasses_of(str(BRICK.Electrical_Meter))
        equipment_classes = ontology.subclasses_of(str(BRICK.Electrical_Equipment))
        generation_classes = ontology.subclasses_of(str(BRICK.Energy_Generation_System))
        building_classes = ontology.subclasses_of(str(BRICK.Building))

        self.meters: set[str] = set()
        self.equipment: set[str] = set()
        self.generators: set[str] = set()
        self.buildings: set[str] = set()
        for s, o in graph.subject_objects(RDF.type):
            cls = str(o)
            if cls in meter_classes:
                self.meters.add(str(s))
            elif cls in equipment_classes:
                self.equipment.add(str(s))
            elif cls in generation_classes:
                self.generators.add(str(s))
            if cls in building_classes:
                self.buildings.add(str(s))

    def _edges(self, node: str, predicate) -> list[str]:
        """Neighbours along predicate, also honouring the inverse when only one side is stored."""
        inverse = BRICK.isFedBy if predicate == BRICK.feeds else BRICK.feeds
        found = {str(o) for o in self.graph.objects(URIRef(node), predicate) if isinstance(o, URIRef)}
        found |= {str(s) for s in self.graph.subjects(inverse, URIRef(node)) if isinstance(s, URIRef)}
        return sorted(found)

    def _walk(self, start: str, predicate) -> tuple[set[str], bool]:
        """Nearest meters along predicate, passing through equipment; flags generation seen."""
        found: set[str] = set()
        generation = False
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt in self._edges(node, predicate):
                if nxt in seen:
                    continue
                seen.add(nxt)
                if nxt in self.meters:
                    found.add(nxt)
                elif nxt in self.generators:
                    generation = True
                elif nxt in self.equipment:
                    stack.append(nxt)
        return found, generation

    def upstream(self, meter: str) -> tuple[set[str], bool]:
        return self._walk(meter, BRICK.isFedBy)

    def children(self, meter: str) -> set[str]:
        return self._walk(meter, BRICK.feeds)[0]

    def served(self, meter: str) -> set[str]:
        """Buildings reachable downstream over feeds (any node kind)."""
        result: set[str] = set()
        seen = {meter}
        stack = [meter]
        while stack:
            node = stack.pop()
            for nxt in self._edges(node, BRICK.feeds):
                if nxt in seen:
                    continue
                seen.add(nxt)
                if nxt in self.buildings:
                    result.add(nxt)
                stack.append(nxt)
        return result


def discover_metering(graph: Graph, ontology: Ontology) -> MeteringDiscovery:
    """
    Site and per-building meter expressions for one model graph.

    Raises:
        DiscoveryError: the model has no electrical meters
    """
    topo = _Topology(graph, ontology)
    if not topo.meters:
        raise DiscoveryError("No electrical meters in the model")
    diagnostics: list[str] = []

    upstream = {m: topo.upstream(m) for m in sorted(topo.meters)}
    generation = sorted(m for m, (_, gen) in upstream.items() if gen)
    roots = sorted(m for m, (up, gen) in upstream.items() if not up and not gen)

    # Roots above each meter, following meters upward
    root_set = set(roots)
    ancestors: dict[str, set[str]] = {}
    for meter in sorted(topo.meters):
        found: set[str] = set()
        seen = {meter}
        stack = [meter]
        while stack:
            node = stack.pop()
            for up in upstream[node][0]:
                if up in seen:
                    continue
                seen.add(up)
                if up in root_set:
                    found.add(up)
                stack.append(up)
        ancestors[meter] = found
        if len(found) > 1:
            diagnostics.append(
                f"{local_name(meter)} is downstream of several supply meters: "
                f"{', '.join(local_name(r) for r in sorted(found))}"
            )

    site_terms = [MeterTerm(sign=1, meter=r) for r in roots]
    excluded = []
    for meter in generation:
        if ancestors[meter]:
            site_terms.append(MeterTerm(sign=1, meter=meter))
        else:
            excluded.append(meter)
            diagnostics.append(f"Generation meter {local_name(meter)} is not downstream of any supply meter; excluded")

    served = {m: topo.served(m) for m in sorted(topo.meters)}
    gen_set = set(generation)
    buildings: dict[str, MeterExpression] = {}
    for building in sorted(topo.buildings):
        serving = [r for r in roots if building in served[r]]
        if not serving:
            diagnostics.append(f"No supply meter serves {local_name(building)}")
            continue
        terms = [MeterTerm(sign=1, meter=r) for r in serving]
        subtracted: set[str] = set()
        for root in serving:
            for child in sorted(topo.children(root)):
                if child in gen_set or child in subtracted:
                    continue
                if not served[child]:
                    diagnostics.append(
                        f"{local_name(child)} under {local_name(root)} serves no known building; "
                        f"not subtracted for {local_name(building)}"
                    )
                    continue
                if building not in served[child]:
                    subtracted.add(child)
                    terms.append(MeterTerm(sign=-1, meter=child))
        buildings[building] = MeterExpression(terms=terms)

    result = MeteringDiscovery(
        site=MeterExpression(terms=site_terms),
        buildings=buildings,
        roots=roots,
        generation=generation,
        excluded=excluded,
        diagnostics=diagnostics,
    )
    logger.info(f"Metering discovery: site = {result.site.describe()}, {len(buildings)} buildings, "
                f"{len(diagnostics)} diagnostics")
    for message in diagnostics:
        logger.warning(message)
    return result
