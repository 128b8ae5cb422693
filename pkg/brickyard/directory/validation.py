"""
Model validation rules.

Each rule takes a ValidationContext and returns findings. VALIDATION_RULES is
the registry the directory runs on every validate/publish; adding a rule is a
matter of decorating a function with @rule. Reports depend only on the graph
content (plus stream existence for the warning-level stream check), so the
same graph always yields the same error count.
"""

from collections import defaultdict
from typing import Callable, Optional

from pydantic import BaseModel, ConfigDict
from rdflib import Graph, URIRef

from ..graph.namespaces import BRICK, METADATA_PREDICATES, RDF, RDFS, REF, is_entity_property, local_name
from ..graph.ontology import Ontology
from ..graph.store import reach
from ..logger import get_module_logger
from .models import Finding

logger = get_module_logger("directory.validation")

# Predicates an entity may carry at most one value for
SINGLE_VALUED = (RDFS.label, REF.timeseries, REF.unit, REF.quantityKind)


class ValidationContext(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    graph: Graph
    ontology: Ontology
    stream_exists: Optional[Callable[[str], bool]] = None

    def entities(self) -> list[URIRef]:
        """Subjects plus objects of relation edges; class IRIs are not entities."""
        found = set()
        for s, p, o in self.graph:
            if isinstance(s, URIRef):
                found.add(s)
            if self.ontology.relation(p) is not None and isinstance(o, URIRef):
                found.add(o)
        return sorted(found)

    def types(self, entity) -> set[str]:
        return {str(c) for c in self.graph.objects(entity, RDF.type)}


Rule = Callable[[ValidationContext], list[Finding]]

VALIDATION_RULES: dict[str, Rule] = {}


def rule(code: str):
    def register(fn: Rule) -> Rule:
        VALIDATION_RULES[code] = fn
        return fn
    return register


@rule("unknown_class")
def unknown_class(ctx: ValidationContext) -> list[Finding]:
    findings = []
    for entity in ctx.entities():
        for cls in sorted(ctx.types(entity)):
            if not ctx.ontology.has_class(cls):
                findings.append(Finding(
                    severity="error", code="unknown_class", entity=str(entity),
                    message=f"{local_name(str(entity))} is typed with unknown class {cls}",
                ))
    return findings


@rule("untyped_entity")
def untyped_entity(ctx: ValidationContext) -> list[Finding]:
    return [
        Finding(severity="error", code="untyped_entity", entity=str(entity),
                message=f"{local_name(str(entity))} has no rdf:type")
        for entity in ctx.entities() if not ctx.types(entity)
    ]


@rule("unknown_predicate")
def unknown_predicate(ctx: ValidationContext) -> list[Finding]:
    seen: dict[str, str] = {}
    for s, p, _ in sorted(ctx.graph, key=lambda t: (str(t[1]), str(t[0]))):
        if str(p) in METADATA_PREDICATES or is_entity_property(p) or ctx.ontology.relation(p) is not None:
            continue
        seen.setdefault(str(p), str(s))
    return [
        Finding(severity="error", code="unknown_predicate", entity=subject,
                message=f"Predicate {predicate} is neither a relation nor a metadata predicate")
        for predicate, subject in sorted(seen.items())
    ]


@rule("reciprocal_mismatch")
def reciprocal_mismatch(ctx: ValidationContext) -> list[Finding]:
    findings = []
    for s, p, o in sorted(ctx.graph, key=lambda t: tuple(map(str, t))):
        relation = ctx.ontology.relation(p)
        if relation is None or not isinstance(o, URIRef):
            continue
        if (o, URIRef(relation.inverse), s) not in ctx.graph:
            findings.append(Finding(
                severity="error", code="reciprocal_mismatch", entity=str(s),
                message=f"{local_name(str(s))} {local_name(str(p))} {local_name(str(o))} "
                        f"lacks its inverse {local_name(relation.inverse)}",
            ))
    return findings


@rule("cyclic_relation")
def cyclic_relation(ctx: ValidationContext) -> list[Finding]:
    findings = []
    node_count = len(set(ctx.graph.all_nodes()))
    for name, relation in sorted(ctx.ontology.relations.items()):
        # Each pair is checked from one side only
        if relation.cyclic_allowed or name > relation.inverse:
            continue
        predicate = URIRef(name)

        def successors(node: str):
            return (str(o) for o in ctx.graph.objects(URIRef(node), predicate) if isinstance(o, URIRef))

        starts = sorted({str(s) for s in ctx.graph.subjects(predicate, None)})
        for node in starts:
            if node in reach(successors, node, 1, None, node_count):
                findings.append(Finding(
                    severity="error", code="cyclic_relation", entity=node,
                    message=f"{local_name(node)} reaches itself through {local_name(name)}",
                ))
    return findings


@rule("duplicate_property")
def duplicate_property(ctx: ValidationContext) -> list[Finding]:
    values: dict[tuple[str, str], set] = defaultdict(set)
    for s, p, o in ctx.graph:
        if is_entity_property(p) or p in SINGLE_VALUED:
            values[(str(s), str(p))].add(o)
    return [
        Finding(severity="error", code="duplicate_property", entity=entity,
                message=f"{local_name(entity)} has {len(found)} values for {local_name(predicate)}")
        for (entity, predicate), found in sorted(values.items()) if len(found) > 1
    ]


@rule("dangling_point")
def dangling_point(ctx: ValidationContext) -> list[Finding]:
    findings = []
    for entity in ctx.entities():
        types = ctx.types(entity)
        if not any(ctx.ontology.is_point_class(c) for c in types):
            continue
        hosts = [
            host for host in ctx.graph.objects(entity, BRICK.isPointOf)
            if not any(ctx.ontology.is_point_class(c) for c in ctx.types(host))
        ]
        if not hosts:
            findings.append(Finding(
                severity="warning", code="dangling_point", entity=str(entity),
                message=f"Point {local_name(str(entity))} is not attached to any equipment or location",
            ))
    return findings


@rule("missing_stream")
def missing_stream(ctx: ValidationContext) -> list[Finding]:
    if ctx.stream_exists is None:
        return []
    return [
        Finding(severity="warning", code="missing_stream", entity=str(s),
                message=f"Stream {o} referenced by {local_name(str(s))} does not exist")
        for s, o in sorted(ctx.graph.subject_objects(REF.timeseries), key=lambda t: (str(t[0]), str(t[1])))
        if not ctx.stream_exists(str(o))
    ]


def run_rules(graph: Graph, ontology: Ontology,
              stream_exists: Optional[Callable[[str], bool]] = None) -> list[Finding]:
    """Every registered rule, in registration order."""
    ctx = ValidationContext(graph=graph, ontology=ontology, stream_exists=stream_exists)
    findings: list[Finding] = []
    for code, check in VALIDATION_RULES.items():
        found = check(ctx)
        if found:
            logger.debug(f"Rule {code}: {len(found)} findings")
        findings.extend(found)
    return findings
