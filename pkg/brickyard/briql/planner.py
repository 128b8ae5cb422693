"""
BRIQL planner: resolve names against the ontology, count candidates, order variables.

Ordering heuristic: ascending candidate count summed over the requested
graphs (exact counting, cheap at desk scale), ties broken by declaration
order. Variables pinned by an argument or default count as one candidate.
A path constraint is checked at the first step where both its endpoints are
bound; when a step's variable is connected by a path to an already-bound
variable, its candidates are generated by traversal from that variable and
then filtered by type.

Pipeline position: Stage 2 of 3 (repair → validate → plan/evaluate).
"""

from typing import Any, Iterable, Optional

from pydantic import BaseModel, ConfigDict, Field
from rdflib import URIRef

from ..exceptions import UnknownRelationError
from ..graph.namespaces import RDF, RDFS, expand
from ..graph.ontology import Ontology
from ..graph.store import GraphStore, from_node, reach
from ..logger import get_module_logger
from .schemas import BriqlQuery, ExactMatcher, IsaMatcher, PropertyPredicate, TagsMatcher

logger = get_module_logger("briql.planner")


class ResolvedStep(BaseModel):
    relation: str
    inverse: str
    min: int
    max: Optional[int] = None


class PlanStep(BaseModel):
    variable: str
    candidates: int
    via_path: Optional[int] = None             # path used to generate candidates from a bound endpoint
    checks: list[int] = Field(default_factory=list)    # paths whose endpoints are both bound after this step


class Plan(BaseModel):
    """Deterministic evaluation order for one query over a set of graphs."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    query: BriqlQuery
    graph_ids: list[str]
    steps: list[PlanStep]
    pinned: dict[str, str] = Field(default_factory=dict)
    type_classes: dict[str, Optional[frozenset[str]]] = Field(default_factory=dict)   # None = any typed entity
    predicates: dict[str, list[PropertyPredicate]] = Field(default_factory=dict)
    paths: list[list[ResolvedStep]] = Field(default_factory=list)
    candidates: dict[str, dict[str, list[str]]] = Field(default_factory=dict)         # graph → variable → ids

    @property
    def order(self) -> list[str]:
        return [step.variable for step in self.steps]


def predicate_holds(pred: PropertyPredicate, props: dict[str, Any]) -> bool:
    if pred.key not in props:
        return False
    if pred.op == "exists":
        return True
    have, want = props[pred.key], pred.value
    try:
        return {
            "eq": lambda: have == want,
            "ne": lambda: have != want,
            "lt": lambda: have < want,
            "le": lambda: have <= want,
            "gt": lambda: have > want,
            "ge": lambda: have >= want,
        }[pred.op]()
    except TypeError:
        # e.g. comparing a string property with a number
        return False


class GraphView:
    """
    Per-graph read helper holding one snapshot for a whole evaluation.

    Caches entity types, properties and reach sets so repeated lookups during
    backtracking stay cheap.
    """

    def __init__(self, store: GraphStore, graph_id: str):
        self.store = store
        self.graph_id = graph_id
        self.graph = store.snapshot(graph_id)
        self.ontology = store.ontology
        self._node_count: Optional[int] = None
        self._types: dict[str, frozenset[str]] = {}
        self._props: dict[str, dict[str, Any]] = {}
        self._reach: dict[tuple, frozenset[str]] = {}

    @property
    def node_count(self) -> int:
        if self._node_count is None:
            self._node_count = len(set(self.graph.all_nodes()))
        return self._node_count

    def types(self, entity: str) -> frozenset[str]:
        if entity not in self._types:
            self._types[entity] = frozenset(str(c) for c in self.graph.objects(URIRef(entity), RDF.type))
        return self._types[entity]

    def properties(self, entity: str) -> dict[str, Any]:
        if entity not in self._props:
            self._props[entity] = self.store.entity_properties(self.graph_id, entity)
        return self._props[entity]

    def typed_entities(self) -> set[str]:
        return {str(s) for s in self.graph.subjects(RDF.type, None) if isinstance(s, URIRef)}

    def entities_with_classes(self, classes: Iterable[str]) -> set[str]:
        result = set()
        for cls in classes:
            result.update(str(s) for s in self.graph.subjects(RDF.type, URIRef(cls)) if isinstance(s, URIRef))
        return result

    def successors(self, node: str, relation: str):
        return (str(o) for o in self.graph.objects(URIRef(node), URIRef(relation)) if isinstance(o, URIRef))

    def reach(self, node: str, relation: str, min_hops: int, max_hops: Optional[int]) -> frozenset[str]:
        key = (node, relation, min_hops, max_hops)
        if key not in self._reach:
            self._reach[key] = frozenset(
                reach(lambda n: self.successors(n, relation), node, min_hops, max_hops, self.node_count)
            )
        return self._reach[key]

    def path_targets(self, node: str, steps: list[ResolvedStep], reverse: bool = False) -> frozenset[str]:
        """Endpoints of a multi-step path from `node` (or into it when reverse)."""
        frontier = {node}
        sequence = reversed(steps) if reverse else steps
        for step in sequence:
            relation = step.inverse if reverse else step.relation
            nxt: set[str] = set()
            for n in frontier:
                nxt |= self.reach(n, relation, step.min, step.max)
            frontier = nxt
            if not frontier:
                break
        return frozenset(frontier)

    def matches(self, entity: str, classes: Optional[frozenset[str]], predicates: list[PropertyPredicate]) -> bool:
        types = self.types(entity)
        if not types:
            return False
        if classes is not None and not (types & classes):
            return False
        if predicates:
            props = self.properties(entity)
            return all(predicate_holds(p, props) for p in predicates)
        return True

    def candidates(self, classes: Optional[frozenset[str]], predicates: list[PropertyPredicate]) -> list[str]:
        pool = self.typed_entities() if classes is None else self.entities_with_classes(classes)
        if predicates:
            pool = {e for e in pool if all(predicate_holds(p, self.properties(e)) for p in predicates)}
        return sorted(pool)

    def label(self, entity: str) -> Optional[str]:
        for value in self.graph.objects(URIRef(entity), RDFS.label):
            return str(from_node(value))
        return None


def resolve_classes(ontology: Ontology, matcher) -> Optional[frozenset[str]]:
    """Class set accepted by a type matcher (None = any typed entity)."""
    if isinstance(matcher, ExactMatcher):
        return frozenset({ontology.require_class(expand(matcher.type))})
    if isinstance(matcher, IsaMatcher):
        return ontology.subclasses_of(expand(matcher.type))
    if isinstance(matcher, TagsMatcher):
        return ontology.classes_matching_tags(matcher.tags)
    return None


def resolve_path(ontology: Ontology, steps) -> list[ResolvedStep]:
    resolved = []
    for step in steps:
        iri = expand(step.property)
        relation = ontology.relation(iri)
        if relation is None:
            raise UnknownRelationError(f"Unknown relation: {step.property}", details={"relation": step.property})
        resolved.append(ResolvedStep(relation=relation.name, inverse=relation.inverse, min=step.min, max=step.max))
    return resolved


def plan(query: BriqlQuery, store: GraphStore, graph_ids: list[str], args: Optional[dict[str, str]] = None,
         selectivity: bool = True) -> Plan:
    """
    Build a deterministic plan.

    Args:
        query: Validated query
        store: Graph store holding the requested graphs
        graph_ids: Graphs to evaluate against
        args: Variable → entity IRI; overrides defaults
        selectivity: Order by candidate count (False keeps declaration order)

    Returns:
        Plan

    Raises:
        UnknownClassError / UnknownRelationError: names not in the ontology
    """
    ontology = store.ontology
    pinned = {v.name: v.default for v in query.variables if v.default}
    pinned.update(args or {})

    type_classes: dict[str, Optional[frozenset[str]]] = {}
    predicates: dict[str, list[PropertyPredicate]] = {}
    for var in query.variables:
        type_classes[var.name] = resolve_classes(ontology, var.brick_type)
        predicates[var.name] = list(getattr(var.brick_type, "properties", []) or [])

    paths = [resolve_path(ontology, p.steps) for p in query.paths]

    candidates: dict[str, dict[str, list[str]]] = {}
    totals = {v.name: 0 for v in query.variables}
    for graph_id in graph_ids:
        view = GraphView(store, graph_id)
        per_var = {}
        for var in query.variables:
            name = var.name
            if name in pinned:
                # Pinned variables skip the type scan but keep type validation
                entity = pinned[name]
                ok = view.matches(entity, type_classes[name], predicates[name])
                per_var[name] = [entity] if ok else []
            else:
                per_var[name] = view.candidates(type_classes[name], predicates[name])
            totals[name] += len(per_var[name])
        candidates[graph_id] = per_var

    declared = [v.name for v in query.variables]
    if selectivity:
        order = sorted(declared, key=lambda n: (totals[n], declared.index(n)))
    else:
        order = declared

    steps = []
    bound: set[str] = set()
    done: set[int] = set()
    for name in order:
        via = None
        for i, path in enumerate(query.paths):
            other = path.to_ref if path.from_ref == name else path.from_ref if path.to_ref == name else None
            if other is not None and other != name and other in bound:
                via = i
                break
        bound.add(name)
        checks = []
        for i, path in enumerate(query.paths):
            if i not in done and path.from_ref in bound and path.to_ref in bound:
                done.add(i)
                if i != via:
                    checks.append(i)
        if via is not None:
            done.add(via)
        steps.append(PlanStep(variable=name, candidates=totals[name], via_path=via, checks=checks))

    result = Plan(
        query=query,
        graph_ids=list(graph_ids),
        steps=steps,
        pinned=pinned,
        type_classes=type_classes,
        predicates=predicates,
        paths=paths,
        candidates=candidates,
    )
    logger.debug(f"Plan order: {[(s.variable, s.candidates) for s in steps]}")
    return result
