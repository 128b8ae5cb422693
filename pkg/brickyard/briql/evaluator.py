"""
BRIQL evaluator: backtracking join over a plan, then response assembly.

Every (variable, candidate) assignment attempted counts against the
binding ceiling; the wall-time ceiling is checked at the same points.
Solutions use set semantics: a row reached by several paths appears once,
and each (model, entity) pair appears once in the entity list.

Pipeline position: Stage 3 of 3 (repair → validate → plan/evaluate).
"""

import time
from typing import Optional

from pydantic import BaseModel
from rdflib import URIRef

from ..exceptions import ResourceLimitError
from ..graph.namespaces import BRICK, REF, expand
from ..graph.store import GraphStore, from_node
from ..logger import get_module_logger
from .planner import GraphView, Plan
from .schemas import (
    BriqlResponse,
    EntityDescription,
    EntityRecord,
    IsaMatcher,
    PointInfo,
    Relationship,
    TagsMatcher,
)

logger = get_module_logger("briql.evaluator")


class Limits(BaseModel):
    """Per-invocation quality-of-service ceilings."""
    max_bindings: int = 1_000_000
    max_seconds: float = 30.0


class _Budget:
    def __init__(self, limits: Limits):
        self.limits = limits
        self.bindings = 0
        self.deadline = time.monotonic() + limits.max_seconds

    def charge(self) -> None:
        self.bindings += 1
        if self.bindings > self.limits.max_bindings:
            raise ResourceLimitError(
                f"Query exceeded {self.limits.max_bindings} intermediate bindings", limit="bindings",
                details={"max_bindings": self.limits.max_bindings},
            )
        if time.monotonic() > self.deadline:
            raise ResourceLimitError(
                f"Query exceeded {self.limits.max_seconds}s", limit="time",
                details={"max_seconds": self.limits.max_seconds},
            )


def solve(plan: Plan, view: GraphView, budget: _Budget) -> set[tuple[tuple[str, str], ...]]:
    """All full assignments for one graph, as sorted (variable, entity) tuples."""
    query = plan.query
    candidates = plan.candidates[view.graph_id]
    steps = plan.steps
    solutions: set[tuple[tuple[str, str], ...]] = set()
    binding: dict[str, str] = {}

    def path_ok(i: int) -> bool:
        path = query.paths[i]
        return binding[path.to_ref] in view.path_targets(binding[path.from_ref], plan.paths[i])

    def step_candidates(depth: int) -> list[str]:
        step = steps[depth]
        base = candidates[step.variable]
        if step.via_path is None:
            return base
        path = query.paths[step.via_path]
        resolved = plan.paths[step.via_path]
        if path.to_ref == step.variable:
            reachable = view.path_targets(binding[path.from_ref], resolved)
        else:
            reachable = view.path_targets(binding[path.to_ref], resolved, reverse=True)
        if len(base) <= len(reachable):
            return [c for c in base if c in reachable]
        allowed = set(base)
        return sorted(c for c in reachable if c in allowed)

    def extend(depth: int) -> None:
        if depth == len(steps):
            solutions.add(tuple(sorted(binding.items())))
            return
        step = steps[depth]
        for entity in step_candidates(depth):
            budget.charge()
            binding[step.variable] = entity
            if all(path_ok(i) for i in step.checks):
                extend(depth + 1)
            del binding[step.variable]

    extend(0)
    return solutions


def point_infos(view: GraphView, entity: str, filters: list) -> list[PointInfo]:
    """Points attached by one hasPoint hop, kept when they match any filter."""
    ontology = view.store.ontology
    points = []
    for point in sorted(view.successors(entity, str(BRICK.hasPoint))):
        types = view.types(point)
        point_classes = [c for c in types if ontology.is_point_class(c)]
        if not point_classes:
            continue
        if filters and not any(_filter_matches(ontology, f, types) for f in filters):
            continue
        points.append(PointInfo(
            id=point,
            class_=ontology.most_specific(point_classes)[0],
            stream=_literal(view, point, REF.timeseries),
            unit=_literal(view, point, REF.unit),
            quantity_kind=_literal(view, point, REF.quantityKind),
        ))
    return points


def _filter_matches(ontology, point_filter, types: frozenset[str]) -> bool:
    if isinstance(point_filter, TagsMatcher):
        return bool(types & ontology.classes_matching_tags(point_filter.tags))
    if isinstance(point_filter, IsaMatcher):
        return bool(types & ontology.subclasses_of(expand(point_filter.type)))
    return False


def _literal(view: GraphView, entity: str, predicate) -> Optional[str]:
    for value in view.graph.objects(URIRef(entity), predicate):
        return str(from_node(value))
    return None


def entity_class(view: GraphView, entity: str) -> Optional[str]:
    specific = view.store.ontology.most_specific(view.types(entity))
    return specific[0] if specific else None


def evaluate(plan: Plan, store: GraphStore, limits: Optional[Limits] = None,
             model_labels: Optional[dict[str, str]] = None) -> BriqlResponse:
    """
    Evaluate a plan and assemble the entity-list + solution-table response.

    Args:
        plan: Output of plan()
        store: Graph store the plan was built against
        limits: Quality-of-service ceilings (defaults apply when None)
        model_labels: graph id → model id, copied into EntityRecord.model

    Returns:
        BriqlResponse
    """
    limits = limits or Limits()
    budget = _Budget(limits)
    model_labels = model_labels or {}
    query = plan.query
    columns = [v.name for v in query.variables if v.output]
    decls = {v.name: v for v in query.variables}

    rows: list[tuple[str, tuple[tuple[str, str], ...]]] = []
    views: dict[str, GraphView] = {}
    for graph_id in plan.graph_ids:
        view = GraphView(store, graph_id)
        views[graph_id] = view
        found = solve(plan, view, budget)
        projected = {tuple((c, dict(sol)[c]) for c in columns) for sol in found}
        rows.extend((graph_id, row) for row in sorted(projected))

    entities: list[EntityRecord] = []
    index: dict[tuple[str, str], int] = {}
    wanted: dict[tuple[str, str], list[str]] = {}     # which variables bound this entity
    solutions = []
    for graph_id, row in rows:
        cells = {}
        for var, entity in row:
            key = (graph_id, entity)
            if key not in index:
                index[key] = len(entities)
                entities.append(EntityRecord(id=entity, model=model_labels.get(graph_id), graph=graph_id))
                wanted[key] = []
            wanted[key].append(var)
            cells[var] = index[key]
        solutions.append(cells)

    for (graph_id, entity), var_names in wanted.items():
        view = views[graph_id]
        record = entities[index[(graph_id, entity)]]
        fetch = {f for v in var_names for f in decls[v].fetch}
        record.class_ = entity_class(view, entity)
        if "label" in fetch:
            record.label = view.label(entity)
        if "properties" in fetch:
            record.properties = view.properties(entity)
        if "pointinfo" in fetch:
            filter_sets = [decls[v].fetch_points for v in var_names if "pointinfo" in decls[v].fetch]
            # A variable without filters wants every point
            if any(not f for f in filter_sets):
                record.points = point_infos(view, entity, [])
            else:
                record.points = point_infos(view, entity, [f for fs in filter_sets for f in fs])

    logger.info(f"Evaluated query: {len(solutions)} solutions, {len(entities)} entities, {budget.bindings} bindings")
    return BriqlResponse(entities=entities, columns=columns, solutions=solutions, warnings=list(query.warnings))


def describe_entity(store: GraphStore, graph_id: str, entity: str,
                    model: Optional[str] = None) -> Optional[EntityDescription]:
    """Class, properties, direct relationships and points of one entity; None if absent."""
    view = GraphView(store, graph_id)
    node = URIRef(entity)
    if (node, None, None) not in view.graph:
        return None
    ontology = store.ontology
    relationships = sorted(
        (Relationship(relation=str(p), target=str(o))
         for p, o in view.graph.predicate_objects(node)
         if ontology.relation(p) is not None),
        key=lambda r: (r.relation, r.target),
    )
    return EntityDescription(
        id=entity,
        model=model,
        graph=graph_id,
        class_=entity_class(view, entity),
        classes=sorted(view.types(entity)),
        label=view.label(entity),
        properties=view.properties(entity),
        relationships=relationships,
        points=point_infos(view, entity, []),
    )
