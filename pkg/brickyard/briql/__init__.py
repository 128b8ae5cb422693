"""
BRIQL: the JSON graph query language over Brick models.

Public API surface:
  - parse_query(document) -> BriqlQuery
  - plan(query, store, graph_ids, args) -> Plan
  - evaluate(plan, store, limits) -> BriqlResponse
  - BriqlService: invoke, describe, store_query, get_query
  - QueryStore: versioned stored queries
  - compile_to_sparql_text(query) -> str
"""

from .evaluator import Limits, describe_entity, evaluate
from .parser import canonical_json, parse_query
from .planner import GraphView, Plan, plan
from .preprocessor import repair_document
from .schemas import (
    BriqlQuery,
    BriqlResponse,
    EntityDescription,
    EntityRecord,
    PointInfo,
    StoredQueryRef,
    VariableDecl,
)
from .service import BriqlService
from .sparql import compile_to_sparql_text, well_formedness_problems
from .store import QueryStore, StoredQuery

__all__ = [
    "BriqlQuery",
    "BriqlResponse",
    "BriqlService",
    "EntityDescription",
    "EntityRecord",
    "GraphView",
    "Limits",
    "Plan",
    "PointInfo",
    "QueryStore",
    "StoredQuery",
    "StoredQueryRef",
    "VariableDecl",
    "canonical_json",
    "compile_to_sparql_text",
    "describe_entity",
    "evaluate",
    "parse_query",
    "plan",
    "repair_document",
    "well_formedness_problems",
]
