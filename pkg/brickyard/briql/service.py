"""
BRIQL invocation service: access control, model resolution, evaluation.

Lifecycle of an invocation:
  1. Resolve the query (literal body or stored reference)
  2. Check reader access on EVERY requested model before any evaluation
  3. Resolve model ids to graphs, pin arguments, plan, evaluate
  4. Attribute each entity to the model it was found in

Stored queries are readable by any authenticated principal; only storing a
version needs a modeler grant on the owning organisation.
"""

from typing import Optional, Union

from ..directory.models import AccessDecision
from ..directory.registry import Directory, split_model_id
from ..exceptions import AuthorizationError, InvalidArgumentError, NotFoundError, QueryValidationError
from ..graph.store import GraphStore
from ..logger import get_module_logger
from .evaluator import Limits, describe_entity, evaluate
from .parser import parse_query
from .planner import plan
from .schemas import BriqlQuery, BriqlResponse, EntityDescription, StoredQueryRef
from .store import QueryStore, StoredQuery

logger = get_module_logger("briql.service")

QueryOrRef = Union[BriqlQuery, StoredQueryRef, tuple, str, bytes, dict]


class BriqlService:
    """
    Query entry point used by the API and by installed applications.

    Args:
        graphs: Graph store holding model graphs
        directory: Access control and model resolution
        queries: Stored query versions
        limits: Per-invocation ceilings
    """

    def __init__(self, graphs: GraphStore, directory: Directory, queries: QueryStore,
                 limits: Optional[Limits] = None):
        self.graphs = graphs
        self.directory = directory
        self.queries = queries
        self.limits = limits or Limits()

    def resolve_query(self, query_or_ref: QueryOrRef) -> BriqlQuery:
        """A query body, a StoredQueryRef or a (query_id, version) tuple."""
        if isinstance(query_or_ref, tuple):
            query_id, *rest = query_or_ref
            query_or_ref = StoredQueryRef(query_id=query_id, version=rest[0] if rest else None)
        if isinstance(query_or_ref, StoredQueryRef):
            return self.queries.get_query(query_or_ref.query_id, query_or_ref.version).body
        return parse_query(query_or_ref)

    def authorize_models(self, principal: str, model_ids: list[str]) -> None:
        """Reader access on every model, or one error naming all denied ids."""
        if not model_ids:
            raise InvalidArgumentError("At least one model id is required")
        denied = [
            m for m in model_ids
            if self.directory.check_access(principal, split_model_id(m)[0], "reader") is AccessDecision.DENY
        ]
        if denied:
            logger.warning(f"Denied invocation for {principal} on {denied}")
            raise AuthorizationError("reader access denied", denied=denied)

    def _graphs_for(self, model_ids: list[str]) -> tuple[list[str], dict[str, str]]:
        graph_ids: list[str] = []
        labels: dict[str, str] = {}
        for model_id in model_ids:
            graph_id = self.directory.resolve_model(model_id).graph_id
            if graph_id not in labels:
                labels[graph_id] = model_id
                graph_ids.append(graph_id)
        return graph_ids, labels

    def invoke(self, query_or_ref: QueryOrRef, model_ids: list[str], args: Optional[dict[str, str]] = None,
               principal: str = "") -> BriqlResponse:
        """
        Run a query over one or more models.

        Args:
            query_or_ref: Query body or stored reference
            model_ids: "<target>" (active published) or "<target>@<n>"
            args: variable name → entity IRI; overrides defaults
            principal: Acting principal id

        Returns:
            BriqlResponse (descriptions filled in describe mode)

        Raises:
            AuthorizationError: some model is not readable (nothing evaluated)
            QueryValidationError: invalid body or argument name
            ResourceLimitError: binding or time ceiling exceeded
        """
        query = self.resolve_query(query_or_ref)
        self.authorize_models(principal, model_ids)

        args = dict(args or {})
        declared = {v.name for v in query.variables}
        for name in args:
            if name not in declared:
                raise QueryValidationError(
                    f"Argument {name!r} does not name a declared variable",
                    reason="unknown_argument", path=f"$.args.{name}",
                )

        graph_ids, labels = self._graphs_for(model_ids)

        if query.mode == "describe":
            return self._describe_all(query, args, graph_ids, labels)

        result = evaluate(plan(query, self.graphs, graph_ids, args), self.graphs, self.limits, labels)
        logger.info(f"Invocation by {principal} over {model_ids}: {len(result.solutions)} solutions")
        return result

    def _describe_all(self, query: BriqlQuery, args: dict[str, str], graph_ids: list[str],
                      labels: dict[str, str]) -> BriqlResponse:
        bound = {v.name: args.get(v.name, v.default) for v in query.variables}
        for i, var in enumerate(query.variables):
            if not bound[var.name]:
                raise QueryValidationError(
                    f"Describe mode needs variable {var.name!r} bound",
                    reason="unbound_describe_variable", path=f"$.variables[{i}]",
                )
        descriptions: list[EntityDescription] = []
        for graph_id in graph_ids:
            for entity in dict.fromkeys(bound.values()):
                found = describe_entity(self.graphs, graph_id, entity, labels[graph_id])
                if found is not None:
                    descriptions.append(found)
        return BriqlResponse(descriptions=descriptions, warnings=list(query.warnings))

    def describe(self, entity: str, model_ids: list[str], principal: str) -> EntityDescription:
        """Class, properties, relationships and points of an entity (first model that holds it)."""
        self.authorize_models(principal, model_ids)
        graph_ids, labels = self._graphs_for(model_ids)
        for graph_id in graph_ids:
            found = describe_entity(self.graphs, graph_id, entity, labels[graph_id])
            if found is not None:
                return found
        raise NotFoundError(f"Entity not found: {entity}", details={"entity": entity, "models": model_ids})

    def store_query(self, principal: str, body: QueryOrRef, query_id: str, org_id: str) -> tuple[str, int]:
        """Store a new version owned by `org_id`; the caller must be modeler there."""
        self.directory.require(principal, [org_id], "modeler")
        if org_id not in self.directory.orgs:
            raise InvalidArgumentError(f"Query owner must be an organisation: {org_id}", details={"owner": org_id})
        return self.queries.store_query(body, query_id, org_id)

    def get_query(self, query_id: str, version: Optional[int] = None) -> StoredQuery:
        return self.queries.get_query(query_id, version)
