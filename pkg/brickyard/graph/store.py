"""
Named-graph triple store with ontology-aware writes.

One rdflib Graph per named graph. Writes are serialized per graph and applied
copy-on-write: a batch is added to a private copy which then replaces the
published reference in one assignment, so a reader holding `snapshot()` never
sees half a batch.

Pipeline position: below the directory (which owns graph lifecycle) and the
query engine (which reads snapshots).
"""

import threading
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from rdflib import Graph, Literal, URIRef
from rdflib.term import Identifier
from rdflib.util import from_n3

from ..exceptions import (
    GraphPublishedError,
    InvalidArgumentError,
    NotFoundError,
    ParseError,
    UnknownRelationError,
)
from ..logger import get_module_logger
from ..storage import JsonStore, safe_key
from .namespaces import PROP, RDF, XSD, local_name
from .ontology import Ontology
from .turtle import parse_turtle

logger = get_module_logger("graph.store")

Term = Union[str, int, float, bool, Identifier]
TripleLike = tuple[Term, Term, Term]

# Literal datatypes accepted in stored triples (None = plain / language-tagged)
ALLOWED_DATATYPES = {
    None,
    XSD.string,
    XSD.integer,
    XSD.int,
    XSD.long,
    XSD.decimal,
    XSD.double,
    XSD.float,
    XSD.boolean,
}


def to_node(value: Term) -> Identifier:
    """
    Coerce a Python value to an rdflib term.

    Plain strings are IRIs; wrap text in rdflib.Literal to store a string
    literal. Numbers and booleans become typed literals.
    """
    if isinstance(value, Identifier):
        return value
    if isinstance(value, str):
        if not value:
            raise InvalidArgumentError("Empty IRI")
        return URIRef(value)
    if isinstance(value, (bool, int, float)):
        return Literal(value)
    raise InvalidArgumentError(f"Unsupported term type: {type(value).__name__}")


def triple_key(triple) -> tuple[str, str, str]:
    """Total order over triples of mixed term types."""
    return tuple(term.n3() for term in triple)


def from_node(node: Identifier) -> Any:
    """IRIs to plain str, literals to their Python value."""
    if isinstance(node, Literal):
        return node.toPython()
    return str(node)


class GraphStore:
    """
    Named graphs keyed by graph id.

    Args:
        ontology: Vocabulary used for inverse materialization and traversal
        root: Optional directory for snapshot persistence
    """

    def __init__(self, ontology: Ontology, root: Optional[Path] = None):
        self.ontology = ontology
        self.root = Path(root) if root else None
        self._graphs: dict[str, Graph] = {}
        self._frozen: set[str] = set()
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # --- lifecycle ---

    def create_graph(self, graph_id: str) -> str:
        graph_id = str(graph_id)
        if not graph_id:
            raise InvalidArgumentError("Empty graph id")
        with self._registry_lock:
            if graph_id in self._graphs:
                raise InvalidArgumentError(f"Graph already exists: {graph_id}", details={"graph_id": graph_id})
            self._graphs[graph_id] = Graph(identifier=URIRef(graph_id))
            self._locks[graph_id] = threading.Lock()
        logger.info(f"Created graph {graph_id}")
        return graph_id

    def has_graph(self, graph_id: str) -> bool:
        return str(graph_id) in self._graphs

    def drop_graph(self, graph_id: str) -> None:
        """Remove an unpublished graph (used to roll back a failed upload)."""
        graph_id = self._require(graph_id)
        with self._registry_lock:
            if graph_id in self._frozen:
                raise GraphPublishedError(f"Graph {graph_id} is published and immutable", details={"graph_id": graph_id})
            del self._graphs[graph_id]
            del self._locks[graph_id]
        logger.info(f"Dropped graph {graph_id}")

    def list_graphs(self) -> list[str]:
        return sorted(self._graphs)

    def freeze(self, graph_id: str) -> None:
        """Make a graph immutable; later writes raise GraphPublishedError."""
        graph_id = self._require(graph_id)
        with self._locks[graph_id]:
            self._frozen.add(graph_id)
        logger.info(f"Froze graph {graph_id}")

    def is_frozen(self, graph_id: str) -> bool:
        return str(graph_id) in self._frozen

    def snapshot(self, graph_id: str) -> Graph:
        """Current graph object. Treat as read-only; writers never mutate it."""
        return self._graphs[self._require(graph_id)]

    def _require(self, graph_id: str) -> str:
        graph_id = str(graph_id)
        if graph_id not in self._graphs:
            raise NotFoundError(f"Graph not found: {graph_id}", details={"graph_id": graph_id})
        return graph_id

    # --- writes ---

    def _check_literal(self, node: Identifier) -> None:
        if isinstance(node, Literal) and node.datatype not in ALLOWED_DATATYPES:
            raise InvalidArgumentError(
                f"Unsupported literal datatype {node.datatype}",
                details={"datatype": str(node.datatype)},
            )

    def assert_triples(self, graph_id: str, triples: Iterable[TripleLike]) -> int:
        """
        Insert a batch of triples, materializing reciprocal relations.

        Args:
            graph_id: Target graph (must exist and not be frozen)
            triples: (subject, predicate, object) tuples; see to_node for coercion

        Returns:
            Number of NEW triples stored, inverses included
        """
        graph_id = self._require(graph_id)
        batch = []
        for s, p, o in triples:
            s, p, o = to_node(s), to_node(p), to_node(o)
            if not isinstance(s, URIRef) or not isinstance(p, URIRef):
                raise InvalidArgumentError("Subject and predicate must be IRIs", details={"subject": str(s)})
            self._check_literal(o)
            batch.append((s, p, o))
            relation = self.ontology.relation(p)
            if relation is not None:
                if not isinstance(o, URIRef):
                    raise InvalidArgumentError(
                        f"Relation {local_name(str(p))} needs an entity object, got a literal",
                        details={"subject": str(s), "predicate": str(p)},
                    )
                batch.append((o, URIRef(relation.inverse), s))

        with self._locks[graph_id]:
            if graph_id in self._frozen:
                raise GraphPublishedError(f"Graph {graph_id} is published and immutable", details={"graph_id": graph_id})
            current = self._graphs[graph_id]
            working = Graph(identifier=current.identifier)
            working += current
            added = 0
            for triple in batch:
                if triple not in working:
                    working.add(triple)
                    added += 1
            self._graphs[graph_id] = working

        logger.debug(f"Asserted {added} new triples into {graph_id}")
        return added

    # --- reads ---

    def scan(self, graph_id: str, s: Optional[Term] = None, p: Optional[Term] = None,
             o: Optional[Term] = None) -> list[tuple[Identifier, Identifier, Identifier]]:
        """Pattern scan; None is a wildcard. Returns rdflib terms, sorted."""
        graph = self.snapshot(graph_id)
        pattern = tuple(None if t is None else to_node(t) for t in (s, p, o))
        return sorted(graph.triples(pattern), key=triple_key)

    def entity_properties(self, graph_id: str, entity: str) -> dict[str, Any]:
        """prop:* annotations of an entity, keyed by local name."""
        graph = self.snapshot(graph_id)
        props = {}
        for p, o in graph.predicate_objects(URIRef(entity)):
            if str(p).startswith(str(PROP)):
                props[local_name(str(p))] = from_node(o)
        return props

    def types_of(self, graph_id: str, entity: str) -> set[str]:
        graph = self.snapshot(graph_id)
        return {str(c) for c in graph.objects(URIRef(entity), RDF.type)}

    def entities_of_type(self, graph_id: str, class_iri: str, include_subclasses: bool = True) -> set[str]:
        """Entities typed with the class (exact) or any of its subclasses (isa)."""
        graph = self.snapshot(graph_id)
        classes = self.ontology.subclasses_of(class_iri) if include_subclasses else {self.ontology.require_class(class_iri)}
        result = set()
        for cls in classes:
            result.update(str(e) for e in graph.subjects(RDF.type, URIRef(cls)) if isinstance(e, URIRef))
        return result

    def transitive_reach(self, graph_id: str, start: str, relation: str, min_hops: int = 1,
                         max_hops: Optional[int] = None) -> set[str]:
        """
        Nodes at the end of a walk of min_hops..max_hops edges of `relation`.

        max_hops=None means unbounded. Walks may revisit nodes, so `start`
        is included when a qualifying cycle returns to it. Traversal keeps a
        visited set over (node, hops-so-far capped at min_hops) and therefore
        terminates on cyclic graphs.
        """
        if self.ontology.relation(relation) is None:
            raise UnknownRelationError(f"Unknown relation: {relation}", details={"relation": str(relation)})
        if min_hops < 1:
            raise InvalidArgumentError("min_hops must be >= 1", details={"min_hops": min_hops})
        if max_hops is not None and max_hops < min_hops:
            raise InvalidArgumentError("max_hops must be >= min_hops", details={"min_hops": min_hops, "max_hops": max_hops})

        graph = self.snapshot(graph_id)
        predicate = URIRef(relation)
        return reach(lambda n: graph.objects(URIRef(n), predicate), str(start), min_hops, max_hops,
                     node_count=len(set(graph.all_nodes())))

    # --- documents and snapshots ---

    def parse_model_document(self, text: str) -> list[tuple[Identifier, Identifier, Identifier]]:
        """Parse a Turtle-subset model document into triples (line numbers refer to `text`)."""
        graph = parse_turtle(text, error_cls=ParseError)
        return sorted(graph, key=triple_key)

    def write_snapshot(self, graph_id: str, path: Path) -> Path:
        """One sorted N3 triple per line, tab separated; byte-reproducible."""
        graph = self.snapshot(graph_id)
        lines = sorted(f"{s.n3()}\t{p.n3()}\t{o.n3()}" for s, p, o in graph)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    @staticmethod
    def read_snapshot(path: Path) -> list[tuple[Identifier, Identifier, Identifier]]:
        triples = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            # IRIs never contain tabs; the literal may
            s, p, o = line.split("\t", 2)
            triples.append((from_n3(s), from_n3(p), from_n3(o)))
        return triples

    def flush(self) -> None:
        """Write every graph to `root` with an index of graph ids and frozen flags."""
        if self.root is None:
            return
        index = JsonStore(self.root)
        entries = {}
        for graph_id in self.list_graphs():
            file_name = f"{safe_key(graph_id)}.tsv"
            self.write_snapshot(graph_id, self.root / file_name)
            entries[graph_id] = {"file": file_name, "frozen": graph_id in self._frozen}
        index.put("index", entries)
        logger.info(f"Flushed {len(entries)} graphs to {self.root}")

    def restore(self) -> int:
        """Reload graphs written by flush(); returns the number restored."""
        if self.root is None or not self.root.exists():
            return 0
        entries = JsonStore(self.root).get("index") or {}
        for graph_id, entry in entries.items():
            graph = Graph(identifier=URIRef(graph_id))
            for triple in self.read_snapshot(self.root / entry["file"]):
                graph.add(triple)
            self._graphs[graph_id] = graph
            self._locks[graph_id] = threading.Lock()
            if entry.get("frozen"):
                self._frozen.add(graph_id)
        logger.info(f"Restored {len(entries)} graphs from {self.root}")
        return len(entries)


def reach(successors, start: str, min_hops: int, max_hops: Optional[int], node_count: int) -> set[str]:
    """
    Walk-semantics reachability over an arbitrary successor function.

    Shared by the graph store and the query evaluator. A bound of
    min_hops + node_count - 1 or more is equivalent to no bound.
    """
    if max_hops is not None and max_hops < min_hops + max(node_count, 1) - 1:
        result: set[str] = set()
        frontier = {start}
        for step in range(1, max_hops + 1):
            frontier = {str(n) for node in frontier for n in successors(node)}
            if not frontier:
                break
            if step >= min_hops:
                result |= frontier
        return result

    seen = {(start, 0)}
    queue = [(start, 0)]
    result = set()
    while queue:
        node, hops = queue.pop()
        for nxt in successors(node):
            nxt = str(nxt)
            state = (nxt, min(hops + 1, min_hops))
            if state in seen:
                continue
            seen.add(state)
            if state[1] == min_hops:
                result.add(nxt)
            queue.append(state)
    return result
