"""
Brick ontology: class hierarchy, tag index and relation definitions.

An Ontology is read from a Turtle document:
  - classes are `owl:Class` subjects or anything on either side of `rdfs:subClassOf`
  - tags come from `brick:hasAssociatedTag tag:X`
  - relation pairs come from `owl:inverseOf`; `owl:TransitiveProperty` marks
    transitivity and `ref:allowsCycles true` marks relations that may form cycles

The platform ships a curated subset (brickyard/data/brick_subset.ttl); larger
ontology files in the same format load the same way.
"""

from collections import defaultdict
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional

from pydantic import BaseModel, Field
from rdflib import Literal, URIRef

from ..exceptions import OntologyError, UnknownClassError
from ..logger import get_module_logger
from .namespaces import BRICK, OWL, RDF, RDFS, REF, local_name
from .turtle import parse_turtle

logger = get_module_logger("graph.ontology")


class OntologyClass(BaseModel):
    """One class of the vocabulary."""
    class_iri: str
    parent_classes: frozenset[str] = Field(default_factory=frozenset)
    tags: frozenset[str] = Field(default_factory=frozenset)    # tag local names, e.g. "Air"


class RelationDef(BaseModel):
    """A relationship with its reciprocal."""
    name: str
    inverse: str
    transitive: bool = False
    cyclic_allowed: bool = False    # only feeds/isFedBy in the shipped subset


class Ontology:
    """Read-only view over classes, tags and relations."""

    def __init__(self, classes: dict[str, OntologyClass], relations: dict[str, RelationDef]):
        self.classes = classes
        self.relations = relations

        self._children: dict[str, set[str]] = defaultdict(set)
        for cls in classes.values():
            for parent in cls.parent_classes:
                self._children[parent].add(cls.class_iri)

        self._tag_index: dict[str, set[str]] = defaultdict(set)
        for cls in classes.values():
            for tag in cls.tags:
                self._tag_index[tag].add(cls.class_iri)

        self._down: dict[str, frozenset[str]] = {}
        self._up: dict[str, frozenset[str]] = {}

    def __len__(self) -> int:
        return len(self.classes)

    def has_class(self, class_iri: str) -> bool:
        return str(class_iri) in self.classes

    def require_class(self, class_iri: str) -> str:
        class_iri = str(class_iri)
        if class_iri not in self.classes:
            raise UnknownClassError(f"Unknown class: {class_iri}", details={"class": class_iri})
        return class_iri

    def _closure(self, start: str, edges, cache: dict) -> frozenset[str]:
        if start in cache:
            return cache[start]
        seen = {start}
        stack = [start]
        while stack:
            for nxt in edges(stack.pop()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        cache[start] = frozenset(seen)
        return cache[start]

    def subclasses_of(self, class_iri: str) -> frozenset[str]:
        """Reflexive-transitive closure downwards (includes the class itself)."""
        class_iri = self.require_class(class_iri)
        return self._closure(class_iri, lambda c: self._children.get(c, ()), self._down)

    def superclasses_of(self, class_iri: str) -> frozenset[str]:
        """Reflexive-transitive closure upwards."""
        class_iri = self.require_class(class_iri)
        return self._closure(
            class_iri,
            lambda c: self.classes[c].parent_classes if c in self.classes else (),
            self._up,
        )

    def classes_matching_tags(self, tags: Iterable[str]) -> frozenset[str]:
        """Classes whose tag set is a superset of `tags`; empty input matches everything."""
        tags = {local_name(str(t)) for t in tags}
        if not tags:
            return frozenset(self.classes)
        result: Optional[set[str]] = None
        for tag in tags:
            members = self._tag_index.get(tag, set())
            result = set(members) if result is None else result & members
            if not result:
                return frozenset()
        return frozenset(result)

    def tags_of(self, class_iri: str) -> frozenset[str]:
        return self.classes[self.require_class(class_iri)].tags

    def parents_of(self, class_iri: str) -> frozenset[str]:
        return self.classes[self.require_class(class_iri)].parent_classes

    def is_point_class(self, class_iri: str) -> bool:
        class_iri = str(class_iri)
        if class_iri not in self.classes:
            return False
        return str(BRICK.Point) in self.superclasses_of(class_iri)

    def relation(self, iri: str) -> Optional[RelationDef]:
        return self.relations.get(str(iri))

    def most_specific(self, class_iris: Iterable[str]) -> list[str]:
        """
        The known classes in the input that have no subclass in the input,
        sorted. Unknown classes are returned after them, also sorted.
        """
        known = sorted({str(c) for c in class_iris if str(c) in self.classes})
        unknown = sorted({str(c) for c in class_iris if str(c) not in self.classes})
        specific = [
            c for c in known
            if not any(other != c and c in self.superclasses_of(other) for other in known)
        ]
        return specific + unknown


def _check_acyclic(classes: dict[str, OntologyClass]) -> None:
    """Raise OntologyError if parent links contain a cycle (self-parent included)."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {c: WHITE for c in classes}

    for root in sorted(classes):
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(sorted(classes[root].parent_classes)))]
        colour[root] = GREY
        while stack:
            node, parents = stack[-1]
            advanced = False
            for parent in parents:
                state = colour.get(parent, BLACK)
                if state == GREY:
                    raise OntologyError(
                        f"Subclass cycle through {local_name(parent)}",
                        details={"class": parent, "via": node},
                    )
                if state == WHITE:
                    colour[parent] = GREY
                    stack.append((parent, iter(sorted(classes[parent].parent_classes))))
                    advanced = True
                    break
            if not advanced:
                colour[node] = BLACK
                stack.pop()


def load_ontology(document: str) -> Ontology:
    """
    Build an Ontology from a Turtle document.

    Args:
        document: Ontology text; default prefixes are implicit

    Returns:
        Ontology with class table, tag index and relation definitions

    Raises:
        OntologyError: syntax error (with line) or a cycle in the subclass DAG
    """
    graph = parse_turtle(document, error_cls=OntologyError)

    parents: dict[str, set[str]] = defaultdict(set)
    tags: dict[str, set[str]] = defaultdict(set)
    declared: set[str] = set()

    for cls in graph.subjects(RDF.type, OWL.Class):
        if isinstance(cls, URIRef):
            declared.add(str(cls))
    for child, parent in graph.subject_objects(RDFS.subClassOf):
        # Blank-node parents are OWL restrictions; not part of the class tree
        if isinstance(child, URIRef) and isinstance(parent, URIRef):
            declared.update((str(child), str(parent)))
            parents[str(child)].add(str(parent))
    for cls, tag in graph.subject_objects(BRICK.hasAssociatedTag):
        if isinstance(cls, URIRef):
            declared.add(str(cls))
            tags[str(cls)].add(local_name(str(tag)))

    classes = {
        iri: OntologyClass(class_iri=iri, parent_classes=frozenset(parents[iri]), tags=frozenset(tags[iri]))
        for iri in declared
    }
    _check_acyclic(classes)

    transitive = {str(p) for p in graph.subjects(RDF.type, OWL.TransitiveProperty)}
    cyclic = {str(p) for p, v in graph.subject_objects(REF.allowsCycles) if isinstance(v, Literal) and v.toPython() is True}

    relations: dict[str, RelationDef] = {}
    for a, b in graph.subject_objects(OWL.inverseOf):
        for name, inverse in ((str(a), str(b)), (str(b), str(a))):
            relations[name] = RelationDef(
                name=name,
                inverse=inverse,
                transitive=name in transitive,
                cyclic_allowed=name in cyclic,
            )

    logger.info(f"Loaded ontology: {len(classes)} classes, {len(relations)} relations")
    return Ontology(classes, relations)


@lru_cache(maxsize=1)
def default_ontology() -> Ontology:
    """The curated Brick subset shipped with the package."""
    text = resources.files("brickyard.data").joinpath("brick_subset.ttl").read_text(encoding="utf-8")
    return load_ontology(text)
