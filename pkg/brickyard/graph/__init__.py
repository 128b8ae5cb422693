"""
Brick graph layer: ontology, named-graph triple store, Turtle reader.

Public API surface:
  Ontology       : load_ontology, default_ontology, Ontology, OntologyClass, RelationDef
  Triple store   : GraphStore, reach
  Vocabulary     : BRICK, TAG, REF, PROP namespaces
"""

from .namespaces import BRICK, PROP, REF, TAG, expand, local_name
from .ontology import Ontology, OntologyClass, RelationDef, default_ontology, load_ontology
from .store import GraphStore, from_node, reach, to_node

__all__ = [
    "BRICK",
    "PROP",
    "REF",
    "TAG",
    "expand",
    "local_name",
    "Ontology",
    "OntologyClass",
    "RelationDef",
    "default_ontology",
    "load_ontology",
    "GraphStore",
    "from_node",
    "reach",
    "to_node",
]
