"""
Namespaces shared by the ontology, model documents and the query engine.

BRICK / TAG are the public Brick vocabulary. REF holds the platform's own
point-metadata predicates (stream reference, unit, quantity kind) and the
`allowsCycles` ontology annotation. PROP holds entity properties such as
`prop:rangeMin`.
"""

from rdflib import Namespace
from rdflib.namespace import OWL, RDF, RDFS, XSD

BRICK = Namespace("https://brickschema.org/schema/Brick#")
TAG = Namespace("https://brickschema.org/schema/BrickTag#")
REF = Namespace("urn:brickyard:ref#")
PROP = Namespace("urn:brickyard:prop#")

# Pre-declared for every ontology and model document
DEFAULT_PREFIXES = {
    "brick": BRICK,
    "tag": TAG,
    "ref": REF,
    "prop": PROP,
    "rdf": RDF,
    "rdfs": RDFS,
    "owl": OWL,
    "xsd": XSD,
}

# Predicates that annotate entities rather than relate them
METADATA_PREDICATES = frozenset({
    str(RDF.type),
    str(RDFS.label),
    str(REF.timeseries),
    str(REF.unit),
    str(REF.quantityKind),
})


def local_name(iri: str) -> str:
    """Fragment or last path segment of an IRI ("...Brick#AHU" -> "AHU")."""
    for sep in ("#", "/", ":"):
        if sep in iri:
            return iri.rsplit(sep, 1)[1]
    return iri


def is_entity_property(predicate: str) -> bool:
    return str(predicate).startswith(str(PROP))


def expand(name: str, default=BRICK) -> str:
    """
    Resolve a short name to a full IRI.

    Full IRIs (anything with a scheme) pass through; "prefix:Local" uses the
    default prefixes; bare names land in the default namespace.
    """
    if "://" in name or name.startswith("urn:"):
        return name
    if ":" in name:
        prefix, local = name.split(":", 1)
        if prefix in DEFAULT_PREFIXES:
            return str(DEFAULT_PREFIXES[prefix][local])
    return str(default[name])
