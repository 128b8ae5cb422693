"""
Turtle-subset reader used for both ontology and model documents.

The default prefixes are prepended to the caller's text so documents may use
`brick:`, `ref:`, `prop:` and friends without declaring them. Error line
numbers are shifted back so they point into the caller's document.
"""

from rdflib import Graph
from rdflib.plugins.parsers.notation3 import BadSyntax

from ..exceptions import ParseError
from ..logger import get_module_logger
from .namespaces import DEFAULT_PREFIXES

logger = get_module_logger("graph.turtle")

PREFIX_HEADER = "".join(f"@prefix {p}: <{ns}> .\n" for p, ns in DEFAULT_PREFIXES.items())
HEADER_LINES = PREFIX_HEADER.count("\n")


def parse_turtle(text: str, error_cls=ParseError) -> Graph:
    """
    Parse a Turtle document into a fresh rdflib Graph.

    Args:
        text: Document text (the default prefixes are implicit)
        error_cls: ParseError subclass to raise (OntologyError for ontologies)

    Returns:
        rdflib Graph holding the document's triples
    """
    graph = Graph()
    if not text.strip():
        return graph
    try:
        graph.parse(data=PREFIX_HEADER + text, format="turtle")
    except BadSyntax as e:
        # BadSyntax.lines is the zero-based line index inside the parsed text
        line = max(1, e.lines + 1 - HEADER_LINES)
        # message embeds the header-shifted line, so report the bare reason
        reason = getattr(e, "_why", "bad syntax")
        logger.warning(f"Turtle syntax error at line {line}: {reason}")
        raise error_cls(f"Syntax error at line {line}: {reason}", line=line)
    except Exception as e:
        # rdflib raises plain exceptions for e.g. undeclared prefixes
        raise error_cls(f"Cannot parse document: {e}")
    return graph
