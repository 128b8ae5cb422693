"""
SPARQL text emitter for interop, plus a small well-formedness checker.

The emitted text is for export only (the engine evaluates natively). Type
constraints become `rdf:type` patterns (with `rdfs:subClassOf*` for isa,
`brick:hasAssociatedTag` joins for tags), paths become property paths with
`+` or `{min,max}` repetition, fetched attributes become OPTIONAL blocks.
"""

import re

from ..graph.namespaces import BRICK, PROP, RDF, RDFS, REF, TAG, expand, local_name
from .schemas import BriqlQuery, ExactMatcher, IsaMatcher, PropertiesMatcher, TagsMatcher

PREFIXES = {"brick": BRICK, "tag": TAG, "ref": REF, "prop": PROP, "rdf": RDF, "rdfs": RDFS}

OPERATORS = {"eq": "=", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}


def _term(iri: str) -> str:
    for prefix, ns in PREFIXES.items():
        if iri.startswith(str(ns)) and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", iri[len(str(ns)):]):
            return f"{prefix}:{iri[len(str(ns)):]}"
    return f"<{iri}>"


def _literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _repetition(step) -> str:
    if step.min == 1 and step.max is None:
        return "+"
    if step.min == 1 and step.max == 1:
        return ""
    if step.max is None:
        return f"{{{step.min},}}"
    return f"{{{step.min},{step.max}}}"


def _type_patterns(name: str, matcher) -> list[str]:
    v = f"?{name}"
    if isinstance(matcher, ExactMatcher):
        return [f"{v} rdf:type {_term(expand(matcher.type))} ."]
    if isinstance(matcher, IsaMatcher):
        return [f"{v} rdf:type/rdfs:subClassOf* {_term(expand(matcher.type))} ."]
    if isinstance(matcher, TagsMatcher):
        lines = [f"{v} rdf:type {v}_class ."]
        lines += [f"{v}_class brick:hasAssociatedTag {_term(str(TAG[local_name(t)]))} ." for t in sorted(set(matcher.tags))]
        return lines
    if isinstance(matcher, PropertiesMatcher):
        lines = [f"{v} rdf:type {v}_class ."]
        for i, pred in enumerate(matcher.properties):
            value_var = f"{v}_p{i}"
            lines.append(f"{v} {_term(str(PROP[pred.key]))} {value_var} .")
            if pred.op != "exists":
                lines.append(f"FILTER({value_var} {OPERATORS[pred.op]} {_literal(pred.value)})")
        return lines
    return []


def _point_filter(var: str, point_filter) -> list[str]:
    if isinstance(point_filter, TagsMatcher):
        return [f"{var}_class brick:hasAssociatedTag {_term(str(TAG[local_name(t)]))} ." for t in sorted(set(point_filter.tags))]
    return [f"{var}_class rdfs:subClassOf* {_term(expand(point_filter.type))} ."]


def compile_to_sparql_text(query: BriqlQuery) -> str:
    """
    Emit a SELECT DISTINCT query equivalent to a BRIQL query.

    Output is deterministic for a given query. Multiple point filters on one
    variable become a UNION inside the point OPTIONAL block.
    """
    projected: list[str] = []
    where: list[str] = []
    outputs = [v for v in query.variables if v.output] or query.variables

    for var in query.variables:
        where.extend(_type_patterns(var.name, var.brick_type))
        if var.default:
            where.append(f"VALUES ?{var.name} {{ {_term(var.default)} }}")

    for path in query.paths:
        seq = "/".join(f"{_term(expand(s.property))}{_repetition(s)}" for s in path.steps)
        if len(path.steps) > 1:
            seq = f"({seq})"
        where.append(f"?{path.from_ref} {seq} ?{path.to_ref} .")

    for var in outputs:
        v = f"?{var.name}"
        if "id" in var.fetch or not var.fetch:
            projected.append(v)
        if "label" in var.fetch:
            projected.append(f"{v}_label")
            where.append(f"OPTIONAL {{ {v} rdfs:label {v}_label . }}")
        if "properties" in var.fetch:
            projected += [f"{v}_property", f"{v}_property_value"]
            where.append(
                f"OPTIONAL {{ {v} {v}_property {v}_property_value . "
                f'FILTER(STRSTARTS(STR({v}_property), "{PROP}")) }}'
            )
        if "pointinfo" in var.fetch:
            pv = f"{v}_point"
            projected += [pv, f"{pv}_class", f"{pv}_stream", f"{pv}_unit", f"{pv}_quantity_kind"]
            block = [f"{v} brick:hasPoint {pv} .", f"{pv} rdf:type {pv}_class ."]
            filters = [_point_filter(pv, f) for f in var.fetch_points]
            if len(filters) == 1:
                block += filters[0]
            elif filters:
                block.append(" UNION ".join("{ " + " ".join(f) + " }" for f in filters))
            block += [
                f"OPTIONAL {{ {pv} ref:timeseries {pv}_stream . }}",
                f"OPTIONAL {{ {pv} ref:unit {pv}_unit . }}",
                f"OPTIONAL {{ {pv} ref:quantityKind {pv}_quantity_kind . }}",
            ]
            where.append("OPTIONAL { " + " ".join(block) + " }")

    lines = [f"PREFIX {p}: <{ns}>" for p, ns in PREFIXES.items()]
    lines.append(f"SELECT DISTINCT {' '.join(projected)} WHERE {{")
    lines += [f"  {line}" for line in where]
    lines.append("}")
    return "\n".join(lines) + "\n"


def well_formedness_problems(text: str) -> list[str]:
    """
    Structural checks on emitted SPARQL: balanced braces/parentheses and every
    projected variable bound in the WHERE clause. Returns [] when clean.
    """
    problems = []
    # Drop string literals and IRIs before counting brackets
    stripped = re.sub(r'"(?:[^"\\]|\\.)*"', '""', text)
    stripped = re.sub(r"<[^<>\s]*>", "<>", stripped)

    depth = {"{": 0, "(": 0}
    pairs = {"}": "{", ")": "("}
    for ch in stripped:
        if ch in depth:
            depth[ch] += 1
        elif ch in pairs:
            depth[pairs[ch]] -= 1
            if depth[pairs[ch]] < 0:
                problems.append(f"unbalanced '{ch}'")
                depth[pairs[ch]] = 0
    for opener, count in depth.items():
        if count:
            problems.append(f"{count} unclosed '{opener}'")

    match = re.search(r"SELECT\s+(?:DISTINCT\s+)?(.*?)\s+WHERE\s*\{", stripped, re.S)
    if not match:
        problems.append("no SELECT ... WHERE clause")
        return problems
    projected = re.findall(r"\?(\w+)", match.group(1))
    body = stripped[match.end():]
    bound = set(re.findall(r"\?(\w+)", body))
    for var in projected:
        if var not in bound:
            problems.append(f"projected variable ?{var} is never bound")
    if not projected:
        problems.append("empty projection")
    return problems
