"""
BRIQL document parsing: decode, repair if needed, validate.
"""

import json
from typing import Any, Union

from pydantic import ValidationError

from ..exceptions import QueryValidationError
from ..logger import get_module_logger
from .preprocessor import repair_document
from .schemas import BriqlQuery

logger = get_module_logger("briql.parser")

# pydantic error type → stable reason code
REASONS = {
    "extra_forbidden": "unknown_key",
    "union_tag_invalid": "unknown_matcher",
    "union_tag_not_found": "missing_matcher",
    "missing": "missing_field",
    "greater_than_equal": "invalid_bounds",
    "too_short": "empty_list",
    "string_pattern_mismatch": "invalid_name",
    "literal_error": "invalid_value",
    "model_type": "invalid_value",
    "model_attributes_type": "invalid_value",
}

# Lower sorts first when a document has several problems
PRIORITY = {
    "extra_forbidden": 0,
    "union_tag_invalid": 1,
    "union_tag_not_found": 1,
    "missing": 9,
}


def json_path(loc: tuple) -> str:
    """('variables', 0, 'brick_type') -> '$.variables[0].brick_type'"""
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _raise_for(errors: list[dict]) -> None:
    err = min(errors, key=lambda e: (PRIORITY.get(e["type"], 5), json_path(e["loc"])))
    ctx = err.get("ctx") or {}
    reason = REASONS.get(err["type"], err["type"])
    path = ctx.get("path") or json_path(err["loc"])
    raise QueryValidationError(
        f"Invalid query at {path}: {err['msg']}",
        reason=reason,
        path=path,
        details={"errors": len(errors)},
    )


def decode_document(text: str) -> tuple[Any, list[str]]:
    """Strict JSON decode, falling back to the repair pass."""
    try:
        return json.loads(text), []
    except json.JSONDecodeError as first:
        repaired, warnings = repair_document(text)
        if not warnings:
            raise QueryValidationError(
                f"Malformed JSON: {first.msg}", reason="malformed_json",
                details={"line": first.lineno, "column": first.colno},
            )
        try:
            return json.loads(repaired), warnings
        except json.JSONDecodeError:
            # Report the position in the caller's text, not in the repaired one
            raise QueryValidationError(
                f"Malformed JSON: {first.msg}", reason="malformed_json",
                details={"line": first.lineno, "column": first.colno},
            )


def parse_query(document: Union[str, bytes, dict, BriqlQuery]) -> BriqlQuery:
    """
    Parse and validate a BRIQL query document.

    Args:
        document: JSON text, an already-decoded dict, or a BriqlQuery

    Returns:
        Validated BriqlQuery (repairs, if any, in .warnings)

    Raises:
        QueryValidationError: malformed JSON, unknown key or matcher,
            dangling reference, bad bounds
    """
    if isinstance(document, BriqlQuery):
        return document

    warnings: list[str] = []
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    if isinstance(document, str):
        data, warnings = decode_document(document)
    else:
        data = document

    if not isinstance(data, dict):
        raise QueryValidationError("Query document must be a JSON object", reason="invalid_value")

    try:
        query = BriqlQuery.model_validate(data)
    except ValidationError as e:
        _raise_for(e.errors(include_url=False))

    query._warnings = list(warnings)
    logger.debug(f"Parsed query: {len(query.variables)} variables, {len(query.paths)} paths")
    return query


def canonical_json(query: BriqlQuery) -> str:
    """Sorted keys, no insignificant whitespace; byte-stable for a given query."""
    body = query.model_dump(mode="json", by_alias=True)
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
