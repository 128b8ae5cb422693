"""
Query document repair pass.

Hand-written query documents (including ones pasted from prose) arrive with a
small set of recurring JSON malformations. This pass runs only when strict
decoding fails and fixes exactly these two:
  1. A bare member list with no enclosing object: `"variables": [...] ...`
  2. An array closed too early: `... }] ], { ...` inside an object, where the
     stray `]` leaves the next array element stranded in object context

Design principle: FIX & CONTINUE on the known cases, record a warning for
each repair, and leave anything else for the strict decoder to reject.

Pipeline position: Stage 1 of 3 (repair → validate → plan/evaluate).
Input:  raw document text
Output: (repaired text, list of warnings)
"""

from ..logger import get_module_logger

logger = get_module_logger("briql.preprocessor")

OPENERS = frozenset("{[")


def _next_significant(text: str, start: int) -> tuple[str, int]:
    """First non-whitespace character at or after start, and its index."""
    i = start
    while i < len(text) and text[i].isspace():
        i += 1
    return (text[i], i) if i < len(text) else ("", i)


def repair_document(text: str) -> tuple[str, list[str]]:
    """
    Repair the known malformations.

    Args:
        text: Raw query document

    Returns:
        Tuple of (repaired text, list of warnings)
    """
    warnings = []

    if text.lstrip().startswith('"'):
        text = "{" + text
        warnings.append("Added missing enclosing braces around the document")

    out = []
    stack: list[str] = []
    in_string = False
    escaped = False

    for i, ch in enumerate(text):
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue

        if ch == '"':
            in_string = True
        elif ch in OPENERS:
            stack.append(ch)
        elif ch == "]":
            # `]` followed by `, {` with an object underneath: the array is
            # still open and `{` is its next element
            nxt, j = _next_significant(text, i + 1)
            after, _ = _next_significant(text, j + 1) if nxt == "," else ("", j)
            if stack[-2:] == ["{", "["] and nxt == "," and after == "{":
                line = text.count("\n", 0, i) + 1
                warnings.append(f"Dropped premature array close at line {line}")
                continue
            if stack and stack[-1] == "[":
                stack.pop()
        elif ch == "}":
            if stack and stack[-1] == "{":
                stack.pop()
        out.append(ch)

    repaired = "".join(out)

    for warning in warnings:
        logger.warning(f"Query document repaired: {warning}")
    return repaired, warnings
