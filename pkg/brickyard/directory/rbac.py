"""
Role-based access control over the scope tree.

Deny by default: a principal may act on an object only when it holds a grant
at the object's own scope or an enclosing one whose role meets or exceeds the
role needed. Unknown objects have no scope chain and are always denied, the
same answer a forbidden object gets.
"""

from typing import Callable, Iterable, Optional

from .models import PLATFORM_SCOPE, ROLE_RANK, AccessDecision, RoleGrant


def scope_chain(object_id: str, parent_of: Callable[[str], Optional[str]]) -> list[str]:
    """
    Enclosing scopes of an object, innermost first, ending at the platform root.

    Args:
        object_id: Organisation, site or building id (or "platform")
        parent_of: Lookup returning the parent id, "platform" for an
            organisation, None for an unknown object

    Returns:
        [object_id, parent, ..., "platform"], or [] when the object is unknown
    """
    if object_id == PLATFORM_SCOPE:
        return [PLATFORM_SCOPE]
    chain = []
    current: Optional[str] = object_id
    while current is not None and current != PLATFORM_SCOPE:
        if current in chain:
            return []
        parent = parent_of(current)
        if parent is None:
            return []
        chain.append(current)
        current = parent
    chain.append(PLATFORM_SCOPE)
    return chain


def decide(grants: Iterable[RoleGrant], chain: list[str], needed_role: str) -> AccessDecision:
    """Allow iff some grant on the chain ranks at least as high as needed_role."""
    needed = ROLE_RANK[needed_role]
    scopes = set(chain)
    for grant in grants:
        if grant.scope in scopes and ROLE_RANK[grant.role] >= needed:
            return AccessDecision.ALLOW
    return AccessDecision.DENY
