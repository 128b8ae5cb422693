"""
Directory: meta-objects, model lifecycle and role-based access control.

Public API surface:
  - Directory: create_org/site/building, grant, upload_draft, validate_model,
    publish_model, resolve_model, check_access
  - VALIDATION_RULES / rule: the validation rule registry
  - Models: Organisation, Site, Building, GeoLocation, ModelVersion, RoleGrant,
    Finding, ValidationReport, AccessDecision
"""

from .models import (
    PLATFORM_SCOPE,
    ROLE_RANK,
    AccessDecision,
    Building,
    Finding,
    GeoLocation,
    ModelVersion,
    Organisation,
    Principal,
    RoleGrant,
    Site,
    ValidationReport,
)
from .rbac import decide, scope_chain
from .registry import Directory, graph_id_for, split_model_id
from .validation import VALIDATION_RULES, ValidationContext, rule, run_rules

__all__ = [
    "PLATFORM_SCOPE",
    "ROLE_RANK",
    "AccessDecision",
    "Building",
    "Directory",
    "Finding",
    "GeoLocation",
    "ModelVersion",
    "Organisation",
    "Principal",
    "RoleGrant",
    "Site",
    "VALIDATION_RULES",
    "ValidationContext",
    "ValidationReport",
    "decide",
    "graph_id_for",
    "rule",
    "run_rules",
    "scope_chain",
    "split_model_id",
]
