"""
Directory data contracts: meta-objects, model versions, grants, validation reports.

Scope nesting (outermost first): platform → organisation → site → building.
A grant at a scope covers everything nested inside it.
"""

from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, Field

PLATFORM_SCOPE = "platform"

Role = Literal["reader", "modeler", "admin"]

# A role implies every lower role
ROLE_RANK = {"reader": 1, "modeler": 2, "admin": 3}


class AccessDecision(str, Enum):
    ALLOW = "allow"
    DENY = "deny"


class Organisation(BaseModel):
    org_id: str
    name: str = Field(min_length=1)


class GeoLocation(BaseModel):
    lat: float = Field(ge=-90, le=90)       # degrees
    lon: float = Field(ge=-180, le=180)


class Site(BaseModel):
    site_id: str
    org_id: str
    name: str = Field(min_length=1)
    location: GeoLocation
    address: str = ""
    cadastral_ref: Optional[str] = None


class Building(BaseModel):
    building_id: str
    site_id: str
    name: str = Field(min_length=1)


class ModelVersion(BaseModel):
    """One uploaded model for a site or building."""
    target: str
    version: int
    state: Literal["draft", "published"] = "draft"
    graph_id: str
    active: bool = False            # the target's current published model

    @property
    def model_id(self) -> str:
        return f"{self.target}@{self.version}"


class RoleGrant(BaseModel):
    scope: str
    role: Role


class Principal(BaseModel):
    principal_id: str
    grants: list[RoleGrant] = Field(default_factory=list)


class Finding(BaseModel):
    severity: Literal["error", "warning"]
    code: str
    entity: Optional[str] = None
    message: str


class ValidationReport(BaseModel):
    target: str
    version: int
    findings: list[Finding] = Field(default_factory=list)

    @property
    def error_count(self) -> int:
        return sum(1 for f in self.findings if f.severity == "error")

    @property
    def warning_count(self) -> int:
        return sum(1 for f in self.findings if f.severity == "warning")

    @property
    def ok(self) -> bool:
        return self.error_count == 0
