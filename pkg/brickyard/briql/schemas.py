"""
Pydantic schemas for BRIQL query documents and responses.

Query document (JSON):
  {"variables": [VariableDecl, ...],
   "query": {"paths": [PathConstraint, ...]},
   "mode": "normal" | "describe"}

Response (JSON):
  {"entities": [EntityRecord, ...],          each entity once per model
   "columns": ["ahu", "room"],               output variables, declaration order
   "solutions": [{"ahu": 0, "room": 1}, ...] cells index into entities
   "warnings": [...]}

Unknown keys are rejected everywhere in the query document.
"""

from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from pydantic_core import PydanticCustomError

IDENTIFIER = r"^[A-Za-z_][A-Za-z0-9_]*$"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# --- type matchers ---

class ExactMatcher(_Strict):
    """Entity typed with exactly this class."""
    match: Literal["exact"]
    type: str


class IsaMatcher(_Strict):
    """Entity typed with this class or any subclass."""
    match: Literal["isa"]
    type: str


class TagsMatcher(_Strict):
    """Entity typed with a class whose tags include all of these."""
    match: Literal["tags"]
    tags: list[str] = Field(default_factory=list)


class PropertyPredicate(_Strict):
    key: str                                                         # entity property local name, e.g. "rangeMin"
    op: Literal["eq", "ne", "lt", "le", "gt", "ge", "exists"] = "eq"
    value: Optional[Union[bool, int, float, str]] = None

    @model_validator(mode="after")
    def _value_present(self):
        if self.op != "exists" and self.value is None:
            raise PydanticCustomError(
                "missing_value", "property predicate '{key}' with op '{op}' needs a value",
                {"key": self.key, "op": self.op},
            )
        return self


class PropertiesMatcher(_Strict):
    """Entity whose properties satisfy every predicate."""
    match: Literal["properties"]
    properties: list[PropertyPredicate] = Field(min_length=1)


TypeMatcher = Annotated[
    Union[ExactMatcher, IsaMatcher, TagsMatcher, PropertiesMatcher],
    Field(discriminator="match"),
]
PointFilter = Annotated[Union[TagsMatcher, IsaMatcher], Field(discriminator="match")]

FetchField = Literal["id", "pointinfo", "properties", "label"]


class VariableDecl(_Strict):
    """One variable; it binds a whole building entity."""
    name: str = Field(pattern=IDENTIFIER)
    output: bool = False
    brick_type: TypeMatcher
    fetch: list[FetchField] = Field(default_factory=lambda: ["id"])
    fetch_points: list[PointFilter] = Field(default_factory=list)
    default: Optional[str] = None                                    # entity IRI bound unless overridden by args

    @model_validator(mode="after")
    def _points_need_pointinfo(self):
        if self.fetch_points and "pointinfo" not in self.fetch:
            raise PydanticCustomError(
                "fetch_points_without_pointinfo",
                "variable '{name}' filters points but does not fetch pointinfo",
                {"name": self.name},
            )
        return self


class PathStep(_Strict):
    property: str                      # relation name, e.g. "feeds"
    min: int = Field(default=1, ge=1)
    max: Optional[int] = None          # None = unbounded

    @model_validator(mode="after")
    def _bounds(self):
        if self.max is not None and self.max < self.min:
            raise PydanticCustomError(
                "invalid_bounds", "max ({max}) is below min ({min})", {"min": self.min, "max": self.max}
            )
        return self


class PathConstraint(_Strict):
    from_ref: str
    steps: list[PathStep] = Field(alias="properties", min_length=1)
    to_ref: str


class QueryBody(_Strict):
    paths: list[PathConstraint] = Field(default_factory=list)


class BriqlQuery(_Strict):
    """A parsed, validated query document."""
    variables: list[VariableDecl] = Field(min_length=1)
    query: QueryBody = Field(default_factory=QueryBody)
    mode: Literal["normal", "describe"] = "normal"

    # Repairs applied to the raw document; not part of the canonical body
    _warnings: list[str] = PrivateAttr(default_factory=list)

    @property
    def warnings(self) -> list[str]:
        return self._warnings

    @property
    def paths(self) -> list[PathConstraint]:
        return self.query.paths

    def variable(self, name: str) -> VariableDecl:
        for var in self.variables:
            if var.name == name:
                return var
        raise KeyError(name)

    @model_validator(mode="after")
    def _references(self):
        seen: set[str] = set()
        for i, var in enumerate(self.variables):
            if var.name in seen:
                raise PydanticCustomError(
                    "duplicate_variable", "variable '{name}' is declared twice",
                    {"name": var.name, "path": f"$.variables[{i}].name"},
                )
            seen.add(var.name)
        for i, path in enumerate(self.query.paths):
            for end in ("from_ref", "to_ref"):
                ref = getattr(path, end)
                if ref not in seen:
                    raise PydanticCustomError(
                        "dangling_reference", "path refers to undeclared variable '{name}'",
                        {"name": ref, "path": f"$.query.paths[{i}].{end}"},
                    )
        return self


class StoredQueryRef(_Strict):
    """Invocation by reference; version None means latest."""
    query_id: str
    version: Optional[int] = None


# --- responses ---

class _Out(BaseModel):
    model_config = ConfigDict(populate_by_name=True)


class PointInfo(_Out):
    """A point attached to an entity via hasPoint."""
    id: str
    class_: str = Field(alias="class")
    stream: Optional[str] = None
    unit: Optional[str] = None
    quantity_kind: Optional[str] = None


class EntityRecord(_Out):
    id: str
    model: Optional[str] = None        # model id as requested (e.g. "site-1" or "site-1@2")
    graph: str
    class_: Optional[str] = Field(default=None, alias="class")
    label: Optional[str] = None
    properties: Optional[dict[str, Any]] = None
    points: Optional[list[PointInfo]] = None


class Relationship(_Out):
    relation: str
    target: str


class EntityDescription(_Out):
    id: str
    model: Optional[str] = None
    graph: str
    class_: Optional[str] = Field(default=None, alias="class")
    classes: list[str] = Field(default_factory=list)
    label: Optional[str] = None
    properties: dict[str, Any] = Field(default_factory=dict)
    relationships: list[Relationship] = Field(default_factory=list)   # outgoing edges; reciprocals are stored, so both directions appear
    points: list[PointInfo] = Field(default_factory=list)


class BriqlResponse(_Out):
    entities: list[EntityRecord] = Field(default_factory=list)
    columns: list[str] = Field(default_factory=list)
    solutions: list[dict[str, int]] = Field(default_factory=list)
    descriptions: Optional[list[EntityDescription]] = None            # describe mode only
    warnings: list[str] = Field(default_factory=list)

    def rows(self) -> list[dict[str, str]]:
        """Solutions with entity ids instead of indices."""
        return [{col: self.entities[idx].id for col, idx in row.items()} for row in self.solutions]
