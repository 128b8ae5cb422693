"""
Application lifecycle models: packages, installations, run results.
"""

from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field

from ..briql.schemas import StoredQueryRef

InstallState = Literal["bound", "failed-discovery"]
RunStatus = Literal["ok", "sandbox_violation", "failed"]


class ResourceRequest(BaseModel):
    """Recorded with the package; only wall time is enforced."""
    memory_mb: int = Field(default=256, gt=0)
    cpu_units: float = Field(default=1.0, gt=0)


class AppPackage(BaseModel):
    app_id: str
    version: int = 0                                    # assigned at registration
    name: str
    description: str = ""
    resources: ResourceRequest = Field(default_factory=ResourceRequest)
    discovery: Union[StoredQueryRef, dict[str, Any]]    # stored reference or inline BRIQL document
    entrypoint: str                                     # registered procedure id
    config_schema: dict[str, Any] = Field(default_factory=dict)


class Binding(BaseModel):
    """Entities a discovery variable matched, and the streams of their points."""
    variable: str
    entities: list[str] = Field(default_factory=list)
    streams: list[str] = Field(default_factory=list)


class Installation(BaseModel):
    install_id: str
    app_id: str
    version: int
    target: str
    model_id: Optional[str] = None                      # published version the bindings came from
    principal: str
    config: dict[str, Any] = Field(default_factory=dict)
    state: InstallState = "bound"
    bindings: dict[str, Binding] = Field(default_factory=dict)
    streams: list[str] = Field(default_factory=list)     # everything the run may read
    extras: dict[str, Any] = Field(default_factory=dict)   # frozen by the entrypoint's bind hook
    diagnostics: list[str] = Field(default_factory=list)
    runs: int = 0

    @property
    def output_prefix(self) -> str:
        return f"{self.install_id}/"


class RunResult(BaseModel):
    """Outcome of one run; carries no wall-clock fields so identical inputs give identical documents."""
    install_id: str
    run: int
    as_of: int
    status: RunStatus
    result: Optional[dict[str, Any]] = None
    outputs: list[str] = Field(default_factory=list)
    violations: list[str] = Field(default_factory=list)
    error: Optional[dict[str, Any]] = None
