"""
DCH JSON payload: the gateway wire format.

  {"gateway": "gw-01",
   "points": [{"name": "AHU-1 OAT",
               "observations": [{"t": "2024-01-01T00:00:00Z", "v": 21.5, "q": "actual"}]}]}

Timestamps are ISO-8601 with an explicit UTC designator or offset; values
must be finite; "q" defaults to actual. Unknown keys are rejected.
"""

import json
import math
from datetime import datetime, timezone
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator

from ..exceptions import PayloadError
from ..logger import get_module_logger
from ..timeseries.models import Observation, Quality

logger = get_module_logger("ingestion.dch")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DchObservation(_Strict):
    t: datetime
    v: float
    q: Optional[Quality] = None

    @field_validator("t", mode="before")
    @classmethod
    def _parse_time(cls, value):
        if not isinstance(value, str):
            raise ValueError("timestamp must be an ISO-8601 string")
        try:
            parsed = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError as e:
            raise ValueError(f"invalid timestamp {value!r}: {e}")
        if parsed.tzinfo is None:
            raise ValueError(f"timestamp {value!r} has no UTC designator")
        return parsed.astimezone(timezone.utc)

    @field_validator("v")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("value must be finite")
        return value

    @field_serializer("t")
    def _render_time(self, value: datetime) -> str:
        return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def to_observation(self) -> Observation:
        return Observation(t=int(self.t.timestamp()), v=self.v, q=self.q or "actual")


class DchPoint(_Strict):
    name: str = Field(min_length=1)               # source point name as the gateway knows it
    observations: list[DchObservation] = Field(default_factory=list)


class DchPayload(_Strict):
    gateway: str = Field(min_length=1)
    points: list[DchPoint] = Field(default_factory=list)

    @property
    def observation_count(self) -> int:
        return sum(len(p.observations) for p in self.points)


def _json_path(loc: tuple) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def parse_dch_payload(document: Union[str, bytes, dict]) -> DchPayload:
    """
    Decode and validate a payload.

    Raises:
        PayloadError: malformed JSON or a schema violation (with JSON path)
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise PayloadError(f"Malformed JSON: {e.msg}", details={"line": e.lineno, "column": e.colno})
    try:
        payload = DchPayload.model_validate(document)
    except ValidationError as e:
        err = e.errors(include_url=False)[0]
        path = _json_path(err["loc"])
        raise PayloadError(f"Invalid payload at {path}: {err['msg']}", path=path,
                           details={"errors": len(e.errors())})
    logger.debug(f"Parsed payload from {payload.gateway}: {len(payload.points)} points, "
                 f"{payload.observation_count} observations")
    return payload


def serialize_dch_payload(payload: DchPayload) -> str:
    """Canonical JSON text; parse_dch_payload(serialize_dch_payload(p)) == p."""
    return json.dumps(payload.model_dump(mode="json", exclude_none=True), sort_keys=True, separators=(",", ":"))
