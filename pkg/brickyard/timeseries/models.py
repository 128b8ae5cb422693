"""
Time-series data contracts.

Timestamps are integer UTC epoch seconds everywhere inside the store;
ISO-8601 text only appears at the ingestion and API boundaries.
"""

import math
from datetime import datetime, timezone
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

# [1970-01-01, 2100-01-01)
MIN_TIMESTAMP = 0
MAX_TIMESTAMP = 4_102_444_800

Quality = Literal["actual", "substituted", "suspect"]
QUALITY_CODES: dict[str, int] = {"actual": 0, "substituted": 1, "suspect": 2}
QUALITY_NAMES: dict[int, str] = {code: name for name, code in QUALITY_CODES.items()}

# Quantity kind → accepted units
UNIT_TABLE: dict[str, frozenset[str]] = {
    "Energy": frozenset({"Wh", "kWh", "MWh", "J", "kJ", "MJ"}),
    "Power": frozenset({"W", "kW", "MW"}),
    "ReactiveEnergy": frozenset({"varh", "kvarh"}),
    "ReactivePower": frozenset({"var", "kvar"}),
    "ApparentEnergy": frozenset({"VAh", "kVAh"}),
    "ApparentPower": frozenset({"VA", "kVA"}),
    "Temperature": frozenset({"degC", "°C", "degF", "°F", "K"}),
    "RelativeHumidity": frozenset({"percent", "%"}),
    "Concentration": frozenset({"ppm"}),
    "VolumeFlowRate": frozenset({"L/s", "m3/h"}),
    "Volume": frozenset({"L", "m3"}),
    "Pressure": frozenset({"Pa", "kPa"}),
    "Dimensionless": frozenset({"1", "percent", "%"}),
    "Status": frozenset({"code"}),
    "Alarm": frozenset({"code"}),
    "Command": frozenset({"code"}),
}

# Qualitative channels are stored as numeric codes
QUALITATIVE_CODES: dict[str, dict[str, int]] = {
    "Status": {"off": 0, "on": 1, "fault": 2},
    "Alarm": {"normal": 0, "active": 1, "acknowledged": 2},
    "Command": {"off": 0, "on": 1, "auto": 2},
}


def units_match(quantity_kind: str, unit: str) -> bool:
    return unit in UNIT_TABLE.get(quantity_kind, frozenset())


def encode_qualitative(quantity_kind: str, label: str) -> int:
    """'on' on a Status channel -> 1; KeyError for unknown kinds/labels."""
    return QUALITATIVE_CODES[quantity_kind][label.lower()]


def to_epoch(value: Union[int, float, str, datetime]) -> int:
    """Epoch seconds from an int, an ISO-8601 string or a datetime (naive = UTC)."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        if value.strip().lstrip("-").isdigit():
            return int(value)
        value = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return int(value.timestamp())


def to_iso(timestamp: int) -> str:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class StreamMeta(BaseModel):
    stream_id: str = Field(min_length=1)
    quantity_kind: str
    unit: str
    point: Optional[str] = None                  # bound model point IRI
    expected_interval: Optional[int] = Field(default=None, gt=0)   # seconds
    owner: Optional[str] = None                  # directory scope gating access


class Observation(BaseModel):
    t: int                  # UTC epoch seconds
    v: float
    q: Quality = "actual"

    @field_validator("t", mode="before")
    @classmethod
    def _coerce_time(cls, value):
        return to_epoch(value)

    @field_validator("t")
    @classmethod
    def _time_range(cls, value: int) -> int:
        if not MIN_TIMESTAMP <= value < MAX_TIMESTAMP:
            raise ValueError(f"timestamp {value} outside [1970, 2100)")
        return value

    @field_validator("v")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("value must be finite")
        return value


class Window(BaseModel):
    """Half-open [start, end) in epoch seconds."""
    start: int
    end: int

    @field_validator("start", "end", mode="before")
    @classmethod
    def _coerce(cls, value):
        return to_epoch(value)

    @model_validator(mode="after")
    def _ordered(self):
        if self.start >= self.end:
            raise ValueError("window start must be before end")
        return self

    @property
    def seconds(self) -> int:
        return self.end - self.start


class AppendReport(BaseModel):
    stream_id: str
    inserted: int = 0
    replaced: int = 0


class Bucket(BaseModel):
    start: int          # bucket label: epoch-aligned start
    value: float


AggregateFn = Literal["sum", "mean", "min", "max", "count"]
