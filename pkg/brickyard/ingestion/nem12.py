"""
NEM12 interval meter data (CSV), record types 100/200/300/900.

  100  header           100,NEM12,<datetime>,<from>,<to>
  200  NMI data details 200,<NMI>,<config>,<register>,<suffix>,<mdm stream>,<meter serial>,<UOM>,<interval>,...
  300  interval data    300,<YYYYMMDD>,<v1>..<vN>,<quality method>,<reason>,<reason text>,<updated>,<loaded>
  900  end of data

N = 1440 / interval length. Values are stamped at the START of their
interval in site-local time and converted to UTC with the site offset.
Reason and transaction records (400/500) are rejected as unsupported.
"""

import csv
import io
import math
from datetime import datetime, timedelta, timezone
from typing import Union

from pydantic import BaseModel, Field

from ..exceptions import Nem12Error
from ..logger import get_module_logger
from ..timeseries.models import Observation
from .dch import DchObservation, DchPayload, DchPoint

logger = get_module_logger("ingestion.nem12")

# First letter of the 300-record quality method
QUALITY_MAP = {
    "A": "actual",
    "E": "substituted",
    "S": "substituted",
    "F": "suspect",
    "N": "suspect",
    "V": "suspect",
}

# UOM → (quantity kind, unit)
UOM_MAP = {
    "WH": ("Energy", "Wh"),
    "KWH": ("Energy", "kWh"),
    "MWH": ("Energy", "MWh"),
    "KVARH": ("ReactiveEnergy", "kvarh"),
    "KVAH": ("ApparentEnergy", "kVAh"),
    "W": ("Power", "W"),
    "KW": ("Power", "kW"),
    "MW": ("Power", "MW"),
    "KVAR": ("ReactivePower", "kvar"),
    "KVA": ("ApparentPower", "kVA"),
}

UNSUPPORTED_RECORDS = {"250", "400", "500", "550"}


class Nem12Header(BaseModel):
    version: str
    created: str
    sender: str
    receiver: str


class Nem12Day(BaseModel):
    date: str                      # YYYYMMDD, site-local
    values: list[float]
    quality: str                   # raw quality method, e.g. "A" or "E52"


class Nem12Channel(BaseModel):
    nmi: str
    suffix: str
    meter_serial: str = ""
    uom: str
    interval: int                  # minutes
    days: list[Nem12Day] = Field(default_factory=list)
    observations: list[Observation] = Field(default_factory=list)   # UTC

    @property
    def source_name(self) -> str:
        return f"{self.nmi}/{self.suffix}"

    @property
    def quantity(self) -> tuple[str, str]:
        return UOM_MAP.get(self.uom.upper(), ("Energy", self.uom))


class Nem12Result(BaseModel):
    header: Nem12Header
    channels: list[Nem12Channel] = Field(default_factory=list)

    @property
    def observation_count(self) -> int:
        return sum(len(c.observations) for c in self.channels)

    def to_payload(self, gateway: str = "nem12") -> DchPayload:
        """One payload point per channel, named <NMI>/<suffix>."""
        return DchPayload(gateway=gateway, points=[
            DchPoint(name=c.source_name, observations=[
                DchObservation(t=datetime.fromtimestamp(o.t, tz=timezone.utc).isoformat(), v=o.v, q=o.q)
                for o in c.observations
            ])
            for c in self.channels
        ])


def _offset(site_utc_offset: Union[timedelta, float, int]) -> timedelta:
    if isinstance(site_utc_offset, timedelta):
        return site_utc_offset
    return timedelta(hours=float(site_utc_offset))


def _is_number(field: str) -> bool:
    try:
        return math.isfinite(float(field))
    except ValueError:
        return False


def _interval_record(fields: list[str], channel: Nem12Channel, line: int, offset: timedelta) -> None:
    expected = 1440 // channel.interval
    try:
        day = datetime.strptime(fields[1], "%Y%m%d")
    except (IndexError, ValueError):
        raise Nem12Error(f"Bad interval date {fields[1:2]}", line=line)

    values = []
    for field in fields[2:]:
        if not _is_number(field):
            break
        values.append(float(field))
    if len(values) != expected:
        raise Nem12Error(
            f"300 record has {len(values)} interval values, expected {expected} at {channel.interval}-minute interval",
            line=line, details={"found": len(values), "expected": expected},
        )

    rest = fields[2 + expected:]
    quality = rest[0].strip() if rest else ""
    if not quality or quality[0] not in QUALITY_MAP:
        raise Nem12Error(f"Unknown quality method {quality!r}", line=line)

    channel.days.append(Nem12Day(date=fields[1], values=values, quality=quality))
    start = day.replace(tzinfo=timezone.utc) - offset
    step = timedelta(minutes=channel.interval)
    for i, value in enumerate(values):
        channel.observations.append(Observation(t=int((start + i * step).timestamp()), v=value,
                                                q=QUALITY_MAP[quality[0]]))


def parse_nem12(text: str, site_utc_offset: Union[timedelta, float, int] = 0) -> Nem12Result:
    """
    Parse a NEM12 document into channels with UTC observations.

    Args:
        text: CSV document
        site_utc_offset: Site-local offset from UTC (hours or timedelta), e.g. 10 for AEST

    Raises:
        Nem12Error: grammar violation (line-numbered)
    """
    offset = _offset(site_utc_offset)
    header = None
    channel = None
    channels: list[Nem12Channel] = []
    finished = False

    rows = csv.reader(io.StringIO(text))
    for line, fields in enumerate(rows, start=1):
        fields = [f.strip() for f in fields]
        if not fields or not any(fields):
            continue
        record = fields[0]
        if finished:
            raise Nem12Error("Data after 900 end-of-data record", line=line)

        if header is None and record != "100":
            raise Nem12Error("Document must start with a 100 header record", line=line)

        if record == "100":
            if header is not None:
                raise Nem12Error("Repeated 100 header record", line=line)
            if len(fields) < 5 or fields[1] != "NEM12":
                raise Nem12Error("Header is not a NEM12 100 record", line=line)
            header = Nem12Header(version=fields[1], created=fields[2], sender=fields[3], receiver=fields[4])
        elif record == "200":
            if len(fields) < 9:
                raise Nem12Error("200 record needs at least 9 fields", line=line)
            try:
                interval = int(fields[8])
            except ValueError:
                raise Nem12Error(f"Bad interval length {fields[8]!r}", line=line)
            if interval <= 0 or 1440 % interval:
                raise Nem12Error(f"Interval length {interval} does not divide a day", line=line)
            channel = Nem12Channel(nmi=fields[1], suffix=fields[4], meter_serial=fields[6],
                                   uom=fields[7], interval=interval)
            channels.append(channel)
        elif record == "300":
            if channel is None:
                raise Nem12Error("300 record before any 200 record", line=line)
            _interval_record(fields, channel, line, offset)
        elif record == "900":
            finished = True
        elif record in UNSUPPORTED_RECORDS:
            raise Nem12Error(f"Unsupported record type {record}", line=line, details={"record": record})
        else:
            raise Nem12Error(f"Unknown record type {record!r}", line=line, details={"record": record})

    if header is None:
        raise Nem12Error("Empty NEM12 document", line=1)
    if not finished:
        raise Nem12Error("Missing 900 end-of-data record")

    result = Nem12Result(header=header, channels=channels)
    logger.info(f"Parsed NEM12: {len(channels)} channels, {result.observation_count} observations")
    return result
