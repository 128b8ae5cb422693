"""
Bucketed energy and temperature series for M&V.

Energy streams are summed per bucket; power streams are integrated with the
trapezoid rule over consecutive observations (pairs further apart than two
expected intervals are not bridged), each slice credited to the bucket its
first observation falls in. A bucket is complete when every stream feeding
it covers at least `threshold` of its expected slots.

`reader` is anything with arrays/get_meta/completeness (the time-series
store or a sandbox read handle).
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel

from ...exceptions import UnitMismatchError
from ...logger import get_module_logger
from ...timeseries.models import Window
from .metering import MeterExpression, PointChoice

logger = get_module_logger("apps.mv.consumption")

DAY = 86400

ENERGY_TO_KWH = {"Wh": 1e-3, "kWh": 1.0, "MWh": 1e3, "J": 1 / 3.6e6, "kJ": 1 / 3600.0, "MJ": 1 / 3.6}
POWER_TO_KW = {"W": 1e-3, "kW": 1.0, "MW": 1e3}


class SeriesBucket(BaseModel):
    start: int
    value: float
    coverage: float
    complete: bool


def bucket_starts(window: Window, bucket_seconds: int) -> list[int]:
    first = -(-window.start // bucket_seconds) * bucket_seconds
    return list(range(first, window.end, bucket_seconds))


def _interval(reader, stream_id: str, t: np.ndarray, fallback: int) -> int:
    expected = reader.get_meta(stream_id).expected_interval
    if expected:
        return expected
    if len(t) >= 2:
        return max(1, int(np.median(np.diff(t))))
    return fallback


def bucket_sums(t: np.ndarray, values: np.ndarray, starts: list[int], bucket_seconds: int) -> np.ndarray:
    """Sum of values per bucket in starts, keyed by timestamp t; points outside every bucket are dropped."""
    sums = np.zeros(len(starts))
    if not starts or len(t) == 0:
        return sums
    index = (np.asarray(t, dtype=np.int64) - starts[0]) // bucket_seconds
    inside = (index >= 0) & (index < len(starts))
    np.add.at(sums, index[inside], np.asarray(values, dtype=np.float64)[inside])
    return sums


def _coverage(reader, stream_id: str, starts: list[int], bucket_seconds: int, interval: int) -> dict[int, float]:
    return {
        s: reader.completeness(stream_id, Window(start=s, end=s + bucket_seconds), interval)
        for s in starts
    }


def stream_energy(reader, stream_id: str, kind: str, window: Window,
                  bucket_seconds: int) -> tuple[dict[int, float], dict[int, float]]:
    """kWh and coverage per bucket for one energy or power stream."""
    meta = reader.get_meta(stream_id)
    table = ENERGY_TO_KWH if kind == "energy" else POWER_TO_KW
    if meta.unit not in table:
        raise UnitMismatchError(
            f"Stream {stream_id} has unit {meta.unit!r}, not a {kind} unit",
            details={"stream_id": stream_id, "unit": meta.unit},
        )
    factor = table[meta.unit]
    t, v, _ = reader.arrays(stream_id, window)
    starts = bucket_starts(window, bucket_seconds)
    interval = _interval(reader, stream_id, t, bucket_seconds)
    if kind == "energy":
        sums = bucket_sums(t, v * factor, starts, bucket_seconds)
    elif len(t) >= 2:
        dt = np.diff(t)
        slices = (v[:-1] + v[1:]) / 2.0 * dt / 3600.0 * factor
        keep = dt <= 2 * interval
        sums = bucket_sums(t[:-1][keep], slices[keep], starts, bucket_seconds)
    else:
        sums = np.zeros(len(starts))
    energy = {s: float(x) for s, x in zip(starts, sums)}
    return energy, _coverage(reader, stream_id, starts, bucket_seconds, interval)


def term_energy(reader, choice: PointChoice, window: Window,
                bucket_seconds: int) -> tuple[dict[int, float], dict[int, float]]:
    """A meter's energy per bucket; per-phase streams are summed, coverage is the weakest phase."""
    total: dict[int, float] = {}
    coverage: dict[int, float] = {}
    for stream_id in choice.streams:
        energy, cover = stream_energy(reader, stream_id, choice.kind, window, bucket_seconds)
        for start, value in energy.items():
            total[start] = total.get(start, 0.0) + value
            coverage[start] = min(coverage.get(start, 1.0), cover[start])
    return total, coverage


def compute_net_consumption(reader, expression: MeterExpression, window: Window,
                            bucket_seconds: int = DAY, threshold: float = 0.9) -> list[SeriesBucket]:
    """
    Σ sign · energy(term) per bucket, with completeness flags.

    Raises:
        UnitMismatchError: a term's stream is not in an energy/power unit
    """
    starts = bucket_starts(window, bucket_seconds)
    net = {s: 0.0 for s in starts}
    coverage = {s: 1.0 for s in starts}
    for term in expression.terms:
        if term.choice is None:
            raise UnitMismatchError(f"Meter {term.meter} has no selected point", details={"meter": term.meter})
        energy, cover = term_energy(reader, term.choice, window, bucket_seconds)
        for s in starts:
            net[s] += term.sign * energy[s]
            coverage[s] = min(coverage[s], cover[s])
    return [SeriesBucket(start=s, value=net[s], coverage=coverage[s], complete=coverage[s] >= threshold)
            for s in starts]


def to_celsius(values: np.ndarray, unit: Optional[str]) -> np.ndarray:
    if unit in ("degF", "°F"):
        return (values - 32.0) * 5.0 / 9.0
    if unit == "K":
        return values - 273.15
    return values


def mean_temperature(reader, stream_id: str, window: Window, bucket_seconds: int = DAY,
                     threshold: float = 0.9) -> list[SeriesBucket]:
    """Mean °C per bucket; buckets without observations are incomplete with value nan."""
    meta = reader.get_meta(stream_id)
    t, v, _ = reader.arrays(stream_id, window)
    v = to_celsius(v.astype(float), meta.unit)
    starts = bucket_starts(window, bucket_seconds)
    interval = _interval(reader, stream_id, t, bucket_seconds)
    coverage = _coverage(reader, stream_id, starts, bucket_seconds, interval)
    labels = (t // bucket_seconds) * bucket_seconds
    result = []
    for s in starts:
        mask = labels == s
        value = float(v[mask].mean()) if mask.any() else float("nan")
        result.append(SeriesBucket(start=s, value=value, coverage=coverage[s],
                                   complete=bool(mask.any()) and coverage[s] >= threshold))
    return result
