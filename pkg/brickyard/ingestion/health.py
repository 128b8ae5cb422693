"""
Data-health checks over one stream window.

Findings are neutral observations about the data (stale, out_of_range,
future_timestamp, gap); whether a finding is an accuracy, validity or
integrity problem is left to the consumer. Checks are pure functions of the
stream content, the policy, the bound point's range properties and the
injected reference time.
"""

from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..logger import get_module_logger
from ..timeseries.models import Window
from ..timeseries.store import TimeseriesStore

logger = get_module_logger("ingestion.health")

FindingKind = Literal["stale", "out_of_range", "future_timestamp", "gap"]


class HealthPolicy(BaseModel):
    stale_seconds: int = Field(default=6 * 3600, gt=0)     # identical-value run length that counts as stale
    future_skew_seconds: int = Field(default=300, ge=0)
    gap_seconds: int = Field(default=3600, gt=0)           # missing coverage that counts as a gap


class HealthFinding(BaseModel):
    stream_id: str
    kind: FindingKind
    window: Window
    detail: dict[str, Any] = Field(default_factory=dict)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """[start, end) index ranges where mask is True."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def _interval(t: np.ndarray, expected: Optional[int]) -> Optional[int]:
    if expected:
        return expected
    if len(t) < 2:
        return None
    return int(np.median(np.diff(t)))


def check_stale(stream_id: str, t: np.ndarray, v: np.ndarray, interval: Optional[int],
                policy: HealthPolicy) -> list[HealthFinding]:
    if len(t) < 2 or not interval:
        return []
    min_count = -(-policy.stale_seconds // interval) + 1
    same = np.concatenate([[False], v[1:] == v[:-1]])
    findings = []
    # A run of identical values starts one index before its first repeat
    for lo, hi in _runs(same):
        lo -= 1
        if hi - lo >= min_count:
            findings.append(HealthFinding(
                stream_id=stream_id, kind="stale", window=Window(start=int(t[lo]), end=int(t[hi - 1]) + 1),
                detail={"value": float(v[lo]), "count": hi - lo, "seconds": int(t[hi - 1] - t[lo])},
            ))
    return findings


def check_range(stream_id: str, t: np.ndarray, v: np.ndarray,
                properties: Optional[dict[str, Any]]) -> list[HealthFinding]:
    properties = properties or {}
    low, high = properties.get("rangeMin"), properties.get("rangeMax")
    if low is None and high is None:
        return []
    mask = np.zeros(len(v), dtype=bool)
    if low is not None:
        mask |= v < float(low)
    if high is not None:
        mask |= v > float(high)
    return [
        HealthFinding(
            stream_id=stream_id, kind="out_of_range", window=Window(start=int(t[lo]), end=int(t[hi - 1]) + 1),
            detail={"count": hi - lo, "min": float(v[lo:hi].min()), "max": float(v[lo:hi].max()),
                    "range_min": low, "range_max": high},
        )
        for lo, hi in _runs(mask)
    ]


def check_future(stream_id: str, t: np.ndarray, now: int, policy: HealthPolicy) -> list[HealthFinding]:
    limit = now + policy.future_skew_seconds
    return [
        HealthFinding(
            stream_id=stream_id, kind="future_timestamp", window=Window(start=int(t[lo]), end=int(t[hi - 1]) + 1),
            detail={"count": hi - lo, "now": now, "ahead_seconds": int(t[hi - 1] - now)},
        )
        for lo, hi in _runs(t > limit)
    ]


def check_gaps(stream_id: str, t: np.ndarray, window: Window, interval: Optional[int], now: int,
               policy: HealthPolicy) -> list[HealthFinding]:
    """Uncovered stretches: before the first observation, between observations, and up to min(end, now)."""
    step = interval or 0
    horizon = min(window.end, now)
    edges = [window.start] + [int(x) + step for x in t] if len(t) else [window.start]
    starts = [int(x) for x in t] + [horizon]
    findings = []
    for covered_until, next_start in zip(edges, starts):
        missing = next_start - covered_until
        if missing >= policy.gap_seconds:
            findings.append(HealthFinding(
                stream_id=stream_id, kind="gap", window=Window(start=covered_until, end=next_start),
                detail={"seconds": missing},
            ))
    return findings


def run_health_checks(streams: TimeseriesStore, stream_id: str, window: Window, now: int,
                      policy: Optional[HealthPolicy] = None,
                      point_properties: Optional[dict[str, Any]] = None) -> list[HealthFinding]:
    """
    All findings for a stream window, ordered by kind then start.

    Args:
        streams: Store holding the stream
        stream_id: Stream to check
        window: Half-open window to inspect
        now: Reference time (epoch seconds) for future-timestamp and trailing-gap checks
        policy: Thresholds (defaults when None)
        point_properties: Entity properties of the bound point (rangeMin/rangeMax)

    Raises:
        NotFoundError: unknown stream
    """
    policy = policy or HealthPolicy()
    meta = streams.get_meta(stream_id)
    t, v, _ = streams.arrays(stream_id, window)
    interval = _interval(t, meta.expected_interval)

    findings = (
        check_stale(stream_id, t, v, interval, policy)
        + check_range(stream_id, t, v, point_properties)
        + check_future(stream_id, t, now, policy)
        + check_gaps(stream_id, t, window, interval, now, policy)
    )
    for finding in findings:
        logger.warning(f"{stream_id}: {finding.kind} [{finding.window.start}, {finding.window.end}) {finding.detail}")
    return findings
