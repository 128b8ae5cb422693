"""
Time-series store: sorted numpy arrays per stream with an append log.

Each stream holds three parallel arrays (timestamps int64, values float64,
quality codes int8) sorted by timestamp and free of duplicates. An append
merges the batch into private copies and swaps the triple in one
assignment, so a reader that took a reference earlier keeps a consistent
view. Appends to one stream are serialized; streams are independent.

Persistence (when a root is given):
  <root>/<key>.json   stream metadata (JsonStore)
  <root>/<key>.log    one observation per line: ts<TAB>value<TAB>quality
The log is replayed on restore (last write wins) and compacted by flush().
"""

import math
import threading
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from ..exceptions import DuplicateError, InvalidArgumentError, NotFoundError, UnitMismatchError
from ..logger import get_module_logger
from ..storage import JsonStore, safe_key
from .models import (
    QUALITY_CODES,
    QUALITY_NAMES,
    AggregateFn,
    AppendReport,
    Bucket,
    Observation,
    StreamMeta,
    Window,
    units_match,
)

logger = get_module_logger("timeseries.store")

Arrays = tuple[np.ndarray, np.ndarray, np.ndarray]


def _empty() -> Arrays:
    return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int8)


def merge(current: Arrays, batch: Iterable[Observation]) -> tuple[Arrays, int, int]:
    """
    Upsert a batch into sorted arrays.

    Returns:
        (merged arrays, inserted, replaced); a timestamp repeated inside the
        batch counts as a replacement and its last occurrence wins
    """
    latest: dict[int, Observation] = {}
    repeats = 0
    for obs in batch:
        if obs.t in latest:
            repeats += 1
        latest[obs.t] = obs
    if not latest:
        return current, 0, 0

    order = sorted(latest)
    nt = np.array(order, dtype=np.int64)
    nv = np.array([latest[t].v for t in order], dtype=np.float64)
    nq = np.array([QUALITY_CODES[latest[t].q] for t in order], dtype=np.int8)

    t, v, q = current
    keep = ~np.isin(t, nt)
    replaced = int(len(t) - keep.sum())
    mt = np.concatenate([t[keep], nt])
    mv = np.concatenate([v[keep], nv])
    mq = np.concatenate([q[keep], nq])
    idx = np.argsort(mt, kind="stable")
    return (mt[idx], mv[idx], mq[idx]), len(nt) - replaced, replaced + repeats


def slot_completeness(t: np.ndarray, window: Window, expected_interval: int) -> float:
    slots = math.ceil(window.seconds / expected_interval)
    if len(t) == 0:
        return 0.0
    covered = len(np.unique((t - window.start) // expected_interval))
    return min(1.0, covered / slots)


class TimeseriesStore:
    """
    Streams keyed by stream id.

    Args:
        root: Optional directory for metadata and append logs
    """

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root else None
        self._meta_docs = JsonStore(self.root) if self.root else None
        self._meta: dict[str, StreamMeta] = {}
        self._data: dict[str, Arrays] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # --- streams ---

    def create_stream(self, meta: Union[StreamMeta, dict]) -> str:
        """
        Register an empty stream.

        Raises:
            UnitMismatchError: unit not valid for the quantity kind
            DuplicateError: stream id taken
        """
        meta = StreamMeta.model_validate(meta)
        if not units_match(meta.quantity_kind, meta.unit):
            raise UnitMismatchError(
                f"Unit {meta.unit!r} is not valid for quantity kind {meta.quantity_kind!r}",
                details={"quantity_kind": meta.quantity_kind, "unit": meta.unit},
            )
        with self._registry_lock:
            if meta.stream_id in self._meta:
                raise DuplicateError(f"Stream already exists: {meta.stream_id}", details={"stream_id": meta.stream_id})
            self._meta[meta.stream_id] = meta
            self._data[meta.stream_id] = _empty()
            self._locks[meta.stream_id] = threading.Lock()
            self._save_meta(meta)
        logger.info(f"Created stream {meta.stream_id} ({meta.quantity_kind}, {meta.unit})")
        return meta.stream_id

    def has_stream(self, stream_id: str) -> bool:
        return stream_id in self._meta

    def get_meta(self, stream_id: str) -> StreamMeta:
        return self._meta[self._require(stream_id)].model_copy()

    def list_streams(self, owner: Optional[str] = None) -> list[StreamMeta]:
        return [m.model_copy() for sid, m in sorted(self._meta.items()) if owner is None or m.owner == owner]

    def bind_point(self, stream_id: str, point: Optional[str]) -> StreamMeta:
        """Attach (or detach, with None) the model point a stream measures."""
        stream_id = self._require(stream_id)
        with self._locks[stream_id]:
            meta = self._meta[stream_id].model_copy(update={"point": point})
            self._meta[stream_id] = meta
            self._save_meta(meta)
        logger.info(f"Bound stream {stream_id} to {point}")
        return meta.model_copy()

    def _require(self, stream_id: str) -> str:
        if stream_id not in self._meta:
            raise NotFoundError(f"Stream not found: {stream_id}", details={"stream_id": stream_id})
        return stream_id

    # --- writes ---

    def append(self, stream_id: str, observations: Iterable[Union[Observation, dict]]) -> AppendReport:
        """
        Upsert a batch; all-or-nothing per stream.

        Raises:
            NotFoundError: unknown stream
            InvalidArgumentError: a non-finite value or out-of-range timestamp
                (nothing from the batch is stored)
        """
        stream_id = self._require(stream_id)
        batch = []
        for i, obs in enumerate(observations):
            if isinstance(obs, Observation):
                batch.append(obs)
                continue
            try:
                batch.append(Observation.model_validate(obs))
            except ValueError as e:
                raise InvalidArgumentError(f"Observation {i} rejected: {e}",
                                           details={"stream_id": stream_id, "index": i})

        with self._locks[stream_id]:
            merged, inserted, replaced = merge(self._data[stream_id], batch)
            self._log(stream_id, batch)
            self._data[stream_id] = merged

        report = AppendReport(stream_id=stream_id, inserted=inserted, replaced=replaced)
        logger.debug(f"Append {stream_id}: {report.inserted} inserted, {report.replaced} replaced")
        return report

    # --- reads ---

    def arrays(self, stream_id: str, window: Optional[Window] = None) -> Arrays:
        """Timestamps, values and quality codes inside a half-open window (views, do not mutate)."""
        t, v, q = self._data[self._require(stream_id)]
        if window is None:
            return t, v, q
        lo = int(np.searchsorted(t, window.start, side="left"))
        hi = int(np.searchsorted(t, window.end, side="left"))
        return t[lo:hi], v[lo:hi], q[lo:hi]

    def read_window(self, stream_id: str, window: Window) -> list[Observation]:
        t, v, q = self.arrays(stream_id, window)
        return [Observation(t=int(ts), v=float(val), q=QUALITY_NAMES[int(code)]) for ts, val, code in zip(t, v, q)]

    def aggregate(self, stream_id: str, window: Window, bucket_seconds: int, fn: AggregateFn = "sum") -> list[Bucket]:
        """
        Bucketed reduction; buckets align to UTC epoch multiples, empty ones omitted.

        Raises:
            InvalidArgumentError: bucket_seconds <= 0 or unknown fn
        """
        if bucket_seconds <= 0:
            raise InvalidArgumentError("bucket_seconds must be positive", details={"bucket_seconds": bucket_seconds})
        t, v, _ = self.arrays(stream_id, window)
        if len(t) == 0:
            return []
        labels = (t // bucket_seconds) * bucket_seconds
        starts, first = np.unique(labels, return_index=True)
        counts = np.diff(np.append(first, len(t)))
        reducers = {
            "sum": lambda: np.add.reduceat(v, first),
            "mean": lambda: np.add.reduceat(v, first) / counts,
            "min": lambda: np.minimum.reduceat(v, first),
            "max": lambda: np.maximum.reduceat(v, first),
            "count": lambda: counts.astype(np.float64),
        }
        if fn not in reducers:
            raise InvalidArgumentError(f"Unknown aggregate: {fn}", details={"fn": fn})
        values = reducers[fn]()
        return [Bucket(start=int(s), value=float(x)) for s, x in zip(starts, values)]

    def completeness(self, stream_id: str, window: Window, expected_interval: int) -> float:
        """Distinct covered slots / expected slots; slots start at window.start."""
        if expected_interval <= 0:
            raise InvalidArgumentError("expected_interval must be positive",
                                       details={"expected_interval": expected_interval})
        t, _, _ = self.arrays(stream_id, window)
        return slot_completeness(t, window, expected_interval)

    # --- persistence ---

    def _log_path(self, stream_id: str) -> Path:
        return self.root / f"{safe_key(stream_id)}.log"

    def _save_meta(self, meta: StreamMeta) -> None:
        if self._meta_docs is not None:
            self._meta_docs.put(meta.stream_id, meta.model_dump(mode="json"))

    def _log(self, stream_id: str, batch: list[Observation]) -> None:
        if self.root is None or not batch:
            return
        with self._log_path(stream_id).open("a", encoding="utf-8") as log:
            log.writelines(f"{o.t}\t{o.v!r}\t{o.q}\n" for o in batch)

    def flush(self) -> None:
        """Rewrite every append log from memory (compaction)."""
        if self.root is None:
            return
        for stream_id in sorted(self._meta):
            with self._locks[stream_id]:
                t, v, q = self._data[stream_id]
                path = self._log_path(stream_id)
                tmp = path.with_suffix(".log.tmp")
                tmp.write_text("".join(f"{int(a)}\t{float(b)!r}\t{QUALITY_NAMES[int(c)]}\n"
                                       for a, b, c in zip(t, v, q)), encoding="utf-8")
                tmp.replace(path)
        logger.info(f"Compacted {len(self._meta)} stream logs in {self.root}")

    def restore(self) -> int:
        """Reload metadata and replay logs; returns the number of streams."""
        if self.root is None or not self.root.exists():
            return 0
        for meta_file in sorted(self.root.glob("*.json")):
            doc = self._meta_docs.get(meta_file.stem)
            if not doc or "stream_id" not in doc:
                continue
            meta = StreamMeta.model_validate(doc)
            self._meta[meta.stream_id] = meta
            self._locks[meta.stream_id] = threading.Lock()
            batch = []
            log_path = self._log_path(meta.stream_id)
            if log_path.exists():
                for line in log_path.read_text(encoding="utf-8").splitlines():
                    if line:
                        ts, value, quality = line.split("\t")
                        batch.append(Observation(t=int(ts), v=float(value), q=quality))
            self._data[meta.stream_id], _, _ = merge(_empty(), batch)
        logger.info(f"Restored {len(self._meta)} streams from {self.root}")
        return len(self._meta)
