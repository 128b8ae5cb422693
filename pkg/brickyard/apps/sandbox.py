"""
In-process capability sandbox for application runs.

An entrypoint receives only scoped handles:
  - StreamReader: the installation's bound streams, clipped to the run's as_of
  - StreamWriter: streams named "<install_id>/<name>", created on first write
Reaching anything else raises SandboxViolation and the attempt is recorded
on the run, even when the entrypoint catches the exception.

Outbound network is cut for sandbox threads by wrapping socket connect,
create_connection and getaddrinfo; other threads are unaffected. The
entrypoint runs on a worker thread joined with a wall-time limit.
"""

import socket
import threading
from typing import Any, Callable, Iterable, Optional

import numpy as np

from ..exceptions import EntrypointError, PlatformError, SandboxViolation
from ..logger import get_module_logger
from ..timeseries.models import MAX_TIMESTAMP, MIN_TIMESTAMP, QUALITY_NAMES, Observation, StreamMeta, Window
from ..timeseries.store import TimeseriesStore, slot_completeness

logger = get_module_logger("apps.sandbox")

_state = threading.local()
_guard_lock = threading.Lock()
_guard_installed = False


class ViolationLog:
    def __init__(self):
        self.entries: list[str] = []
        self._lock = threading.Lock()

    def record(self, message: str) -> SandboxViolation:
        with self._lock:
            self.entries.append(message)
        logger.warning(f"Sandbox violation: {message}")
        return SandboxViolation(message)


def _current_log() -> Optional[ViolationLog]:
    return getattr(_state, "violations", None)


def _blocking(original: Callable, describe: Callable[..., str]) -> Callable:
    def wrapper(*args, **kwargs):
        log = _current_log()
        if log is not None:
            raise log.record(f"network access denied: {describe(*args, **kwargs)}")
        return original(*args, **kwargs)
    wrapper.__wrapped__ = original
    return wrapper


def install_network_guard() -> None:
    """Wrap the socket entry points once per process; a no-op outside sandbox threads."""
    global _guard_installed
    with _guard_lock:
        if _guard_installed:
            return
        socket.socket.connect = _blocking(socket.socket.connect, lambda sock, address: f"connect {address}")
        socket.socket.connect_ex = _blocking(socket.socket.connect_ex, lambda sock, address: f"connect {address}")
        socket.create_connection = _blocking(socket.create_connection, lambda address, *a, **k: f"connect {address}")
        socket.getaddrinfo = _blocking(socket.getaddrinfo, lambda host, *a, **k: f"resolve {host}")
        _guard_installed = True


class StreamReader:
    """Read handle limited to a fixed stream set and to observations before as_of."""

    def __init__(self, store: TimeseriesStore, allowed: Iterable[str], as_of: int, violations: ViolationLog):
        self._store = store
        self._allowed = frozenset(allowed)
        self._as_of = as_of
        self._violations = violations
        self.closed = False

    def _check(self, stream_id: str) -> None:
        if self.closed:
            raise self._violations.record(f"read after run ended: {stream_id}")
        if stream_id not in self._allowed:
            raise self._violations.record(f"read of unbound stream {stream_id}")

    @property
    def streams(self) -> list[str]:
        return sorted(self._allowed)

    def get_meta(self, stream_id: str) -> StreamMeta:
        self._check(stream_id)
        return self._store.get_meta(stream_id)

    def arrays(self, stream_id: str, window: Optional[Window] = None):
        self._check(stream_id)
        start = window.start if window else MIN_TIMESTAMP
        end = min(window.end if window else MAX_TIMESTAMP, self._as_of)
        if start >= end:
            return np.empty(0, np.int64), np.empty(0, np.float64), np.empty(0, np.int8)
        return self._store.arrays(stream_id, Window(start=start, end=end))

    def read_window(self, stream_id: str, window: Window) -> list[Observation]:
        t, v, q = self.arrays(stream_id, window)
        return [Observation(t=int(a), v=float(b), q=QUALITY_NAMES[int(c)]) for a, b, c in zip(t, v, q)]

    def completeness(self, stream_id: str, window: Window, expected_interval: int) -> float:
        t, _, _ = self.arrays(stream_id, window)
        return slot_completeness(t, window, expected_interval)


class StreamWriter:
    """Write handle limited to the installation's own output streams."""

    def __init__(self, store: TimeseriesStore, install_id: str, owner: Optional[str], violations: ViolationLog):
        self._store = store
        self._prefix = f"{install_id}/"
        self._owner = owner
        self._violations = violations
        self.written: list[str] = []
        self.closed = False

    def stream_id(self, name: str) -> str:
        if not name or "/" in name:
            raise self._violations.record(f"invalid output stream name {name!r}")
        return self._prefix + name

    def write(self, name: str, observations: Iterable[Any], quantity_kind: str = "Dimensionless",
              unit: str = "1") -> str:
        if self.closed:
            raise self._violations.record(f"write after run ended: {name}")
        stream_id = self.stream_id(name)
        if not self._store.has_stream(stream_id):
            self._store.create_stream(StreamMeta(stream_id=stream_id, quantity_kind=quantity_kind,
                                                 unit=unit, owner=self._owner))
        self._store.append(stream_id, observations)
        if stream_id not in self.written:
            self.written.append(stream_id)
        return stream_id

    def append(self, stream_id: str, observations: Iterable[Any]) -> str:
        """Append by full id; only ids under the installation prefix are accepted."""
        if not stream_id.startswith(self._prefix):
            raise self._violations.record(f"write to foreign stream {stream_id}")
        return self.write(stream_id[len(self._prefix):], observations)


def run_sandboxed(fn: Callable[[], Any], violations: ViolationLog, timeout: float,
                  handles: Iterable = ()) -> Any:
    """
    Call fn on a guarded worker thread.

    Raises:
        SandboxViolation: fn raised one (or a recorded violation surfaced)
        EntrypointError: fn raised anything else, or ran past timeout
    """
    install_network_guard()
    outcome: dict[str, Any] = {}

    def worker():
        _state.violations = violations
        try:
            outcome["value"] = fn()
        except BaseException as e:     # noqa: BLE001 - reported to the caller
            outcome["error"] = e
        finally:
            _state.violations = None

    thread = threading.Thread(target=worker, name="brickyard-sandbox", daemon=True)
    thread.start()
    thread.join(timeout)
    for handle in handles:
        handle.closed = True

    if thread.is_alive():
        raise EntrypointError(f"Entrypoint exceeded {timeout}s", details={"timeout": timeout})
    error = outcome.get("error")
    if isinstance(error, SandboxViolation):
        raise error
    if error is not None:
        details = {"exception": type(error).__name__}
        if isinstance(error, PlatformError):
            details.update({"code": error.code, "detail": error.details})
        raise EntrypointError(f"Entrypoint failed: {type(error).__name__}: {error}", details=details)
    return outcome.get("value")
