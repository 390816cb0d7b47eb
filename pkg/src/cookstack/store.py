"""Telemetry storage: per-device ring buffers plus an optional append-only log.

The log reuses the wire sample format, one line per accepted sample, so a
stored log can be replayed straight back through ingest.
"""

from __future__ import annotations

import threading
from collections import deque
from pathlib import Path
from typing import Iterator

from . import wire
from .prediction import TemperatureSample

DEFAULT_RING_CAPACITY = 10_000


class UnknownTokenError(LookupError):
    """Access token is not registered."""


class TokenRegistry:
    """Static token -> device_id map; lookups are exact-match."""

    def __init__(self, entries: dict[str, str] | None = None):
        self._entries = dict(entries or {})
        for token, device_id in self._entries.items():
            if not token or not isinstance(token, str):
                raise ValueError("tokens must be non-empty strings")
            if not device_id or not isinstance(device_id, str):
                raise ValueError(f"token {token!r} must map to a non-empty device id")

    def resolve(self, token: str) -> str:
        try:
            return self._entries[token]
        except KeyError:
            raise UnknownTokenError(f"unknown access token") from None

    @property
    def device_ids(self) -> set[str]:
        return set(self._entries.values())


class TelemetryStore:
    """Arrival-ordered sample rings, one per device."""

    def __init__(self, capacity: int = DEFAULT_RING_CAPACITY, log_path: str | Path | None = None):
        if capacity < 1:
            raise ValueError("ring capacity must be at least 1")
        self.capacity = capacity
        self._rings: dict[str, deque[TemperatureSample]] = {}
        self._lock = threading.Lock()
        self._log = open(log_path, "a", encoding="utf-8") if log_path else None

    def append(self, sample: TemperatureSample) -> None:
        with self._lock:
            ring = self._rings.setdefault(sample.device_id, deque(maxlen=self.capacity))
            ring.append(sample)
            if self._log is not None:
                self._log.write(wire.encode_sample(sample) + "\n")
                self._log.flush()

    def ring(self, device_id: str) -> list[TemperatureSample]:
        with self._lock:
            return list(self._rings.get(device_id, ()))

    def latest(self, device_id: str) -> TemperatureSample | None:
        with self._lock:
            ring = self._rings.get(device_id)
            return ring[-1] if ring else None

    def history(self, device_id: str, since_t_ms: int = 0) -> list[TemperatureSample]:
        return [s for s in self.ring(device_id) if s.t_ms >= since_t_ms]

    def device_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._rings)

    def close(self) -> None:
        with self._lock:
            if self._log is not None:
                self._log.close()
                self._log = None


def read_log(path: str | Path) -> Iterator[TemperatureSample]:
    """Yield every sample recorded in an append-only log, in file order."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield wire.sample_from_record(wire.parse_line(line))
