"""Per-device session state and the hub that owns it.

The hub is the single writer for each device's session (samples arrive on
one connection per device); API reads take the same lock briefly and see a
consistent snapshot. Alarm and sample events fan out to subscriber queues
without blocking ingest.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .prediction import (
    DEFAULT_WINDOW_CAPACITY,
    PredictorConfig,
    Prediction,
    SampleWindow,
    TemperatureSample,
)
from . import prediction
from . import wire
from .simulator import TARGET_MAX_F, TARGET_MIN_F
from .store import TelemetryStore, TokenRegistry

logger = logging.getLogger(__name__)

CONNECTED = "connected"
STALE = "stale"
DISCONNECTED = "disconnected"

AT_TARGET_MODE = "at_target"
AT_TEMP_MODE = "at_temp"

DEFAULT_STALENESS_TIMEOUT_S = 10.0


class UnknownDeviceError(LookupError):
    def __init__(self, device_id: str):
        super().__init__(f"unknown device {device_id!r}")
        self.device_id = device_id


class OutOfRangeError(ValueError):
    def __init__(self, temp_f: float):
        super().__init__(f"temperature {temp_f} outside [{TARGET_MIN_F}, {TARGET_MAX_F}] F")


class NoTargetError(ValueError):
    def __init__(self):
        super().__init__("no target set")


@dataclass(frozen=True)
class AlarmEvent:
    device_id: str
    seq: int
    t_ms: int
    temp_f: float
    threshold_f: float
    mode: str


@dataclass
class AlarmSetting:
    mode: str
    threshold_f: float
    armed: bool = True
    fired: bool = False


@dataclass
class DeviceSession:
    device_id: str
    window: SampleWindow
    target_f: float | None = None
    target_pending: bool = False
    alarm: AlarmSetting | None = None
    drop_count: int = 0
    last_seq: int | None = None
    last_seen_mono: float | None = None
    connected: bool = False
    command_sender: Callable[[str], None] | None = field(default=None, repr=False)


class Hub:
    """Cloud-services core: ingest, per-device state, queries, event fan-out."""

    def __init__(
        self,
        store: TelemetryStore,
        registry: TokenRegistry | None = None,
        window_capacity: int = DEFAULT_WINDOW_CAPACITY,
        predictor_config: PredictorConfig | None = None,
        staleness_timeout_s: float = DEFAULT_STALENESS_TIMEOUT_S,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.store = store
        self.registry = registry or TokenRegistry({})
        self.window_capacity = window_capacity
        self.predictor_config = predictor_config or prediction.DEFAULT_CONFIG
        self.staleness_timeout_s = staleness_timeout_s
        self.clock = clock
        self._sessions: dict[str, DeviceSession] = {}
        self._subscribers: dict[str, list[queue.Queue]] = {}
        self._lock = threading.RLock()
        self.closed = False

    # -- sessions -------------------------------------------------------

    def _get_or_create(self, device_id: str) -> DeviceSession:
        session = self._sessions.get(device_id)
        if session is None:
            session = DeviceSession(device_id=device_id, window=SampleWindow(capacity=self.window_capacity))
            self._sessions[device_id] = session
        return session

    def _require(self, device_id: str) -> DeviceSession:
        with self._lock:
            if device_id in self._sessions:
                return self._sessions[device_id]
            if device_id in self.registry.device_ids:
                return self._get_or_create(device_id)
        raise UnknownDeviceError(device_id)

    def known_devices(self) -> list[str]:
        with self._lock:
            return sorted(set(self._sessions) | self.registry.device_ids)

    # -- device connections ----------------------------------------------

    def attach(self, device_id: str, command_sender: Callable[[str], None]) -> None:
        with self._lock:
            session = self._get_or_create(device_id)
            session.connected = True
            session.command_sender = command_sender
            session.last_seen_mono = self.clock()
            if session.target_pending and session.target_f is not None:
                self._forward_target(session)

    def detach(self, device_id: str) -> None:
        with self._lock:
            session = self._sessions.get(device_id)
            if session is not None:
                session.connected = False
                session.command_sender = None

    def _forward_target(self, session: DeviceSession) -> None:
        line = wire.encode_command("set_target", temp_f=float(session.target_f))
        try:
            session.command_sender(line)
            session.target_pending = False
        except OSError as e:
            logger.warning("command forward to %s failed: %s", session.device_id, e)
            session.connected = False
            session.command_sender = None
            session.target_pending = True

    # -- ingest ----------------------------------------------------------

    def ingest(self, sample: TemperatureSample) -> bool:
        """Accept one sample; returns False when it was dropped."""
        with self._lock:
            session = self._get_or_create(sample.device_id)
            if session.last_seq is not None and sample.seq <= session.last_seq:
                session.drop_count += 1
                return False
            last = session.window.latest
            if last is not None and sample.t_ms < last.t_ms:
                session.drop_count += 1
                return False
            self.store.append(sample)
            session.window.push(sample)
            session.last_seq = sample.seq
            session.last_seen_mono = self.clock()
            alarm = session.alarm
            event = None
            if alarm is not None and alarm.armed and not alarm.fired and sample.temp_f >= alarm.threshold_f:
                alarm.fired = True
                event = AlarmEvent(
                    device_id=sample.device_id,
                    seq=sample.seq,
                    t_ms=sample.t_ms,
                    temp_f=sample.temp_f,
                    threshold_f=alarm.threshold_f,
                    mode=alarm.mode,
                )
            self._publish(sample.device_id, "sample", sample_payload(sample))
            if event is not None:
                self._publish(sample.device_id, "alarm", alarm_payload(event))
        return True

    def note_malformed(self, device_id: str) -> None:
        with self._lock:
            self._get_or_create(device_id).drop_count += 1

    # -- queries ----------------------------------------------------------

    def connection_state(self, device_id: str) -> str:
        with self._lock:
            session = self._require(device_id)
            if not session.connected:
                return DISCONNECTED
            if session.last_seen_mono is not None and self.clock() - session.last_seen_mono > self.staleness_timeout_s:
                return STALE
            return CONNECTED

    def device_list(self) -> list[dict]:
        return [{"device_id": d, "state": self.connection_state(d)} for d in self.known_devices()]

    def current_temperature(self, device_id: str) -> tuple[TemperatureSample, bool] | None:
        with self._lock:
            self._require(device_id)
            latest = self.store.latest(device_id)
            if latest is None:
                return None
            return latest, self.connection_state(device_id) == STALE

    def set_target(self, device_id: str, temp_f: float) -> dict:
        if not isinstance(temp_f, (int, float)) or isinstance(temp_f, bool) or not TARGET_MIN_F <= temp_f <= TARGET_MAX_F:
            raise OutOfRangeError(temp_f)
        with self._lock:
            session = self._require(device_id)
            session.target_f = float(temp_f)
            if session.connected and session.command_sender is not None:
                self._forward_target(session)
            else:
                session.target_pending = True
            return {"target_f": session.target_f, "pending": session.target_pending}

    def get_target(self, device_id: str) -> dict:
        with self._lock:
            session = self._require(device_id)
            return {"target_f": session.target_f, "pending": session.target_pending}

    def predict(self, device_id: str) -> Prediction:
        with self._lock:
            session = self._require(device_id)
            if session.target_f is None:
                return Prediction.indeterminate()
            window = session.window.snapshot()
            target = session.target_f
        return prediction.predict(window, target, self.predictor_config)

    def arm_alarm(self, device_id: str, mode: str, temp_f: float | None = None) -> AlarmSetting:
        with self._lock:
            session = self._require(device_id)
            if mode == AT_TARGET_MODE:
                if session.target_f is None:
                    raise NoTargetError()
                threshold = session.target_f
            elif mode == AT_TEMP_MODE:
                if temp_f is None or not isinstance(temp_f, (int, float)) or isinstance(temp_f, bool) \
                        or not TARGET_MIN_F <= temp_f <= TARGET_MAX_F:
                    raise OutOfRangeError(temp_f if temp_f is not None else float("nan"))
                threshold = float(temp_f)
            else:
                raise ValueError(f"unknown alarm mode {mode!r}")
            session.alarm = AlarmSetting(mode=mode, threshold_f=threshold)
            return session.alarm

    def history(self, device_id: str, since_t_ms: int = 0) -> list[TemperatureSample]:
        with self._lock:
            self._require(device_id)
        return self.store.history(device_id, since_t_ms)

    def resolve_token(self, token: str) -> str:
        return self.registry.resolve(token)

    # -- events ------------------------------------------------------------

    def subscribe(self, device_id: str) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._require(device_id)
            self._subscribers.setdefault(device_id, []).append(q)
        return q

    def unsubscribe(self, device_id: str, q: queue.Queue) -> None:
        with self._lock:
            subs = self._subscribers.get(device_id, [])
            if q in subs:
                subs.remove(q)

    def _publish(self, device_id: str, kind: str, payload: dict) -> None:
        for q in self._subscribers.get(device_id, []):
            q.put((kind, payload))

    def close(self) -> None:
        with self._lock:
            self.closed = True
            for subs in self._subscribers.values():
                for q in subs:
                    q.put(None)
            self._subscribers.clear()
        self.store.close()


def sample_payload(sample: TemperatureSample) -> dict:
    return {
        "device_id": sample.device_id,
        "seq": sample.seq,
        "t_ms": sample.t_ms,
        "temp_f": float(f"{sample.temp_f:.1f}"),
    }


def alarm_payload(event: AlarmEvent) -> dict:
    return {
        "device_id": event.device_id,
        "seq": event.seq,
        "t_ms": event.t_ms,
        "temp_f": float(f"{event.temp_f:.1f}"),
        "threshold_f": event.threshold_f,
        "mode": event.mode,
    }
