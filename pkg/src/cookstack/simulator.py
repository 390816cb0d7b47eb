"""Simulated probe thermometer.

The food temperature follows Newtonian heating toward the heat-source
temperature: T(t+dt) = env + (T(t) - env) * exp(-k * dt), with optional
seeded Gaussian noise added per step. A simulated clock drives everything,
so long cooks run in milliseconds; --realtime mode sleeps between emissions
for live demos.
"""

from __future__ import annotations

import logging
import math
import queue
import random
import socket
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable

from . import wire
from .prediction import TemperatureSample

logger = logging.getLogger(__name__)

TARGET_MIN_F = 32.0
TARGET_MAX_F = 572.0

TARGET_UP = "target_up"
TARGET_DOWN = "target_down"
START_TIMER = "start_timer"
SET_TARGET = "set_target"
ARM_ALARM = "arm_alarm"
DISARM = "disarm"

_COMMAND_KINDS = {TARGET_UP, TARGET_DOWN, START_TIMER, SET_TARGET, ARM_ALARM, DISARM}


class CommandError(ValueError):
    """A device command that the firmware rejects."""


class UnknownCommandError(CommandError):
    """A command kind the firmware does not know."""


class TransportError(RuntimeError):
    """The telemetry sink failed; the run is aborted."""


@dataclass(frozen=True)
class ThermalParams:
    t0_f: float
    env_f: float
    k_per_s: float
    noise_sigma_f: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.k_per_s <= 0:
            raise ValueError("k_per_s must be positive")
        if self.noise_sigma_f < 0:
            raise ValueError("noise_sigma_f must be non-negative")


@dataclass(frozen=True)
class DeviceState:
    device_id: str
    current_f: float
    target_f: float = 165.0
    elapsed_s: float = 0.0
    timer_running: bool = False
    alarm_armed: bool = False
    alarm_fired: bool = False
    sim_clock_ms: int = 0


@dataclass(frozen=True)
class DeviceCommand:
    kind: str
    temp_f: float | None = None


def command_from_record(record: dict) -> DeviceCommand:
    kind = record.get("cmd")
    if kind not in _COMMAND_KINDS:
        raise UnknownCommandError(f"unknown command {kind!r}")
    if kind == SET_TARGET:
        temp = record.get("temp_f")
        if not isinstance(temp, (int, float)) or isinstance(temp, bool):
            raise CommandError("set_target needs a numeric temp_f")
        if not TARGET_MIN_F <= temp <= TARGET_MAX_F:
            raise CommandError(f"target {temp} outside [{TARGET_MIN_F}, {TARGET_MAX_F}] F")
        return DeviceCommand(SET_TARGET, temp_f=float(temp))
    return DeviceCommand(kind)


def step(state: DeviceState, params: ThermalParams, dt_s: float, rng: random.Random | None = None) -> DeviceState:
    """Advance the simulation by dt_s seconds."""
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    current = params.env_f + (state.current_f - params.env_f) * math.exp(-params.k_per_s * dt_s)
    if params.noise_sigma_f > 0 and rng is not None:
        current += rng.gauss(0.0, params.noise_sigma_f)
    fired = state.alarm_fired or (state.alarm_armed and current >= state.target_f)
    return replace(
        state,
        current_f=current,
        elapsed_s=state.elapsed_s + dt_s if state.timer_running else state.elapsed_s,
        alarm_fired=fired,
        sim_clock_ms=state.sim_clock_ms + round(dt_s * 1000),
    )


def apply_command(state: DeviceState, cmd: DeviceCommand) -> DeviceState:
    if cmd.kind == TARGET_UP:
        return replace(state, target_f=min(state.target_f + 1.0, TARGET_MAX_F))
    if cmd.kind == TARGET_DOWN:
        return replace(state, target_f=max(state.target_f - 1.0, TARGET_MIN_F))
    if cmd.kind == SET_TARGET:
        if cmd.temp_f is None or not TARGET_MIN_F <= cmd.temp_f <= TARGET_MAX_F:
            raise CommandError(f"target {cmd.temp_f} outside [{TARGET_MIN_F}, {TARGET_MAX_F}] F")
        return replace(state, target_f=float(cmd.temp_f))
    if cmd.kind == START_TIMER:
        return replace(state, timer_running=True, elapsed_s=0.0)
    if cmd.kind == ARM_ALARM:
        return replace(state, alarm_armed=True)
    if cmd.kind == DISARM:
        return replace(state, alarm_armed=False, alarm_fired=False)
    raise CommandError(f"unknown command {cmd.kind!r}")


def run(
    params: ThermalParams,
    cadence_s: float,
    duration_s: float,
    sink: Callable[[TemperatureSample], None],
    device_id: str = "probe",
    commands: Callable[[], Iterable[DeviceCommand]] | None = None,
    realtime: bool = False,
    initial: DeviceState | None = None,
) -> DeviceState:
    """Emit floor(duration/cadence) samples, applying inbound commands between steps."""
    if cadence_s <= 0:
        raise ValueError("cadence_s must be positive")
    rng = random.Random(params.seed)
    state = initial if initial is not None else DeviceState(device_id=device_id, current_f=params.t0_f)
    n_steps = int(duration_s // cadence_s)
    for i in range(1, n_steps + 1):
        if commands is not None:
            for cmd in commands():
                try:
                    state = apply_command(state, cmd)
                except CommandError as e:
                    logger.warning("dropped rejected command: %s", e)
        state = step(state, params, cadence_s, rng)
        sample = TemperatureSample(device_id=state.device_id, seq=i, t_ms=state.sim_clock_ms, temp_f=state.current_f)
        try:
            sink(sample)
        except Exception as e:
            raise TransportError(f"telemetry sink failed at seq {i}: {e}") from e
        if realtime:
            time.sleep(cadence_s)
    return state


class ProbeConnection:
    """Device side of the wire protocol: streams samples out, takes commands in.

    A reader thread parses inbound command lines into a queue; `drain_commands`
    hands the validated ones to the simulation loop. Bad commands are answered
    on the outbound stream and never reach the loop.
    """

    def __init__(self, host: str, port: int, device_id: str, connect_timeout: float = 5.0):
        self.device_id = device_id
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._sock.settimeout(None)
        self._wlock = threading.Lock()
        self._commands: queue.Queue[DeviceCommand] = queue.Queue()
        self._closed = threading.Event()
        self._send_line(wire.encode_hello(device_id))
        self._reader = threading.Thread(target=self._read_loop, name=f"probe-reader-{device_id}", daemon=True)
        self._reader.start()

    def _send_line(self, line: str) -> None:
        with self._wlock:
            self._sock.sendall(line.encode("utf-8") + b"\n")

    def send_sample(self, sample: TemperatureSample) -> None:
        self._send_line(wire.encode_sample(sample))

    def drain_commands(self) -> list[DeviceCommand]:
        out = []
        while True:
            try:
                out.append(self._commands.get_nowait())
            except queue.Empty:
                return out

    def _read_loop(self) -> None:
        try:
            reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = wire.parse_line(line)
                    if wire.record_kind(record) != "cmd":
                        continue
                    self._commands.put(command_from_record(record))
                except (CommandError, wire.WireError) as e:
                    if isinstance(e, UnknownCommandError):
                        code = "unknown_cmd"
                    elif isinstance(e, CommandError):
                        code = "rejected_command"
                    else:
                        logger.debug("ignoring malformed inbound line: %r", line)
                        continue
                    try:
                        self._send_line(wire.encode_error(code))
                    except OSError:
                        return
        except (OSError, ValueError):
            pass
        finally:
            self._closed.set()

    def close(self) -> None:
        self._closed.set()
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
