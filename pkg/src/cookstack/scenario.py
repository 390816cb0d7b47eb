"""Scripted end-to-end runs: in-process service + simulated probe, fast clock.

A scenario file names the thermal setup and a time-ordered script of actions.
Actions either do something (speak an utterance, press a device button, call
an API route) or assert something (speech text, API fields, series shape,
alarm behavior). The simulator is advanced step by step to each action's
time, so a two-hour cook scripts in well under a second of wall time.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .config import config_from_dict
from .gateway import AssistantGateway
from .httpapi import ControlPlaneServer
from .prediction import TemperatureSample
from .simulator import DeviceState, ProbeConnection, ThermalParams, apply_command, command_from_record, step
from . import wire

logger = logging.getLogger(__name__)

_ACTION_KEYS = {
    "at_s", "note",
    "say", "expect_speech", "expect_speech_contains",
    "get", "expect", "expect_status", "record",
    "device_cmd",
    "assert_decreasing", "assert_first_crossing", "assert_alarm_count",
    "assert_alarm_at_first_crossing",
}


class ScenarioError(ValueError):
    """The scenario file is malformed."""


@dataclass
class Scenario:
    name: str
    device_id: str
    token: str
    thermal: ThermalParams
    cadence_s: float
    duration_s: float
    script: list[dict]


@dataclass
class AssertionResult:
    at_s: float
    label: str
    passed: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    name: str
    results: list[AssertionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def load_scenario(path: str | Path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file: {e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file is not valid JSON at line {e.lineno}: {e.msg}") from e
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("name", "device_id", "token", "thermal", "cadence_s"):
        if key not in raw:
            raise ScenarioError(f"scenario is missing {key!r}")
    thermal_raw = raw["thermal"]
    if not isinstance(thermal_raw, dict):
        raise ScenarioError("thermal must be an object")
    try:
        thermal = ThermalParams(
            t0_f=float(thermal_raw["t0_f"]),
            env_f=float(thermal_raw["env_f"]),
            k_per_s=float(thermal_raw["k_per_s"]),
            noise_sigma_f=float(thermal_raw.get("noise_sigma_f", 0.0)),
            seed=int(thermal_raw.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"bad thermal parameters: {e}") from e
    cadence = raw["cadence_s"]
    if not isinstance(cadence, (int, float)) or cadence <= 0:
        raise ScenarioError("cadence_s must be a positive number")
    script = raw.get("script", [])
    if not isinstance(script, list):
        raise ScenarioError("script must be a list")
    last_at = 0.0
    for i, action in enumerate(script):
        if not isinstance(action, dict):
            raise ScenarioError(f"script[{i}] must be an object")
        unknown = set(action) - _ACTION_KEYS
        if unknown:
            raise ScenarioError(f"script[{i}] has unknown keys {sorted(unknown)}")
        at = action.get("at_s")
        if not isinstance(at, (int, float)) or at < 0:
            raise ScenarioError(f"script[{i}] needs a non-negative at_s")
        if at < last_at:
            raise ScenarioError(f"script[{i}] at_s={at} goes backwards (previous {last_at})")
        last_at = float(at)
    duration = raw.get("duration_s", last_at)
    if not isinstance(duration, (int, float)) or duration < last_at:
        raise ScenarioError("duration_s must cover the last scripted action")
    return Scenario(
        name=str(raw["name"]),
        device_id=str(raw["device_id"]),
        token=str(raw["token"]),
        thermal=thermal,
        cadence_s=float(cadence),
        duration_s=float(duration),
        script=script,
    )


class _EventCollector:
    """Tails a device's event stream, keeping every sample/alarm event."""

    def __init__(self, stream_url: str):
        self.samples: list[dict] = []
        self.alarms: list[dict] = []
        self._resp = urllib.request.urlopen(stream_url, timeout=30.0)
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _loop(self):
        event = None
        try:
            for raw in self._resp:
                line = raw.decode("utf-8").rstrip("\n")
                if line.startswith("event: "):
                    event = line[len("event: "):]
                elif line.startswith("data: ") and event:
                    payload = json.loads(line[len("data: "):])
                    (self.alarms if event == "alarm" else self.samples).append(payload)
                    event = None
        except (OSError, ValueError):
            pass

    def close(self):
        try:
            self._resp.close()
        except OSError:
            pass


class ScenarioRunner:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.report = ScenarioReport(name=scenario.name)
        self._series: dict[str, list[float]] = {}

    # one assertion per scripted expectation
    def _record(self, at_s: float, label: str, passed: bool, detail: str = "") -> None:
        self.report.results.append(AssertionResult(at_s=at_s, label=label, passed=passed, detail=detail))

    def run(self) -> ScenarioReport:
        sc = self.scenario
        server = ControlPlaneServer(config_from_dict({
            "telemetry_addr": "127.0.0.1:0",
            "http_addr": "127.0.0.1:0",
            "tokens": {sc.token: sc.device_id},
        }))
        server.start()
        gateway = AssistantGateway(server.base_url)
        server.attach_assistant(gateway.handle_dict)
        probe = ProbeConnection(*server.telemetry_address, device_id=sc.device_id)
        collector = _EventCollector(f"{server.base_url}/api/devices/{sc.device_id}/stream")
        self._live_collector = collector
        state = DeviceState(device_id=sc.device_id, current_f=sc.thermal.t0_f)
        rng = random.Random(sc.thermal.seed)
        self._seq = 0
        try:
            for action in sc.script:
                state = self._advance(server, probe, state, rng, float(action["at_s"]))
                state = self._execute(server, action, state)
                state = self._apply_inbound(probe, state)
            self._advance(server, probe, state, rng, sc.duration_s)
        finally:
            probe.close()
            collector.close()
            server.stop()
        return self.report

    # -- simulation drive ----------------------------------------------------

    def _apply_inbound(self, probe: ProbeConnection, state: DeviceState) -> DeviceState:
        for cmd in probe.drain_commands():
            state = apply_command(state, cmd)
        return state

    def _advance(self, server, probe, state: DeviceState, rng, until_s: float) -> DeviceState:
        sc = self.scenario
        while (self._seq + 1) * sc.cadence_s <= until_s + 1e-9:
            state = self._apply_inbound(probe, state)
            state = step(state, sc.thermal, sc.cadence_s, rng)
            self._seq += 1
            probe.send_sample(TemperatureSample(
                device_id=sc.device_id, seq=self._seq, t_ms=state.sim_clock_ms, temp_f=state.current_f,
            ))
        if self._seq:
            self._wait_ingested(server, self._seq)
        return state

    def _wait_ingested(self, server, seq: int, timeout: float = 5.0) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            latest = server.hub.store.latest(self.scenario.device_id)
            if latest is not None and latest.seq >= seq:
                return
            time.sleep(0.005)
        raise TimeoutError(f"service did not ingest up to seq {seq}")

    # -- actions ---------------------------------------------------------------

    def _execute(self, server, action: dict, state: DeviceState) -> DeviceState:
        at = float(action["at_s"])
        if "say" in action:
            self._do_say(server, at, action)
        elif "get" in action:
            self._do_get(server, at, action)
        elif "device_cmd" in action:
            cmd = command_from_record(action["device_cmd"])
            # buttons are pressed on the device itself; no wire round trip
            state = apply_command(state, cmd)
        if "assert_decreasing" in action:
            self._do_assert_decreasing(at, action["assert_decreasing"])
        if "assert_first_crossing" in action:
            self._do_assert_first_crossing(server, at, action["assert_first_crossing"])
        if "assert_alarm_count" in action:
            self._do_assert_alarm_count(server, at, int(action["assert_alarm_count"]))
        if "assert_alarm_at_first_crossing" in action:
            self._do_assert_alarm_at_crossing(server, at, action["assert_alarm_at_first_crossing"])
        return state

    def _do_say(self, server, at: float, action: dict) -> None:
        payload = {"text": action["say"], "token": self.scenario.token, "session_id": self.scenario.name}
        data = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            f"{server.base_url}/api/assistant/utterance", data=data,
            headers={"Content-Type": "application/json"}, method="POST",
        )
        with urllib.request.urlopen(req, timeout=10.0) as resp:
            body = json.loads(resp.read())
        spoken = body.get("speech", "")
        if "expect_speech" in action:
            want = action["expect_speech"]
            self._record(at, f'say {action["say"]!r}', spoken == want,
                         f"spoken={spoken!r} expected={want!r}")
        elif "expect_speech_contains" in action:
            want = action["expect_speech_contains"]
            self._record(at, f'say {action["say"]!r}', want in spoken,
                         f"spoken={spoken!r} expected substring={want!r}")

    def _do_get(self, server, at: float, action: dict) -> None:
        path = action["get"]
        try:
            with urllib.request.urlopen(server.base_url + path, timeout=10.0) as resp:
                status, body = resp.status, json.loads(resp.read() or b"null")
        except urllib.error.HTTPError as e:
            status, body = e.code, {}
        if "expect_status" in action:
            want = int(action["expect_status"])
            self._record(at, f"GET {path}", status == want, f"status={status} expected={want}")
        if "expect" in action:
            wanted = action["expect"]
            ok = isinstance(body, dict) and all(body.get(k) == v for k, v in wanted.items())
            self._record(at, f"GET {path}", ok, f"body={body} expected subset={wanted}")
        if "record" in action:
            spec_ = action["record"]
            series = self._series.setdefault(spec_["series"], [])
            value = body.get(spec_["field"]) if isinstance(body, dict) else None
            series.append(value)

    def _do_assert_decreasing(self, at: float, series_name: str) -> None:
        series = self._series.get(series_name, [])
        ok = (
            len(series) >= 2
            and all(v is not None for v in series)
            and all(a > b for a, b in zip(series, series[1:]))
        )
        self._record(at, f"series {series_name!r} strictly decreasing", ok, f"series={series}")

    def _first_crossing(self, server, temp_f: float) -> dict | None:
        with urllib.request.urlopen(
            f"{server.base_url}/api/devices/{self.scenario.device_id}/history?since_ms=0", timeout=10.0
        ) as resp:
            samples = json.loads(resp.read())["samples"]
        for s in samples:
            if s["temp_f"] >= temp_f:
                return s
        return None

    def _do_assert_first_crossing(self, server, at: float, spec_: dict) -> None:
        crossing = self._first_crossing(server, float(spec_["temp_f"]))
        expected = float(spec_["expected_s"])
        tol = float(spec_["tol_s"])
        if crossing is None:
            self._record(at, f"first crossing of {spec_['temp_f']}F", False, "never crossed")
            return
        got_s = crossing["t_ms"] / 1000.0
        self._record(
            at, f"first crossing of {spec_['temp_f']}F within {tol}s of {expected}s",
            abs(got_s - expected) <= tol, f"crossed at {got_s}s (seq {crossing['seq']})",
        )

    def _wait_alarm_events(self, server) -> list[dict]:
        # alarms publish synchronously with ingest; give the stream a beat
        deadline = time.monotonic() + 2.0
        collector = getattr(self, "_live_collector", None)
        while time.monotonic() < deadline:
            if collector is not None and collector.samples and collector.samples[-1]["seq"] >= self._seq:
                break
            time.sleep(0.01)
        return collector.alarms if collector is not None else []

    def _do_assert_alarm_count(self, server, at: float, expected: int) -> None:
        alarms = self._wait_alarm_events(server)
        self._record(at, f"exactly {expected} alarm event(s)", len(alarms) == expected,
                     f"alarms={alarms}")

    def _do_assert_alarm_at_crossing(self, server, at: float, spec_: dict) -> None:
        alarms = self._wait_alarm_events(server)
        crossing = self._first_crossing(server, float(spec_["temp_f"]))
        ok = bool(alarms) and crossing is not None and alarms[0]["seq"] == crossing["seq"]
        detail = f"alarm_seqs={[a['seq'] for a in alarms]} crossing_seq={crossing['seq'] if crossing else None}"
        self._record(at, "alarm fired on the first crossing sample", ok, detail)


def run_scenario_file(path: str | Path) -> ScenarioReport:
    scenario = load_scenario(path)
    return ScenarioRunner(scenario).run()
