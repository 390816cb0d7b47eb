"""Shared test helpers: independent oracles and small network clients.

The oracles are kept deliberately dumb and reuse none of the code paths
they check.
"""

from __future__ import annotations

import itertools
import json
import socket
import time
import urllib.error
import urllib.request

from cookstack import wire
from cookstack.config import config_from_dict
from cookstack.httpapi import ControlPlaneServer
from cookstack.intents import InteractionModel, Literal, SlotRef, UtteranceTemplate, normalize
from cookstack.prediction import TemperatureSample

_UNIT_WORDS = ["", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]
_TEEN_WORDS = ["ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
               "seventeen", "eighteen", "nineteen"]
_TEN_WORDS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]


def spell_number(n: int, with_and: bool = False) -> str:
    """Spell 0..999 in plain English words, composed digit group by digit group."""
    assert 0 <= n <= 999
    if n == 0:
        return "zero"
    words = []
    hundreds, rest = divmod(n, 100)
    if hundreds:
        words += [_UNIT_WORDS[hundreds], "hundred"]
        if rest and with_and:
            words.append("and")
    if rest:
        if rest < 10:
            words.append(_UNIT_WORDS[rest])
        elif rest < 20:
            words.append(_TEEN_WORDS[rest - 10])
        else:
            tens, unit = divmod(rest, 10)
            words.append(_TEN_WORDS[tens])
            if unit:
                words.append(_UNIT_WORDS[unit])
    return " ".join(words)


def slot_options(model: InteractionModel, slot_name: str, numbers: list[int]):
    """Every (bound value, consumed tokens) pair a slot can take."""
    vocab = model.vocab(slot_name)
    if vocab == "number":
        options = [(n, normalize(str(n))) for n in numbers]
        options += [(n, spell_number(n).split()) for n in numbers]
        return options
    return [(" ".join(phrase), list(phrase)) for phrase in vocab]


def instantiations(template: UtteranceTemplate, model: InteractionModel, numbers: list[int]):
    """All (token list, bindings, per-slot token lengths) a template can produce."""
    slots = [p.name for p in template.parts if isinstance(p, SlotRef)]
    option_lists = [slot_options(model, name, numbers) for name in slots]
    for combo in itertools.product(*option_lists):
        by_slot = dict(zip(slots, combo))
        tokens: list[str] = []
        lengths = []
        for part in template.parts:
            if isinstance(part, Literal):
                tokens.append(part.token)
            else:
                value, consumed = by_slot[part.name]
                tokens.extend(consumed)
                lengths.append(len(consumed))
        bindings = {name: value for name, (value, _) in by_slot.items()}
        yield tokens, bindings, tuple(lengths)


def brute_force_match(model: InteractionModel, text: str, numbers: list[int]):
    """Exhaustive reference matcher: enumerate every instantiation of every template.

    Winner selection mirrors the documented order: most literal tokens, fewest
    slots, smallest intent name, model definition order; among bindings of one
    template, the leftmost slot consuming the most tokens wins.
    """
    target = normalize(text)
    best = None
    best_key = None
    for i_idx, intent in enumerate(model.intents):
        for t_idx, template in enumerate(intent.samples):
            for tokens, bindings, lengths in instantiations(template, model, numbers):
                if tokens != target:
                    continue
                key = (
                    -template.literal_count,
                    len(template.slot_names),
                    intent.name,
                    i_idx,
                    t_idx,
                    tuple(-n for n in lengths),
                )
                if best_key is None or key < best_key:
                    best_key = key
                    best = (intent.name, bindings)
    return best


# --- network helpers ----------------------------------------------------


def boot_server(tokens=None, **overrides) -> ControlPlaneServer:
    """Control plane on ephemeral loopback ports; caller must stop() it."""
    raw = {
        "telemetry_addr": "127.0.0.1:0",
        "http_addr": "127.0.0.1:0",
        "tokens": tokens or {},
    }
    raw.update(overrides)
    server = ControlPlaneServer(config_from_dict(raw))
    server.start()
    return server


def http_json(method: str, url: str, payload=None, timeout=5.0):
    """(status, parsed body) for a JSON API call; HTTP errors are returned, not raised."""
    data = json.dumps(payload).encode() if payload is not None else None
    headers = {"Content-Type": "application/json"} if data else {}
    req = urllib.request.Request(url, data=data, method=method, headers=headers)
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
            return resp.status, json.loads(raw) if raw else None
    except urllib.error.HTTPError as e:
        raw = e.read()
        try:
            return e.code, json.loads(raw) if raw else None
        except json.JSONDecodeError:
            return e.code, raw


class FakeProbe:
    """Raw-socket device for exercising the telemetry listener."""

    def __init__(self, address, device_id: str):
        self.device_id = device_id
        self.sock = socket.create_connection(address, timeout=5.0)
        self.reader = self.sock.makefile("r", encoding="utf-8", newline="\n")
        self.send_line(wire.encode_hello(device_id))

    def send_line(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8") + b"\n")

    def send_sample(self, seq: int, t_ms: int, temp_f: float) -> None:
        self.send_line(wire.encode_sample(TemperatureSample(self.device_id, seq, t_ms, temp_f)))

    def read_line(self, timeout: float = 2.0) -> dict | None:
        self.sock.settimeout(timeout)
        try:
            line = self.reader.readline()
        except (TimeoutError, OSError):
            return None
        finally:
            self.sock.settimeout(5.0)
        return wire.parse_line(line.strip()) if line.strip() else None

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        time.sleep(0.05)  # let the server notice the disconnect


def wait_until(check, timeout=5.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = check()
        if value:
            return value
        time.sleep(interval)
    raise TimeoutError("condition not reached")


class SSEReader:
    """Collects server-sent events from a stream URL on a background read."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.resp = urllib.request.urlopen(url, timeout=timeout)
        self.events: list[tuple[str, dict]] = []

    def read(self, n: int, timeout: float = 5.0) -> list[tuple[str, dict]]:
        """Blocks until n more events arrived (or times out); returns all so far."""
        deadline = time.monotonic() + timeout
        current_event = None
        while len(self.events) < n and time.monotonic() < deadline:
            try:
                raw = self.resp.readline()
            except (TimeoutError, OSError):
                break
            if not raw:
                break
            line = raw.decode("utf-8").rstrip("\n")
            if line.startswith("event: "):
                current_event = line[len("event: "):]
            elif line.startswith("data: ") and current_event:
                self.events.append((current_event, json.loads(line[len("data: "):])))
                current_event = None
        return self.events

    def close(self) -> None:
        self.resp.close()
