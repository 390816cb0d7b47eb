"""Newline-delimited JSON wire protocol between probe devices and the service.

Device -> service: one hello record, then one sample per line.
Service -> device: one command per line. Unknown keys in a record are
ignored; only missing or mistyped required keys make a record malformed.
"""

from __future__ import annotations

import json

from .prediction import TemperatureSample


class WireError(ValueError):
    """A line that cannot be decoded into a known record."""


def encode_sample(sample: TemperatureSample) -> str:
    # temp_f is carried with one decimal place
    record = {
        "device_id": sample.device_id,
        "seq": sample.seq,
        "t_ms": sample.t_ms,
        "temp_f": float(f"{sample.temp_f:.1f}"),
    }
    return json.dumps(record, separators=(",", ":"))


def encode_hello(device_id: str) -> str:
    return json.dumps({"hello": device_id}, separators=(",", ":"))


def encode_command(cmd: str, **fields) -> str:
    return json.dumps({"cmd": cmd, **fields}, separators=(",", ":"))


def encode_error(code: str) -> str:
    return json.dumps({"err": code}, separators=(",", ":"))


def parse_line(line: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise WireError(f"bad JSON line: {e.msg}") from e
    if not isinstance(record, dict):
        raise WireError("wire records must be JSON objects")
    return record


def record_kind(record: dict) -> str:
    """One of 'hello', 'cmd', 'err', 'sample', 'unknown'."""
    if "hello" in record:
        return "hello"
    if "cmd" in record:
        return "cmd"
    if "err" in record:
        return "err"
    if {"device_id", "seq", "t_ms", "temp_f"} <= record.keys():
        return "sample"
    return "unknown"


def sample_from_record(record: dict) -> TemperatureSample:
    device_id = record.get("device_id")
    seq = record.get("seq")
    t_ms = record.get("t_ms")
    temp_f = record.get("temp_f")
    if not isinstance(device_id, str) or not device_id:
        raise WireError("sample record needs a non-empty string device_id")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise WireError("sample record needs an integer seq")
    if not isinstance(t_ms, int) or isinstance(t_ms, bool):
        raise WireError("sample record needs an integer t_ms")
    if not isinstance(temp_f, (int, float)) or isinstance(temp_f, bool):
        raise WireError("sample record needs a numeric temp_f")
    return TemperatureSample(device_id=device_id, seq=seq, t_ms=t_ms, temp_f=float(temp_f))
