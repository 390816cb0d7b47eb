"""Service configuration: one JSON file drives `cookctl serve`."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .prediction import DEFAULT_WINDOW_CAPACITY, PredictorConfig
from .store import DEFAULT_RING_CAPACITY


class ConfigError(ValueError):
    """Configuration file problem; the message names the offending field."""


@dataclass
class ServiceConfig:
    telemetry_host: str = "127.0.0.1"
    telemetry_port: int = 7701
    http_host: str = "127.0.0.1"
    http_port: int = 8701
    ring_capacity: int = DEFAULT_RING_CAPACITY
    staleness_timeout_s: float = 10.0
    log_path: str | None = None
    tokens: dict[str, str] = field(default_factory=dict)
    window_capacity: int = DEFAULT_WINDOW_CAPACITY
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    ui_dir: str | None = None


def parse_addr(value: str, field_name: str) -> tuple[str, int]:
    if not isinstance(value, str) or ":" not in value:
        raise ConfigError(f"{field_name} must be a 'host:port' string")
    host, _, port_text = value.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"{field_name} has a non-numeric port {port_text!r}") from None
    if not 0 <= port <= 65535:
        raise ConfigError(f"{field_name} port {port} out of range")
    return host or "127.0.0.1", port


def _positive_int(raw: dict, key: str, default: int) -> int:
    value = raw.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{key} must be a positive integer")
    return value


def _nonneg_number(raw: dict, key: str, default: float) -> float:
    value = raw.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
        raise ConfigError(f"{key} must be a non-negative number")
    return float(value)


def config_from_dict(raw: dict) -> ServiceConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {
        "telemetry_addr", "http_addr", "ring_capacity", "staleness_timeout_s", "log_path",
        "tokens", "window_capacity", "min_samples", "min_span_s", "rate_floor_f_per_s", "ui_dir",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
    telemetry_host, telemetry_port = parse_addr(raw.get("telemetry_addr", "127.0.0.1:7701"), "telemetry_addr")
    http_host, http_port = parse_addr(raw.get("http_addr", "127.0.0.1:8701"), "http_addr")
    tokens = raw.get("tokens", {})
    if not isinstance(tokens, dict) or not all(
        isinstance(k, str) and k and isinstance(v, str) and v for k, v in tokens.items()
    ):
        raise ConfigError("tokens must map non-empty token strings to non-empty device ids")
    log_path = raw.get("log_path")
    if log_path is not None and not isinstance(log_path, str):
        raise ConfigError("log_path must be a string or null")
    ui_dir = raw.get("ui_dir")
    if ui_dir is not None and not isinstance(ui_dir, str):
        raise ConfigError("ui_dir must be a string or null")
    predictor = PredictorConfig(
        min_samples=_positive_int(raw, "min_samples", 2),
        min_span_s=_nonneg_number(raw, "min_span_s", 5.0),
        rate_floor_f_per_s=_nonneg_number(raw, "rate_floor_f_per_s", 0.001),
    )
    return ServiceConfig(
        telemetry_host=telemetry_host,
        telemetry_port=telemetry_port,
        http_host=http_host,
        http_port=http_port,
        ring_capacity=_positive_int(raw, "ring_capacity", DEFAULT_RING_CAPACITY),
        staleness_timeout_s=_nonneg_number(raw, "staleness_timeout_s", 10.0),
        log_path=log_path,
        tokens=dict(tokens),
        window_capacity=_positive_int(raw, "window_capacity", DEFAULT_WINDOW_CAPACITY),
        predictor=predictor,
        ui_dir=ui_dir,
    )


def load_config(path: str | Path) -> ServiceConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON at line {e.lineno}: {e.msg}") from e
    return config_from_dict(raw)
