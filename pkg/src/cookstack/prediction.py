"""Remaining-cook-time estimation over a sliding window of probe readings.

The heating rate is the least-squares slope of temperature against time over
the window; remaining time is (target - current) / rate. With a two-sample
window this reduces to the plain two-point ratio of time change to
temperature change scaled by the temperature still to go.
"""

from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass, field

ETA = "eta"
INDETERMINATE = "indeterminate"
AT_TARGET = "at_target"


class OutOfOrderSampleError(ValueError):
    """A sample violates the per-device ordering (seq strictly up, t_ms non-decreasing)."""


@dataclass(frozen=True)
class TemperatureSample:
    device_id: str
    seq: int
    t_ms: int
    temp_f: float


@dataclass(frozen=True)
class PredictorConfig:
    min_samples: int = 2
    min_span_s: float = 5.0
    # slopes at or below this (in F/s) are treated as "not heating"
    rate_floor_f_per_s: float = 0.001


DEFAULT_CONFIG = PredictorConfig()
DEFAULT_WINDOW_CAPACITY = 8


@dataclass(frozen=True)
class Prediction:
    kind: str
    seconds_remaining: float | None = None
    rate_f_per_s: float | None = None

    @classmethod
    def eta(cls, seconds_remaining: float, rate_f_per_s: float) -> "Prediction":
        if seconds_remaining <= 0:
            raise ValueError(f"eta requires positive seconds_remaining, got {seconds_remaining}")
        return cls(ETA, seconds_remaining=seconds_remaining, rate_f_per_s=rate_f_per_s)

    @classmethod
    def indeterminate(cls) -> "Prediction":
        return cls(INDETERMINATE)

    @classmethod
    def at_target(cls) -> "Prediction":
        return cls(AT_TARGET)


@dataclass
class SampleWindow:
    """FIFO window of the most recent samples, oldest first. Single writer."""

    capacity: int = DEFAULT_WINDOW_CAPACITY
    samples: deque[TemperatureSample] = field(default_factory=deque)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("window capacity must be at least 1")
        self.samples = deque(self.samples, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.samples)

    def push(self, sample: TemperatureSample) -> "SampleWindow":
        """Append a sample, evicting the oldest when full; rejects out-of-order input."""
        if self.samples:
            last = self.samples[-1]
            if sample.seq <= last.seq:
                raise OutOfOrderSampleError(f"seq {sample.seq} is not after {last.seq}")
            if sample.t_ms < last.t_ms:
                raise OutOfOrderSampleError(f"t_ms {sample.t_ms} is before {last.t_ms}")
        self.samples.append(sample)
        return self

    def snapshot(self) -> "SampleWindow":
        return SampleWindow(capacity=self.capacity, samples=deque(self.samples))

    @property
    def latest(self) -> TemperatureSample | None:
        return self.samples[-1] if self.samples else None


def heating_rate(window: SampleWindow, config: PredictorConfig = DEFAULT_CONFIG) -> float | None:
    """Least-squares heating rate in F/s, or None when the window cannot support one.

    None (indeterminate) covers: too few samples, too little time span, and
    slopes at or below the configured floor (flat or cooling).
    """
    samples = list(window.samples)
    if len(samples) < max(config.min_samples, 2):
        return None
    t0 = samples[0].t_ms
    span_s = (samples[-1].t_ms - t0) / 1000.0
    if span_s < config.min_span_s or span_s <= 0:
        return None
    # time is measured relative to the first sample, so shifting every t_ms
    # by a constant cannot change the result
    xs = [(s.t_ms - t0) / 1000.0 for s in samples]
    ys = [s.temp_f for s in samples]
    try:
        slope = statistics.linear_regression(xs, ys).slope
    except statistics.StatisticsError:
        return None
    if slope <= config.rate_floor_f_per_s:
        return None
    return slope


def predict(window: SampleWindow, target_f: float, config: PredictorConfig = DEFAULT_CONFIG) -> Prediction:
    """Remaining time to target: at_target, eta, or indeterminate."""
    latest = window.latest
    if latest is None:
        return Prediction.indeterminate()
    if latest.temp_f >= target_f:
        return Prediction.at_target()
    rate = heating_rate(window, config)
    if rate is None:
        return Prediction.indeterminate()
    return Prediction.eta((target_f - latest.temp_f) / rate, rate)


def render_minutes(p: Prediction) -> int | None:
    """Whole minutes for speech output, rounded up so the cook is never told too early."""
    if p.kind != ETA:
        return None
    return math.ceil(p.seconds_remaining / 60.0)
