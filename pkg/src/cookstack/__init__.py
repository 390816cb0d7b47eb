"""Smart-cooking stack: simulated probe thermometer, telemetry control plane,
and a typed-utterance cooking assistant."""

__version__ = "0.1.0"
