"""HTTP API, server-sent event stream, and the device telemetry listener.

Everything is stdlib: a threading HTTP server for the JSON API plus a
threading TCP server speaking the newline-delimited telemetry protocol.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import queue
import socketserver
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from . import doneness, speech, wire
from .config import ServiceConfig
from .prediction import ETA, Prediction, render_minutes
from .session import Hub, NoTargetError, OutOfRangeError, UnknownDeviceError
from .store import TelemetryStore, TokenRegistry, UnknownTokenError

logger = logging.getLogger(__name__)


def _json_bytes(payload: dict) -> bytes:
    return json.dumps(payload, separators=(",", ":")).encode("utf-8")


def prediction_payload(p: Prediction) -> dict:
    if p.kind == ETA:
        return {
            "kind": "eta",
            "seconds": p.seconds_remaining,
            "minutes": render_minutes(p),
            "rate_f_per_s": p.rate_f_per_s,
        }
    return {"kind": p.kind}


def doneness_payload(table: doneness.DonenessTable) -> dict:
    return {
        "categories": [
            {
                "id": c.id,
                "display_name": c.display_name,
                "usda_minimum_f": c.usda_minimum_f,
                "usda_note": c.usda_note,
            }
            for c in table.categories
        ],
        "entries": [
            {
                "category": e.category,
                "name": e.name,
                "lower_f": e.lower_f,
                "upper_f": e.upper_f,
                "description": e.description,
            }
            for e in table.entries
        ],
    }


class ApiHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, hub: Hub, kb_table: doneness.DonenessTable, ui_dir: str | None = None):
        super().__init__(address, ApiHandler)
        self.hub = hub
        self.kb_table = kb_table
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self.assistant = None  # wired up by the composition layer


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: ApiHTTPServer

    def log_message(self, fmt, *args):
        logger.debug("http %s", fmt % args)

    # -- plumbing ---------------------------------------------------------

    def _send_raw(self, status: int, body: bytes, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: dict) -> None:
        self._send_raw(status, _json_bytes(payload))

    def _send_empty(self, status: int) -> None:
        self.send_response(status)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        body = json.loads(raw.decode("utf-8"))
        if not isinstance(body, dict):
            raise ValueError("body must be a JSON object")
        return body

    # -- routing ----------------------------------------------------------

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")

    def _route(self, method: str) -> None:
        parsed = urlsplit(self.path)
        query = parse_qs(parsed.query)
        parts = [p for p in parsed.path.split("/") if p]
        try:
            self._dispatch(method, parts, query)
        except UnknownDeviceError:
            self._send_json(404, {"error": "unknown_device"})
        except UnknownTokenError:
            self._send_json(401, {"error": "invalid_token"})
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True
        except Exception:
            logger.exception("unhandled error serving %s %s", method, self.path)
            self._send_json(500, {"error": "internal"})

    def _dispatch(self, method: str, parts: list[str], query: dict) -> None:
        hub = self.server.hub
        if method == "GET" and parts == ["NewHotStuff", "Aimtemp"]:
            return self._legacy_current_temp(query)
        if parts[:1] == ["ui"]:
            if method != "GET":
                return self._send_json(405, {"error": "method_not_allowed"})
            return self._serve_ui(parts[1:])
        if parts[:1] != ["api"]:
            return self._send_json(404, {"error": "not_found"})
        rest = parts[1:]

        if method == "GET" and rest == ["devices"]:
            return self._send_json(200, {"devices": hub.device_list()})
        if method == "GET" and rest == ["kb", "doneness"]:
            return self._send_json(200, doneness_payload(self.server.kb_table))
        if method == "GET" and rest == ["auth", "resolve"]:
            token = (query.get("token") or [""])[0]
            return self._send_json(200, {"device_id": hub.resolve_token(token)})
        if method == "POST" and rest == ["assistant", "utterance"]:
            return self._assistant_utterance()
        if len(rest) == 3 and rest[0] == "devices":
            return self._device_route(method, rest[1], rest[2], query)
        self._send_json(404, {"error": "not_found"})

    # -- device routes ------------------------------------------------------

    def _device_route(self, method: str, device_id: str, leaf: str, query: dict) -> None:
        hub = self.server.hub
        if method == "GET" and leaf == "temperature":
            answer = hub.current_temperature(device_id)
            if answer is None:
                return self._send_empty(204)
            sample, stale = answer
            return self._send_json(
                200, {"temp_f": float(f"{sample.temp_f:.1f}"), "t_ms": sample.t_ms, "stale": stale}
            )
        if method == "GET" and leaf == "target":
            return self._send_json(200, hub.get_target(device_id))
        if method == "POST" and leaf == "target":
            try:
                body = self._read_body()
            except ValueError:
                return self._send_json(400, {"error": "bad_json"})
            try:
                return self._send_json(200, hub.set_target(device_id, body.get("temp_f")))
            except OutOfRangeError:
                return self._send_json(422, {"error": "out_of_range"})
        if method == "GET" and leaf == "prediction":
            return self._send_json(200, prediction_payload(hub.predict(device_id)))
        if method == "POST" and leaf == "alarm":
            try:
                body = self._read_body()
            except ValueError:
                return self._send_json(400, {"error": "bad_json"})
            mode = body.get("mode")
            try:
                setting = hub.arm_alarm(device_id, mode, body.get("temp_f"))
            except NoTargetError:
                return self._send_json(409, {"error": "no_target"})
            except OutOfRangeError:
                return self._send_json(422, {"error": "out_of_range"})
            except ValueError:
                return self._send_json(400, {"error": "bad_mode"})
            return self._send_json(
                200, {"armed": setting.armed, "mode": setting.mode, "threshold_f": setting.threshold_f}
            )
        if method == "GET" and leaf == "history":
            since = 0
            raw_since = (query.get("since_ms") or ["0"])[0]
            try:
                since = int(raw_since)
            except ValueError:
                return self._send_json(400, {"error": "bad_since_ms"})
            samples = hub.history(device_id, since)
            return self._send_json(
                200,
                {"samples": [
                    {"device_id": s.device_id, "seq": s.seq, "t_ms": s.t_ms, "temp_f": float(f"{s.temp_f:.1f}")}
                    for s in samples
                ]},
            )
        if method == "GET" and leaf == "stream":
            return self._serve_stream(device_id)
        self._send_json(404, {"error": "not_found"})

    # -- special routes ------------------------------------------------------

    def _legacy_current_temp(self, query: dict) -> None:
        hub = self.server.hub
        token = (query.get("token") or [""])[0]
        device_id = hub.resolve_token(token)
        answer = hub.current_temperature(device_id)
        if answer is None:
            return self._send_json(404, {"error": "no_data"})
        sample, _ = answer
        body = _json_bytes({"message": speech.current_temp_message(sample.temp_f)})
        self._send_raw(200, body)

    def _assistant_utterance(self) -> None:
        if self.server.assistant is None:
            return self._send_json(503, {"error": "no_assistant"})
        try:
            body = self._read_body()
        except ValueError:
            return self._send_json(400, {"error": "bad_json"})
        reply = self.server.assistant(
            text=str(body.get("text", "")),
            token=str(body.get("token", "")),
            session_id=str(body.get("session_id", "")),
        )
        self._send_json(200, reply)

    def _serve_stream(self, device_id: str) -> None:
        hub = self.server.hub
        q = hub.subscribe(device_id)  # raises UnknownDeviceError first
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            idle = 0
            while True:
                try:
                    item = q.get(timeout=0.5)
                except queue.Empty:
                    idle += 1
                    if hub.closed:
                        break
                    if idle >= 10:
                        self.wfile.write(b": ping\n\n")
                        self.wfile.flush()
                        idle = 0
                    continue
                if item is None:
                    break
                idle = 0
                kind, payload = item
                chunk = f"event: {kind}\ndata: {json.dumps(payload, separators=(',', ':'))}\n\n"
                self.wfile.write(chunk.encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            hub.unsubscribe(device_id, q)
            self.close_connection = True

    def _serve_ui(self, rel_parts: list[str]) -> None:
        root = self.server.ui_dir
        if root is None or not root.is_dir():
            return self._send_json(404, {"error": "no_ui"})
        rel = "/".join(rel_parts) or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            return self._send_json(404, {"error": "not_found"})
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send_raw(200, target.read_bytes(), ctype)


class TelemetryServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, hub: Hub):
        super().__init__(address, TelemetryHandler)
        self.hub = hub


class TelemetryHandler(socketserver.StreamRequestHandler):
    server: TelemetryServer

    def handle(self):
        hub = self.server.hub
        raw = self.rfile.readline(1 << 16)
        if not raw:
            return
        try:
            record = wire.parse_line(raw.decode("utf-8").strip())
            if wire.record_kind(record) != "hello" or not isinstance(record["hello"], str) or not record["hello"]:
                raise wire.WireError("expected hello record")
        except wire.WireError:
            self._reply_error("expected_hello")
            return
        device_id = record["hello"]
        wlock = threading.Lock()

        def sender(line: str) -> None:
            with wlock:
                self.wfile.write(line.encode("utf-8") + b"\n")
                self.wfile.flush()

        hub.attach(device_id, sender)
        logger.info("device %s connected from %s", device_id, self.client_address)
        try:
            while True:
                raw = self.rfile.readline(1 << 16)
                if not raw:
                    break
                line = raw.decode("utf-8", errors="replace").strip()
                if not line:
                    continue
                try:
                    record = wire.parse_line(line)
                except wire.WireError:
                    hub.note_malformed(device_id)
                    continue
                kind = wire.record_kind(record)
                if kind == "sample":
                    try:
                        sample = wire.sample_from_record(record)
                    except wire.WireError:
                        hub.note_malformed(device_id)
                        continue
                    if sample.device_id != device_id:
                        hub.note_malformed(device_id)
                        continue
                    hub.ingest(sample)
                elif kind == "err":
                    logger.debug("device %s reported %s", device_id, record.get("err"))
                # other record kinds on this leg are ignored
        except (ConnectionResetError, OSError):
            pass
        finally:
            hub.detach(device_id)
            logger.info("device %s disconnected", device_id)

    def _reply_error(self, code: str) -> None:
        try:
            self.wfile.write(wire.encode_error(code).encode("utf-8") + b"\n")
        except OSError:
            pass


class ControlPlaneServer:
    """Composes the hub, the telemetry listener, and the HTTP API."""

    def __init__(self, cfg: ServiceConfig, kb_table: doneness.DonenessTable | None = None):
        self.cfg = cfg
        store = TelemetryStore(capacity=cfg.ring_capacity, log_path=cfg.log_path)
        registry = TokenRegistry(cfg.tokens)
        self.hub = Hub(
            store,
            registry,
            window_capacity=cfg.window_capacity,
            predictor_config=cfg.predictor,
            staleness_timeout_s=cfg.staleness_timeout_s,
        )
        self.kb_table = kb_table or doneness.load_default_table()
        self.http = ApiHTTPServer((cfg.http_host, cfg.http_port), self.hub, self.kb_table, cfg.ui_dir)
        self.telemetry = TelemetryServer((cfg.telemetry_host, cfg.telemetry_port), self.hub)
        self._threads: list[threading.Thread] = []

    @property
    def http_address(self) -> tuple[str, int]:
        return self.http.server_address[0], self.http.server_address[1]

    @property
    def telemetry_address(self) -> tuple[str, int]:
        return self.telemetry.server_address[0], self.telemetry.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self.http_address
        return f"http://{host}:{port}"

    def attach_assistant(self, handler) -> None:
        """handler(text=..., token=..., session_id=...) -> JSON-ready dict."""
        self.http.assistant = handler

    def start(self) -> None:
        for name, server in (("http", self.http), ("telemetry", self.telemetry)):
            t = threading.Thread(
                target=server.serve_forever, kwargs={"poll_interval": 0.05},
                name=f"cookstack-{name}", daemon=True,
            )
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self.hub.close()
        self.http.shutdown()
        self.telemetry.shutdown()
        self.http.server_close()
        self.telemetry.server_close()
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()
