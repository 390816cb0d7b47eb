"""Assistant gateway: typed utterances in, spoken-reply text out.

Mirrors the classic skill-handler split: this layer only matches intents and
renders speech; every fact about a device is fetched from the control plane
over its public HTTP API (current temperature flows through the legacy
token endpoint, exactly like the original handler did). Every request gets
a SpeechResponse; transport trouble speaks "Internet error." and anything
unexpected speaks "Internal error."
"""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass
from urllib.parse import quote

from . import speech
from .intents import InteractionModel, IntentMatch, load_default_model, match_utterance

logger = logging.getLogger(__name__)


class GatewayTransportError(RuntimeError):
    """The control plane could not be reached."""


@dataclass(frozen=True)
class SpeechRequest:
    text: str
    token: str
    session_id: str = ""


@dataclass(frozen=True)
class SpeechResponse:
    speech: str
    end_session: bool = False
    intent_name: str = "none"

    def as_dict(self) -> dict:
        return {"speech": self.speech, "intent": self.intent_name, "end_session": self.end_session}


class AssistantGateway:
    def __init__(self, base_url: str, model: InteractionModel | None = None, timeout: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.model = model or load_default_model()
        self.timeout = timeout

    # -- http client -------------------------------------------------------

    def _request(self, method: str, path: str, payload: dict | None = None) -> tuple[int, dict]:
        url = self.base_url + path
        data = None
        headers = {}
        if payload is not None:
            data = json.dumps(payload).encode("utf-8")
            headers["Content-Type"] = "application/json"
        request = urllib.request.Request(url, data=data, method=method, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                return resp.status, _decode_body(resp.read())
        except urllib.error.HTTPError as e:
            return e.code, _decode_body(e.read())
        except (urllib.error.URLError, TimeoutError, OSError) as e:
            raise GatewayTransportError(str(e)) from e

    def _get(self, path: str) -> tuple[int, dict]:
        return self._request("GET", path)

    def _post(self, path: str, payload: dict) -> tuple[int, dict]:
        return self._request("POST", path, payload)

    # -- handling ------------------------------------------------------------

    def handle(self, req: SpeechRequest) -> SpeechResponse:
        intent_name = "none"
        try:
            match = match_utterance(self.model, req.text)
            if match is None:
                return SpeechResponse(speech=speech.HELP, intent_name="none")
            intent_name = match.intent_name
            return SpeechResponse(speech=self._dispatch(match, req), intent_name=intent_name)
        except GatewayTransportError:
            return SpeechResponse(speech=speech.INTERNET_ERROR, intent_name=intent_name)
        except Exception:
            logger.exception("assistant fault handling %r", req.text)
            return SpeechResponse(speech=speech.INTERNAL_ERROR, intent_name=intent_name)

    def handle_dict(self, text: str, token: str, session_id: str = "") -> dict:
        return self.handle(SpeechRequest(text=text, token=token, session_id=session_id)).as_dict()

    # -- per-intent dispatch ---------------------------------------------------

    def _dispatch(self, match: IntentMatch, req: SpeechRequest) -> str:
        if match.intent_name == "CurrentTempIntent":
            return self._current_temperature(req)
        device_id = self._resolve_device(req)
        if device_id is None:
            return speech.AUTH_FAILED
        if match.intent_name == "SetTargetTempIntent":
            return self._set_target(device_id, match)
        if match.intent_name == "CookTimeIntent":
            return self._cook_time(device_id)
        if match.intent_name == "SetTargetAlarmIntent":
            return self._set_alarm(device_id, match)
        raise RuntimeError(f"no handler for intent {match.intent_name!r}")

    def _current_temperature(self, req: SpeechRequest) -> str:
        status, body = self._get("/NewHotStuff/Aimtemp?token=" + quote(req.token, safe=""))
        if status == 401:
            return speech.AUTH_FAILED
        if status == 404:
            return speech.NO_DATA
        if status == 200 and isinstance(body.get("message"), str):
            return body["message"]
        raise RuntimeError(f"unexpected reply {status} from current-temperature endpoint")

    def _resolve_device(self, req: SpeechRequest) -> str | None:
        status, body = self._get("/api/auth/resolve?token=" + quote(req.token, safe=""))
        if status == 401:
            return None
        if status == 200 and isinstance(body.get("device_id"), str):
            return body["device_id"]
        raise RuntimeError(f"unexpected reply {status} from token resolution")

    def _set_target(self, device_id: str, match: IntentMatch) -> str:
        temp = _numeric_slot(match)
        if temp is None:
            raise RuntimeError("target-temperature intent matched without a numeric slot")
        status, body = self._post(f"/api/devices/{quote(device_id, safe='')}/target", {"temp_f": temp})
        if status == 422:
            return speech.OUT_OF_RANGE
        if status == 200:
            return speech.render_template(speech.TARGET_SET, {"**": speech.round_half_up(body["target_f"])})
        raise RuntimeError(f"unexpected reply {status} setting target")

    def _cook_time(self, device_id: str) -> str:
        status, body = self._get(f"/api/devices/{quote(device_id, safe='')}/prediction")
        if status != 200:
            raise RuntimeError(f"unexpected reply {status} fetching prediction")
        kind = body.get("kind")
        if kind == "eta":
            return speech.render_template(speech.COOK_TIME, {"xxx": int(body["minutes"])})
        if kind == "indeterminate":
            return speech.PREDICT_INDETERMINATE
        if kind == "at_target":
            return speech.PREDICT_AT_TARGET
        raise RuntimeError(f"unexpected prediction kind {kind!r}")

    def _set_alarm(self, device_id: str, match: IntentMatch) -> str:
        temp = _numeric_slot(match)
        path = f"/api/devices/{quote(device_id, safe='')}/alarm"
        if temp is not None:
            status, body = self._post(path, {"mode": "at_temp", "temp_f": temp})
            if status == 422:
                return speech.OUT_OF_RANGE
            if status == 200:
                return speech.render_template(speech.ALARM_AT_TEMP, {"**": speech.round_half_up(body["threshold_f"])})
            raise RuntimeError(f"unexpected reply {status} arming temperature alarm")
        status, _body = self._post(path, {"mode": "at_target"})
        if status == 409:
            return speech.NO_TARGET
        if status == 200:
            return speech.ALARM_AT_TARGET
        raise RuntimeError(f"unexpected reply {status} arming doneness alarm")


def _numeric_slot(match: IntentMatch) -> int | None:
    """The bound number, when any Temp/Complete-style slot carried one."""
    for value in match.slots.values():
        if isinstance(value, int):
            return value
    for value in match.slots.values():
        if isinstance(value, str) and value.isdigit():
            return int(value)
    return None


def _decode_body(raw: bytes) -> dict:
    if not raw:
        return {}
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return {}
    return body if isinstance(body, dict) else {}
