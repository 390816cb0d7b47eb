"""Spoken reply templates and their placeholder substitution.

Placeholders: ``**`` carries a whole-degree number, ``xxx`` a minute count.
Temperatures destined for speech are rounded half-up so 120.5 speaks as 121.
"""

from __future__ import annotations

import math

CURRENT_TEMP = "Your food is currently at ** degrees Fahrenheit."
TARGET_SET = "Ok, your Target Temperature has been set to ** degrees."
COOK_TIME = "Your thermometer predicts that the time-to-temperature is xxx minutes."
ALARM_AT_TEMP = "Ok, your temperature alarm is set for ** degrees."
ALARM_AT_TARGET = "Ok, I will notify you when your food is done."

TEMPLATES = {
    "CurrentTempIntent": CURRENT_TEMP,
    "SetTargetTempIntent": TARGET_SET,
    "CookTimeIntent": COOK_TIME,
    "SetTargetAlarmIntent": ALARM_AT_TARGET,
}

HELP = (
    "Sorry, I didn't catch that. You can ask for the current temperature, "
    "set a target temperature, ask when your food will be ready, or ask to "
    "be notified when it's done."
)
AUTH_FAILED = "I couldn't find a thermometer for that account token."
NO_DATA = "I don't have a temperature reading from your thermometer yet."
NO_TARGET = "You haven't set a target temperature yet, so I can't arm the doneness alarm."
OUT_OF_RANGE = "I can only set temperatures between 32 and 572 degrees Fahrenheit."
PREDICT_INDETERMINATE = "I don't have enough readings to predict yet."
PREDICT_AT_TARGET = "Your food has reached its target temperature."
INTERNET_ERROR = "Internet error."
INTERNAL_ERROR = "Internal error."


def round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def render_template(template: str, values: dict[str, object]) -> str:
    """Substitute placeholder values; a placeholder left unfilled is a fault."""
    out = template
    for placeholder, value in values.items():
        out = out.replace(placeholder, str(value))
    for placeholder in ("**", "xxx"):
        if placeholder in out:
            raise KeyError(f"template needs a value for {placeholder!r}")
    return out


def current_temp_message(temp_f: float) -> str:
    return render_template(CURRENT_TEMP, {"**": round_half_up(temp_f)})
