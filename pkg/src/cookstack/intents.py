"""Utterance-to-intent matching over a JSON interaction model.

Templates come from the interaction-model file as sample strings with
``{slotName}`` placeholders. A slot's vocabulary (or the marker "number")
lives in the file's slot_types section under the slot's own name. Matching
is deterministic: literals match token-for-token, slots prefer the longest
phrase or number run that lets the rest of the template match, and ties
between templates go to most literals, then fewest slots, then the
lexicographically smallest intent name.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

NUMBER_TYPE = "number"

_APOSTROPHES = {"'", "’", "‘"}
_SLOT_RE = re.compile(r"(\{[^{}]*\})")

_UNITS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9,
}
_TEENS = {
    "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19,
}
_TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}


class ModelFormatError(ValueError):
    """Raised when an interaction-model file cannot be parsed or validated."""


def normalize(text: str) -> list[str]:
    """Lowercase, delete apostrophes, turn other punctuation into spaces, split."""
    chars = []
    for ch in text.lower():
        if ch in _APOSTROPHES:
            continue
        chars.append(ch if ch.isalnum() else " ")
    return "".join(chars).split()


def parse_number(tokens: list[str]) -> int | None:
    """Parse a digit token or English number words up to 999; None when not a number."""
    if not tokens:
        return None
    if len(tokens) == 1 and tokens[0].isdigit():
        return int(tokens[0])
    if any(t.isdigit() for t in tokens):
        return None
    if tokens == ["zero"]:
        return 0
    total = 0
    i = 0
    if len(tokens) >= 2 and tokens[0] in _UNITS and tokens[1] == "hundred":
        total = _UNITS[tokens[0]] * 100
        i = 2
        if i < len(tokens) and tokens[i] == "and":
            i += 1
        if i == len(tokens):
            return total if tokens[i - 1] != "and" else None
    if i >= len(tokens):
        return None
    tok = tokens[i]
    if tok in _TEENS:
        total += _TEENS[tok]
        i += 1
    elif tok in _TENS:
        total += _TENS[tok]
        i += 1
        if i < len(tokens) and tokens[i] in _UNITS:
            total += _UNITS[tokens[i]]
            i += 1
    elif tok in _UNITS:
        total += _UNITS[tok]
        i += 1
    else:
        return None
    return total if i == len(tokens) else None


@dataclass(frozen=True)
class Literal:
    token: str


@dataclass(frozen=True)
class SlotRef:
    name: str


@dataclass(frozen=True)
class UtteranceTemplate:
    text: str
    parts: tuple[Literal | SlotRef, ...]

    @property
    def literal_count(self) -> int:
        return sum(1 for p in self.parts if isinstance(p, Literal))

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parts if isinstance(p, SlotRef))


@dataclass(frozen=True)
class IntentDef:
    name: str
    samples: tuple[UtteranceTemplate, ...]


@dataclass(frozen=True)
class IntentMatch:
    intent_name: str
    slots: dict[str, str | int]
    template: UtteranceTemplate


class InteractionModel:
    def __init__(self, intents: tuple[IntentDef, ...], slot_types: dict):
        self.intents = intents
        # enumerated vocabularies are kept longest-phrase-first so greedy
        # matching prefers "medium rare" over "medium"
        self.slot_types = slot_types

    def vocab(self, slot_name: str):
        return self.slot_types[slot_name]


def load_model(document: str) -> InteractionModel:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"interaction model is not valid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(raw, dict) or not isinstance(raw.get("intents"), list) or not isinstance(raw.get("slot_types"), dict):
        raise ModelFormatError("interaction model must be an object with 'intents' and 'slot_types'")

    slot_types: dict[str, object] = {}
    for name, value in raw["slot_types"].items():
        if value == NUMBER_TYPE:
            slot_types[name] = NUMBER_TYPE
            continue
        if not isinstance(value, list) or not value:
            raise ModelFormatError(f"slot type {name!r} must be a non-empty phrase list or \"{NUMBER_TYPE}\"")
        phrases = []
        for phrase in value:
            toks = tuple(normalize(str(phrase)))
            if not toks:
                raise ModelFormatError(f"slot type {name!r} contains an empty phrase")
            phrases.append(toks)
        phrases.sort(key=lambda p: (-len(p), p))
        slot_types[name] = tuple(phrases)

    intents = []
    seen = set()
    for item in raw["intents"]:
        if not isinstance(item, dict) or "name" not in item or "samples" not in item:
            raise ModelFormatError("each intent needs 'name' and 'samples'")
        name = str(item["name"]).strip()
        if not name:
            raise ModelFormatError("intent name is empty")
        if name in seen:
            raise ModelFormatError(f"duplicate intent name {name!r}")
        seen.add(name)
        if not isinstance(item["samples"], list) or not item["samples"]:
            raise ModelFormatError(f"intent {name!r} has no sample utterances")
        samples = tuple(_compile_template(str(s), slot_types) for s in item["samples"])
        intents.append(IntentDef(name=name, samples=samples))
    return InteractionModel(intents=tuple(intents), slot_types=slot_types)


def load_default_model() -> InteractionModel:
    """Load the interaction model shipped with the package."""
    text = resources.files("cookstack.data").joinpath("interaction_model.json").read_text(encoding="utf-8")
    return load_model(text)


def _compile_template(text: str, slot_types: dict) -> UtteranceTemplate:
    parts: list[Literal | SlotRef] = []
    # slots glued together with no separator at all ("{A}{B}") are a typo;
    # whitespace-separated slot pairs are legal and matched longest-first
    prev_was_slot = False
    chars_since_slot = 0
    slot_names = set()
    for piece in _SLOT_RE.split(text):
        if piece.startswith("{") and piece.endswith("}"):
            name = piece[1:-1].strip()
            if not name:
                raise ModelFormatError(f"template {text!r} has an empty slot reference")
            if name not in slot_types:
                raise ModelFormatError(f"template {text!r} references unknown slot type {name!r}")
            if name in slot_names:
                raise ModelFormatError(f"template {text!r} uses slot {name!r} twice")
            if prev_was_slot and chars_since_slot == 0:
                raise ModelFormatError(f"template {text!r} has adjacent slots with nothing between them")
            slot_names.add(name)
            parts.append(SlotRef(name))
            prev_was_slot = True
            chars_since_slot = 0
        else:
            chars_since_slot += len(piece)
            for tok in normalize(piece):
                parts.append(Literal(tok))
    return UtteranceTemplate(text=text, parts=tuple(parts))


def _match_parts(parts, tokens, model, pi=0, ti=0) -> dict | None:
    if pi == len(parts):
        return {} if ti == len(tokens) else None
    part = parts[pi]
    if isinstance(part, Literal):
        if ti < len(tokens) and tokens[ti] == part.token:
            return _match_parts(parts, tokens, model, pi + 1, ti + 1)
        return None
    vocab = model.vocab(part.name)
    if vocab == NUMBER_TYPE:
        for end in range(len(tokens), ti, -1):
            value = parse_number(tokens[ti:end])
            if value is None:
                continue
            rest = _match_parts(parts, tokens, model, pi + 1, end)
            if rest is not None:
                return {part.name: value, **rest}
        return None
    for phrase in vocab:
        if tuple(tokens[ti:ti + len(phrase)]) == phrase:
            rest = _match_parts(parts, tokens, model, pi + 1, ti + len(phrase))
            if rest is not None:
                return {part.name: " ".join(phrase), **rest}
    return None


def match_utterance(model: InteractionModel, text: str) -> IntentMatch | None:
    """Match one utterance against every template; None when nothing fits."""
    tokens = normalize(text)
    if not tokens:
        return None
    best = None
    best_key = None
    for i_idx, intent in enumerate(model.intents):
        for t_idx, template in enumerate(intent.samples):
            slots = _match_parts(template.parts, tokens, model)
            if slots is None:
                continue
            key = (-template.literal_count, len(template.slot_names), intent.name, i_idx, t_idx)
            if best_key is None or key < best_key:
                best_key = key
                best = IntentMatch(intent_name=intent.name, slots=slots, template=template)
    return best
