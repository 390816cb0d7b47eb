import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cookstack.intents import (
    ModelFormatError,
    load_default_model,
    load_model,
    match_utterance,
    normalize,
    parse_number,
)
from support import brute_force_match, spell_number


@pytest.fixture(scope="module")
def model():
    return load_default_model()


def toy_model(doc: dict):
    return load_model(json.dumps(doc))


# --- normalize ---------------------------------------------------------


def test_normalize_examples():
    assert normalize("What's the temperature?") == ["whats", "the", "temperature"]
    assert normalize("Set thermometer to 165 degrees.") == ["set", "thermometer", "to", "165", "degrees"]
    assert normalize("") == []
    assert normalize("don’t STOP, now!") == ["dont", "stop", "now"]


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=60))
def test_normalize_idempotent(text):
    once = normalize(text)
    assert normalize(" ".join(once)) == once


# --- parse_number ------------------------------------------------------


def test_parse_number_examples():
    assert parse_number(["165"]) == 165
    assert parse_number(["one", "hundred", "sixty", "five"]) == 165
    assert parse_number(["ninety"]) == 90
    assert parse_number(["medium", "rare"]) is None
    assert parse_number([]) is None
    assert parse_number(["one", "hundred", "and", "five"]) == 105
    assert parse_number(["sixty", "hundred"]) is None
    assert parse_number(["165", "degrees"]) is None


def test_parse_number_against_spelled_out_table():
    for n in range(1000):
        words = spell_number(n).split()
        assert parse_number(words) == n, (n, words)
        if n >= 100 and n % 100:
            assert parse_number(spell_number(n, with_and=True).split()) == n


# --- model loading -----------------------------------------------------


def test_shipped_model_loads_with_trimmed_names(model):
    assert [i.name for i in model.intents] == [
        "CurrentTempIntent",
        "SetTargetTempIntent",
        "CookTimeIntent",
        "SetTargetAlarmIntent",
    ]
    assert sum(len(i.samples) for i in model.intents) == 12


def test_adjacent_slots_rejected():
    doc = {
        "intents": [{"name": "X", "samples": ["{A_x}{B_y} foo"]}],
        "slot_types": {"A_x": ["a"], "B_y": ["b"]},
    }
    with pytest.raises(ModelFormatError) as exc:
        toy_model(doc)
    assert "{A_x}{B_y} foo" in str(exc.value)


def test_space_separated_slot_pair_is_allowed():
    # the shipped model contains one of these, so they must load and match
    doc = {
        "intents": [{"name": "X", "samples": ["check {A_x} {B_y}"]}],
        "slot_types": {"A_x": ["a"], "B_y": ["b"]},
    }
    m = toy_model(doc)
    got = match_utterance(m, "check a b")
    assert got is not None and got.slots == {"A_x": "a", "B_y": "b"}


def test_unknown_slot_type_rejected():
    doc = {"intents": [{"name": "X", "samples": ["hello {Mystery}"]}], "slot_types": {}}
    with pytest.raises(ModelFormatError) as exc:
        toy_model(doc)
    assert "Mystery" in str(exc.value)


def test_duplicate_intent_name_rejected():
    doc = {
        "intents": [
            {"name": "Same", "samples": ["one"]},
            {"name": " Same ", "samples": ["two"]},
        ],
        "slot_types": {},
    }
    with pytest.raises(ModelFormatError):
        toy_model(doc)


def test_empty_model_matches_nothing():
    m = toy_model({"intents": [], "slot_types": {}})
    assert match_utterance(m, "how hot is my food") is None


# --- matching ----------------------------------------------------------


def test_match_current_temp(model):
    m = match_utterance(model, "how hot is my chicken")
    assert m.intent_name == "CurrentTempIntent"
    assert m.slots == {"Food_ct": "chicken"}


def test_match_set_target(model):
    m = match_utterance(model, "set thermometer to 165 degrees")
    assert m.intent_name == "SetTargetTempIntent"
    assert m.slots == {"Temp_stt": 165}


def test_match_number_words(model):
    m = match_utterance(model, "set thermometer to one hundred sixty five degrees")
    assert m.slots == {"Temp_stt": 165}


def test_match_cook_time(model):
    m = match_utterance(model, "when will my beef be done")
    assert m.intent_name == "CookTimeIntent"
    assert m.slots == {"Food_cti": "beef", "Complete_cti": "done"}


def test_match_prefers_longest_phrase(model):
    m = match_utterance(model, "is my pork medium rare")
    assert m.intent_name == "CookTimeIntent"
    assert m.slots == {"Food_cti": "pork", "Complete_cti": "medium rare"}


def test_match_punctuation_and_case(model):
    m = match_utterance(model, "What is the CURRENT temperature of my Food?")
    assert m.intent_name == "CurrentTempIntent"
    assert m.slots == {"place_ct": "current", "Food_ct": "food"}
    # "what's" contracts to "whats", which only the bare temperature template has
    m2 = match_utterance(model, "What's the temperature?")
    assert m2.intent_name == "CurrentTempIntent"
    assert m2.slots == {}


def test_no_match(model):
    assert match_utterance(model, "play some music") is None
    assert match_utterance(model, "") is None
    assert match_utterance(model, "set thermometer to medium degrees") is None


def test_match_is_deterministic(model):
    a = match_utterance(model, "notify me when my food is done")
    b = match_utterance(model, "notify me when my food is done")
    assert a == b
    # the template with more literal tokens wins, binding only the Complete slot
    assert a.slots == {"Complete_stai": "done"}


def test_every_shipped_sample_matches_its_own_intent(model):
    numbers = [120, 135, 165]
    from support import instantiations

    for intent in model.intents:
        for template in intent.samples:
            for tokens, bindings, _ in instantiations(template, model, numbers):
                got = match_utterance(model, " ".join(tokens))
                assert got is not None, tokens
                assert got.intent_name == intent.name, (tokens, got.intent_name)


# --- brute-force oracle agreement --------------------------------------


TOY = {
    "intents": [
        {"name": "Alpha", "samples": ["my {A} is {B}", "my {A} now"]},
        {"name": "Beta", "samples": ["set {N} degrees", "my {A} is {B}"]},
        {"name": "Gamma", "samples": ["my {B} twin steaks"]},
    ],
    "slot_types": {
        "A": ["well", "well done", "steak", "prime steak"],
        "B": ["done", "well done", "twin", "rare"],
        "N": "number",
    },
}


def test_brute_force_oracle_agreement_on_toy_model():
    m = toy_model(TOY)
    numbers = [5, 42, 165]
    utterances = set()
    from support import instantiations

    for intent in m.intents:
        for template in intent.samples:
            for tokens, _, _ in instantiations(template, m, numbers):
                utterances.add(" ".join(tokens))
    # a few off-template probes as well
    utterances |= {"my well done now", "my prime steak is rare", "set five degrees", "nothing here"}
    for text in sorted(utterances):
        expected = brute_force_match(m, text, numbers)
        got = match_utterance(m, text)
        if expected is None:
            assert got is None, text
        else:
            assert got is not None, text
            assert (got.intent_name, got.slots) == expected, text


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_brute_force_oracle_agreement_on_random_models(data):
    words = ["red", "hot", "pan", "lid", "slow", "fast"]
    phrase = st.lists(st.sampled_from(words), min_size=1, max_size=2).map(" ".join)
    vocab = st.lists(phrase, min_size=1, max_size=4, unique=True)
    doc = {
        "intents": [],
        "slot_types": {"P": data.draw(vocab), "Q": data.draw(vocab), "N": "number"},
    }
    names = ["One", "Two", "Three"]
    n_intents = data.draw(st.integers(min_value=1, max_value=3))
    shapes = [
        "check {P} please",
        "check {P} against {Q}",
        "warm to {N} now",
        "warm {Q} to {N} now",
        "just checking",
    ]
    for i in range(n_intents):
        samples = data.draw(st.lists(st.sampled_from(shapes), min_size=1, max_size=3, unique=True))
        doc["intents"].append({"name": names[i], "samples": samples})
    m = toy_model(doc)
    numbers = [7, 80]

    from support import instantiations

    texts = set()
    for intent in m.intents:
        for template in intent.samples:
            for tokens, _, _ in instantiations(template, m, numbers):
                texts.add(" ".join(tokens))
    for text in sorted(texts):
        expected = brute_force_match(m, text, numbers)
        got = match_utterance(m, text)
        assert expected is not None
        assert got is not None, text
        assert (got.intent_name, got.slots) == expected, (text, doc)
