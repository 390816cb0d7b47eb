import json
import random

import pytest

from cookstack import doneness
from cookstack.doneness import (
    TableFormatError,
    UnknownCategoryError,
    UnknownDonenessError,
    load_default_table,
    load_table,
    serialize,
)


@pytest.fixture(scope="module")
def table():
    return load_default_table()


def canonical_doc() -> dict:
    return json.loads(serialize(load_default_table()))


def test_shipped_table_shape(table):
    assert len(table.entries) == 16
    assert len(table.categories) == 4
    assert [c.id for c in table.categories] == list(doneness.CATEGORY_IDS)


@pytest.mark.parametrize(
    "category,temp,expected",
    [
        ("beef_lamb_veal_duck", 132.0, "Medium rare"),
        ("beef_lamb_veal_duck", 112.0, "Extra rare"),
        ("poultry", 165.0, "Safe and moist"),
        ("poultry", 200.0, "Safe and moist"),
        ("fish", 145.0, "Well done"),
        ("fish", 126.0, "Rare"),
        ("pork_veal", 100.0, "Raw"),
        ("pork_veal", 160.0, "Well done"),
    ],
)
def test_classify(table, category, temp, expected):
    entry = table.classify(category, temp)
    assert entry is not None and entry.name == expected


@pytest.mark.parametrize(
    "category,temp",
    [("beef_lamb_veal_duck", 100.0), ("poultry", 164.9), ("fish", 124.9)],
)
def test_classify_below_range(table, category, temp):
    assert table.classify(category, temp) is None


def test_classify_boundaries_are_half_open(table):
    # the shared endpoint belongs to the upper band
    assert table.classify("beef_lamb_veal_duck", 130.0).name == "Medium rare"
    assert table.classify("beef_lamb_veal_duck", 135.0).name == "Medium"
    assert table.classify("beef_lamb_veal_duck", 155.0).name == "Well done"
    assert table.classify("pork_veal", 120.0).name == "Rare"
    assert table.classify("fish", 135.0).name == "Medium"


def test_classify_unknown_category(table):
    with pytest.raises(UnknownCategoryError):
        table.classify("venison", 140.0)


def test_target_range(table):
    assert table.target_range("pork_veal", "medium") == (135.0, 145.0)
    assert table.target_range("fish", "Well done") == (145.0, None)
    assert table.target_range("pork_veal", "Raw") == (None, 120.0)
    # case-insensitive with collapsed whitespace
    assert table.target_range("beef_lamb_veal_duck", "  MEDIUM   Rare ") == (130.0, 135.0)


def test_target_range_unknown_name_lists_valid(table):
    with pytest.raises(UnknownDonenessError) as exc:
        table.target_range("poultry", "rare")
    assert exc.value.valid_names == ["Safe and moist"]


def test_usda_minimum(table):
    assert table.usda_minimum("poultry") == 165.0
    assert table.usda_minimum("fish") == 145.0
    assert table.usda_minimum("beef_lamb_veal_duck") == 145.0
    assert table.usda_minimum("pork_veal") == 145.0


def test_classify_at_usda_minimum_never_below_range(table):
    for cat in table.categories:
        assert table.classify(cat.id, cat.usda_minimum_f) is not None


def test_partition_unique_and_total(table):
    # exactly one band contains any temperature at or above the lowest bound
    for cat in table.categories:
        entries = table.entries_for(cat.id)
        lows = [e.lower_f for e in entries if e.lower_f is not None]
        start = min(lows) if len(lows) == len(entries) else min(lows) - 50.0
        temp = start
        while temp < 400.0:
            hits = [e for e in entries if e.contains(temp)]
            assert len(hits) == 1, (cat.id, temp, hits)
            temp += 0.5


def test_midpoint_classifies_to_own_entry(table):
    for entry in table.entries:
        if entry.lower_f is not None and entry.upper_f is not None:
            mid = (entry.lower_f + entry.upper_f) / 2
            assert table.classify(entry.category, mid) == entry


def test_round_trip(table):
    assert load_table(serialize(table)) == table


def test_shuffled_entries_load_identically(table):
    doc = canonical_doc()
    rng = random.Random(7)
    rng.shuffle(doc["entries"])
    rng.shuffle(doc["categories"])
    assert load_table(json.dumps(doc)) == table


def test_overlap_is_rejected_naming_both_entries():
    doc = canonical_doc()
    for entry in doc["entries"]:
        if entry["category"] == "beef_lamb_veal_duck" and entry["name"] == "Medium rare":
            entry["lower_f"] = 129
    with pytest.raises(TableFormatError) as exc:
        load_table(json.dumps(doc))
    assert "Rare" in str(exc.value) and "Medium rare" in str(exc.value)


def test_gap_is_rejected():
    doc = canonical_doc()
    for entry in doc["entries"]:
        if entry["category"] == "fish" and entry["name"] == "Medium":
            entry["lower_f"] = 136
    with pytest.raises(TableFormatError):
        load_table(json.dumps(doc))


def test_malformed_json_names_line():
    with pytest.raises(TableFormatError) as exc:
        load_table('{\n  "categories": [,]\n}')
    assert "line 2" in str(exc.value)


def test_missing_category_rejected():
    doc = canonical_doc()
    doc["categories"] = doc["categories"][:3]
    doc["entries"] = [e for e in doc["entries"] if e["category"] != "fish"]
    with pytest.raises(TableFormatError):
        load_table(json.dumps(doc))


def test_inverted_bounds_rejected():
    doc = canonical_doc()
    doc["entries"][0]["lower_f"], doc["entries"][0]["upper_f"] = 120, 110
    with pytest.raises(TableFormatError):
        load_table(json.dumps(doc))
