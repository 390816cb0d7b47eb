"""Doneness knowledge base: USDA-style doneness bands per food category.

The data lives in a JSON knowledge file (see data/doneness.json); nothing in
this module hard-codes temperatures. Bands are half-open intervals
[lower_f, upper_f) so classification at shared endpoints is deterministic;
a missing lower bound means "open below", a missing upper bound "open above".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

CATEGORY_IDS = ("beef_lamb_veal_duck", "pork_veal", "poultry", "fish")


class TableFormatError(ValueError):
    """Raised when a knowledge file cannot be parsed or fails validation."""


class UnknownCategoryError(LookupError):
    def __init__(self, category_id: str):
        super().__init__(f"unknown food category {category_id!r}; expected one of {', '.join(CATEGORY_IDS)}")
        self.category_id = category_id


class UnknownDonenessError(LookupError):
    def __init__(self, category_id: str, name: str, valid_names: list[str]):
        super().__init__(f"no doneness {name!r} for category {category_id!r}; valid names: {valid_names}")
        self.valid_names = valid_names


def _fold_name(name: str) -> str:
    # case-insensitive with internal whitespace collapsed
    return " ".join(name.split()).lower()


@dataclass(frozen=True)
class FoodCategory:
    id: str
    display_name: str
    usda_minimum_f: float
    usda_note: str


@dataclass(frozen=True)
class DonenessEntry:
    category: str
    name: str
    lower_f: float | None
    upper_f: float | None
    description: str

    def contains(self, temp_f: float) -> bool:
        if self.lower_f is not None and temp_f < self.lower_f:
            return False
        if self.upper_f is not None and temp_f >= self.upper_f:
            return False
        return True


@dataclass(frozen=True)
class DonenessTable:
    categories: tuple[FoodCategory, ...]
    entries: tuple[DonenessEntry, ...]

    def category(self, category_id: str) -> FoodCategory:
        for cat in self.categories:
            if cat.id == category_id:
                return cat
        raise UnknownCategoryError(category_id)

    def entries_for(self, category_id: str) -> tuple[DonenessEntry, ...]:
        self.category(category_id)
        return tuple(e for e in self.entries if e.category == category_id)

    def classify(self, category_id: str, temp_f: float) -> DonenessEntry | None:
        """Return the band containing temp_f, or None when below the category's lowest bound."""
        for entry in self.entries_for(category_id):
            if entry.contains(temp_f):
                return entry
        return None

    def target_range(self, category_id: str, doneness_name: str) -> tuple[float | None, float | None]:
        """Bounds of the named doneness; name matching is case- and whitespace-insensitive."""
        wanted = _fold_name(doneness_name)
        candidates = self.entries_for(category_id)
        for entry in candidates:
            if _fold_name(entry.name) == wanted:
                return (entry.lower_f, entry.upper_f)
        raise UnknownDonenessError(category_id, doneness_name, [e.name for e in candidates])

    def usda_minimum(self, category_id: str) -> float:
        return self.category(category_id).usda_minimum_f


def load_table(document: str) -> DonenessTable:
    """Parse and validate a knowledge file; entry order in the file does not matter."""
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as e:
        raise TableFormatError(f"knowledge file is not valid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(raw, dict) or not isinstance(raw.get("categories"), list) or not isinstance(raw.get("entries"), list):
        raise TableFormatError("knowledge file must be an object with 'categories' and 'entries' lists")

    categories = [_parse_category(c, i) for i, c in enumerate(raw["categories"])]
    ids = [c.id for c in categories]
    if sorted(ids) != sorted(CATEGORY_IDS):
        raise TableFormatError(f"categories must be exactly {list(CATEGORY_IDS)}, got {ids}")
    categories.sort(key=lambda c: CATEGORY_IDS.index(c.id))

    entries = [_parse_entry(e, i, set(ids)) for i, e in enumerate(raw["entries"])]
    ordered: list[DonenessEntry] = []
    for cat in categories:
        group = [e for e in entries if e.category == cat.id]
        if not group:
            raise TableFormatError(f"category {cat.id!r} has no doneness entries")
        group.sort(key=lambda e: (e.lower_f is not None, e.lower_f if e.lower_f is not None else 0.0))
        _check_partition(cat.id, group)
        ordered.extend(group)
    return DonenessTable(categories=tuple(categories), entries=tuple(ordered))


def serialize(table: DonenessTable) -> str:
    doc = {
        "categories": [
            {"id": c.id, "display_name": c.display_name, "usda_minimum_f": c.usda_minimum_f, "usda_note": c.usda_note}
            for c in table.categories
        ],
        "entries": [
            {"category": e.category, "name": e.name, "lower_f": e.lower_f, "upper_f": e.upper_f, "description": e.description}
            for e in table.entries
        ],
    }
    return json.dumps(doc, indent=2)


def load_default_table() -> DonenessTable:
    """Load the knowledge file shipped with the package."""
    text = resources.files("cookstack.data").joinpath("doneness.json").read_text(encoding="utf-8")
    return load_table(text)


def _parse_category(raw: object, index: int) -> FoodCategory:
    if not isinstance(raw, dict):
        raise TableFormatError(f"categories[{index}] must be an object")
    try:
        cat_id = raw["id"]
        display = raw["display_name"]
        minimum = raw["usda_minimum_f"]
        note = raw.get("usda_note", "")
    except KeyError as e:
        raise TableFormatError(f"categories[{index}] is missing field {e.args[0]!r}") from e
    if cat_id not in CATEGORY_IDS:
        raise TableFormatError(f"categories[{index}] has unknown id {cat_id!r}")
    if not isinstance(minimum, (int, float)) or isinstance(minimum, bool):
        raise TableFormatError(f"categories[{index}] usda_minimum_f must be a number")
    if not isinstance(display, str) or not isinstance(note, str):
        raise TableFormatError(f"categories[{index}] display_name and usda_note must be strings")
    return FoodCategory(id=cat_id, display_name=display, usda_minimum_f=float(minimum), usda_note=note)


def _parse_entry(raw: object, index: int, category_ids: set[str]) -> DonenessEntry:
    if not isinstance(raw, dict):
        raise TableFormatError(f"entries[{index}] must be an object")
    try:
        category = raw["category"]
        name = raw["name"]
        lower = raw["lower_f"]
        upper = raw["upper_f"]
        description = raw["description"]
    except KeyError as e:
        raise TableFormatError(f"entries[{index}] is missing field {e.args[0]!r}") from e
    if category not in category_ids:
        raise TableFormatError(f"entries[{index}] references unknown category {category!r}")
    if not isinstance(name, str) or not name.strip():
        raise TableFormatError(f"entries[{index}] name must be a non-empty string")
    for label, bound in (("lower_f", lower), ("upper_f", upper)):
        if bound is not None and (not isinstance(bound, (int, float)) or isinstance(bound, bool)):
            raise TableFormatError(f"entries[{index}] {label} must be a number or null")
    if lower is not None and upper is not None and not lower < upper:
        raise TableFormatError(f"entries[{index}] ({name!r}) requires lower_f < upper_f, got {lower} and {upper}")
    if not isinstance(description, str):
        raise TableFormatError(f"entries[{index}] description must be a string")
    return DonenessEntry(
        category=category,
        name=name,
        lower_f=None if lower is None else float(lower),
        upper_f=None if upper is None else float(upper),
        description=description,
    )


def _check_partition(category_id: str, group: list[DonenessEntry]) -> None:
    """Entries of one category, sorted by lower bound, must tile without gap or overlap."""
    names = {}
    for entry in group:
        folded = _fold_name(entry.name)
        if folded in names:
            raise TableFormatError(f"category {category_id!r} has duplicate doneness name {entry.name!r}")
        names[folded] = entry
    for prev, nxt in zip(group, group[1:]):
        if nxt.lower_f is None:
            raise TableFormatError(
                f"category {category_id!r}: entries {prev.name!r} and {nxt.name!r} overlap (two open-below bands)"
            )
        if prev.upper_f is None:
            raise TableFormatError(
                f"category {category_id!r}: entries {prev.name!r} and {nxt.name!r} overlap "
                f"({prev.name!r} is open above but is not the last band)"
            )
        if prev.upper_f > nxt.lower_f:
            raise TableFormatError(
                f"category {category_id!r}: entries {prev.name!r} and {nxt.name!r} overlap "
                f"on [{nxt.lower_f}, {prev.upper_f})"
            )
        if prev.upper_f < nxt.lower_f:
            raise TableFormatError(
                f"category {category_id!r}: gap between entries {prev.name!r} and {nxt.name!r} "
                f"on [{prev.upper_f}, {nxt.lower_f})"
            )
