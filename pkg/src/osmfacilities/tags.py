"""Structured-key resolution and the free-text tag string format.

Raw OSM tag maps are folded into four top-level classes: schools,
clinics, other mapped structures, and "unresolved" elements that carry
no recognized key. Recognized keys are scanned in schema priority order;
a mapped value beats the key's generic fallback.

Tags not consumed by the winning key are serialized to a brace-delimited
string, e.g. ``{`name` : `Niger hospital`}``, which is what the text
classifier reads.
"""

from __future__ import annotations

import csv
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from osmfacilities.errors import ConfigError, TagParseError

log = logging.getLogger(__name__)


class ClassKind(str, enum.Enum):
    SCHOOL = "school"
    CLINIC = "clinic"
    OTHER = "other"
    UNRESOLVED = "unresolved"


class SchoolCategory(str, enum.Enum):
    HIGHER_EDUCATION = "higher_education"
    PRIMARY_SECONDARY = "primary_secondary"
    MUSIC = "music"
    LANGUAGE = "language"
    OTHER_SCHOOL = "other_school"


class ClinicCategory(str, enum.Enum):
    HOSPITAL = "hospital"
    CLINIC_GENERAL = "clinic_general"
    DOCTORS = "doctors"
    FIRST_AID = "first_aid"
    OTHER_HEALTH = "other_health"


@dataclass(frozen=True)
class BuildingClass:
    kind: ClassKind
    category: SchoolCategory | ClinicCategory | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind is ClassKind.SCHOOL and not isinstance(self.category, SchoolCategory):
            raise ValueError(f"school needs a SchoolCategory, got {self.category!r}")
        if self.kind is ClassKind.CLINIC and not isinstance(self.category, ClinicCategory):
            raise ValueError(f"clinic needs a ClinicCategory, got {self.category!r}")
        if self.kind in (ClassKind.OTHER, ClassKind.UNRESOLVED) and self.category is not None:
            raise ValueError(f"{self.kind.value} takes no category")

    @classmethod
    def school(cls, category: SchoolCategory) -> BuildingClass:
        return cls(ClassKind.SCHOOL, SchoolCategory(category))

    @classmethod
    def clinic(cls, category: ClinicCategory) -> BuildingClass:
        return cls(ClassKind.CLINIC, ClinicCategory(category))

    @classmethod
    def other(cls, label: str) -> BuildingClass:
        return cls(ClassKind.OTHER, label=label)

    @classmethod
    def from_names(cls, kind: str, category: str = "", label: str | None = None
                   ) -> BuildingClass:
        kind = ClassKind(kind.strip().lower())
        category = category.strip().lower()
        if kind is ClassKind.SCHOOL:
            return cls.school(SchoolCategory(category))
        if kind is ClassKind.CLINIC:
            return cls.clinic(ClinicCategory(category))
        if kind is ClassKind.OTHER:
            return cls.other(label or category)
        return UNRESOLVED

    @property
    def is_facility(self) -> bool:
        return self.kind in (ClassKind.SCHOOL, ClassKind.CLINIC)

    def __str__(self) -> str:
        if self.category is not None:
            return f"{self.kind.value}({self.category.value})"
        if self.label:
            return f"{self.kind.value}({self.label})"
        return self.kind.value


UNRESOLVED = BuildingClass(ClassKind.UNRESOLVED)


@dataclass(frozen=True)
class KeySchema:
    """Recognized keys with priority ranks plus value and fallback maps.

    A ``(key, value)`` mapped to :data:`UNRESOLVED` marks an uninformative
    value (``building=yes``): the key is skipped and scanning continues.
    Keys without a fallback entry resolve to ``Other("key=value")``.
    """

    recognized_keys: tuple[tuple[str, int], ...]
    value_map: dict[tuple[str, str], BuildingClass] = field(default_factory=dict)
    key_fallback_map: dict[str, BuildingClass] = field(default_factory=dict)

    def __post_init__(self):
        ranks = [rank for _, rank in self.recognized_keys]
        if len(set(ranks)) != len(ranks):
            raise ConfigError("key schema priority ranks must be unique")
        keys = {k for k, _ in self.recognized_keys}
        stray = {k for k, _ in self.value_map} | set(self.key_fallback_map)
        if stray - keys:
            raise ConfigError(f"schema maps unrecognized keys: {sorted(stray - keys)}")
        ordered = tuple(sorted(self.recognized_keys, key=lambda kr: kr[1]))
        object.__setattr__(self, "recognized_keys", ordered)

    @property
    def keys_in_order(self) -> list[str]:
        return [k for k, _ in self.recognized_keys]


def load_key_schema(path: str | Path | None = None) -> KeySchema:
    """Read a schema TSV (columns key, value, class, category, priority).

    ``value`` ``*`` declares the key's fallback. With no *path*, the
    bundled schema is used.
    """
    if path is None:
        text = resources.files("osmfacilities.data").joinpath("key_schema.tsv").read_text(
            encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    priorities: dict[str, int] = {}
    value_map, fallback = {}, {}
    rows = csv.DictReader((ln for ln in text.splitlines() if not ln.startswith("#")),
                          delimiter="\t")
    missing = {"key", "value", "class", "category", "priority"} - set(rows.fieldnames or ())
    if missing:
        raise ConfigError(f"key schema lacks columns {sorted(missing)}")
    for lineno, row in enumerate(rows, start=2):
        key, value = row["key"].strip(), row["value"].strip()
        try:
            rank = int(row["priority"])
            klass = BuildingClass.from_names(row["class"], row["category"] or "",
                                             label=None if value == "*" else f"{key}={value}")
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"key schema line {lineno}: {exc}") from None
        if priorities.setdefault(key, rank) != rank:
            raise ConfigError(f"key schema line {lineno}: conflicting priority for {key!r}")
        if value == "*":
            fallback[key] = klass
        else:
            value_map[(key, value)] = klass
    return KeySchema(tuple(priorities.items()), value_map, fallback)


def _resolve(tags: dict[str, str], schema: KeySchema) -> tuple[BuildingClass, str | None]:
    for key in schema.keys_in_order:
        if key not in tags:
            continue
        value = tags[key]
        klass = schema.value_map.get((key, value))
        if klass is None:
            klass = schema.key_fallback_map.get(key)
            if klass is not None and klass.kind is ClassKind.OTHER:
                klass = BuildingClass.other(f"{key}={value}")
        if klass is None:
            klass = BuildingClass.other(f"{key}={value}")
        if klass.kind is ClassKind.UNRESOLVED:
            continue
        return klass, key
    return UNRESOLVED, None


def resolve_structured(tags: dict[str, str], schema: KeySchema) -> BuildingClass:
    return _resolve(tags, schema)[0]


# -- free-text tag strings ---------------------------------------------------

_QUOTES = "`\"'"


def _quote(s: str) -> str:
    return "`" + s.replace("`", "``") + "`"


def serialize_unstructured(tags: dict[str, str]) -> str:
    return "{" + ", ".join(f"{_quote(k)} : {_quote(v)}" for k, v in tags.items()) + "}"


def parse_tag_string(text: str, counters: Counter | None = None) -> dict[str, str]:
    """Parse a brace-delimited tag string; inverse of :func:`serialize_unstructured`.

    Accepts backtick, double or single quotes (doubling escapes the quote)
    and any whitespace around delimiters. Duplicate keys: last one wins.
    """
    n = len(text)
    pos = 0

    def skip_ws(p):
        while p < n and text[p].isspace():
            p += 1
        return p

    def quoted(p):
        if p >= n or text[p] not in _QUOTES:
            raise TagParseError("expected quoted string", p)
        q = text[p]
        start = p
        p += 1
        out = []
        while True:
            j = text.find(q, p)
            if j < 0:
                raise TagParseError("unterminated quoted segment", start)
            out.append(text[p:j])
            if j + 1 < n and text[j + 1] == q:
                out.append(q)
                p = j + 2
                continue
            return "".join(out), j + 1

    pos = skip_ws(pos)
    if pos >= n or text[pos] != "{":
        raise TagParseError("expected '{'", pos)
    pos = skip_ws(pos + 1)
    result: dict[str, str] = {}
    if pos < n and text[pos] == "}":
        pos += 1
    else:
        while True:
            k, pos = quoted(pos)
            pos = skip_ws(pos)
            if pos >= n or text[pos] != ":":
                raise TagParseError("expected ':'", pos)
            pos = skip_ws(pos + 1)
            v, pos = quoted(pos)
            if k in result and counters is not None:
                counters["duplicate_tag_key"] += 1
            result[k] = v
            pos = skip_ws(pos)
            if pos >= n:
                raise TagParseError("unbalanced braces: missing '}'", pos)
            if text[pos] == "}":
                pos += 1
                break
            if text[pos] != ",":
                raise TagParseError("expected ',' or '}'", pos)
            pos = skip_ws(pos + 1)
    if skip_ws(pos) != n:
        raise TagParseError("trailing characters after '}'", pos)
    return result


def split_resolved_unresolved(element, schema: KeySchema) -> tuple[BuildingClass, str]:
    """Structured class plus the serialized tags the winning key did not consume."""
    klass, key = _resolve(element.tags, schema)
    leftover = {k: v for k, v in element.tags.items() if k != key}
    return klass, serialize_unstructured(leftover)
