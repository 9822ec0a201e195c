"""OSM element data model and the structural filter."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from itertools import accumulate

from osmfacilities.errors import InvariantViolation

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class ElementKind(str, enum.Enum):
    NODE = "node"
    WAY = "way"
    RELATION = "relation"


@dataclass(frozen=True)
class Member:
    kind: ElementKind
    ref: int
    role: str = ""


@dataclass(frozen=True, eq=True)
class RawElement:
    """A decoded node, way or relation.

    ``lat``/``lon`` are set only for nodes, ``refs`` only for ways and
    ``members`` only for relations. ``tags`` keeps file order.
    """

    id: int
    kind: ElementKind
    tags: dict[str, str] = field(default_factory=dict)
    lat: float | None = None
    lon: float | None = None
    refs: tuple[int, ...] = ()
    members: tuple[Member, ...] = ()

    __hash__ = None  # tags is a dict

    def __post_init__(self):
        if self.kind is ElementKind.NODE:
            if self.lat is None or self.lon is None:
                raise InvariantViolation(f"node {self.id} has no coordinates")
            if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
                raise InvariantViolation(
                    f"node {self.id} coordinates out of range: ({self.lat}, {self.lon})")
            if self.refs:
                raise InvariantViolation(f"node {self.id} carries way refs")
        else:
            if self.lat is not None or self.lon is not None:
                raise InvariantViolation(f"{self.kind.value} {self.id} carries coordinates")
            if self.kind is ElementKind.WAY and not self.refs:
                raise InvariantViolation(f"way {self.id} has no refs")

    @property
    def point(self) -> tuple[float, float] | None:
        if self.kind is ElementKind.NODE:
            return (self.lat, self.lon)
        return None


def delta_decode(deltas: Iterable[int]) -> list[int]:
    """Running sum of *deltas*; raises ``OverflowError`` outside int64."""
    out = list(accumulate(deltas))
    if out and (max(out) > INT64_MAX or min(out) < INT64_MIN):
        raise OverflowError("delta-decoded value leaves the signed 64-bit range")
    return out


def delta_encode(values: Sequence[int]) -> list[int]:
    return [v - p for p, v in zip([0, *values[:-1]], values)]


def to_degrees(raw: int, granularity: int = 100, offset: int = 0) -> float:
    # dividing by 1e9 rounds once, so 13.52 stays 13.52 rather than 13.520000000000001
    return (offset + granularity * raw) / 1e9


def is_closed_way(way: RawElement) -> bool:
    # a ring needs three distinct vertices plus the closing repeat
    refs = way.refs
    return len(refs) >= 4 and refs[0] == refs[-1]


def filter_structures(elements: Iterable[RawElement]) -> list[RawElement]:
    """Keep tagged nodes and closed ways; drop everything else."""
    kept = []
    for el in elements:
        if el.kind is ElementKind.NODE:
            if el.tags:
                kept.append(el)
        elif el.kind is ElementKind.WAY and is_closed_way(el):
            kept.append(el)
    return kept
