"""Counts, proportions, per-capita densities and coverage flags."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from osmfacilities.tags import ClassKind

UNASSIGNED = "unassigned"
PER = 100_000


class UndefinedStatistic(ValueError):
    pass


@dataclass(frozen=True)
class CountStats:
    group: str
    total: int = 0
    schools: int = 0
    clinics: int = 0
    unresolved: int = 0
    other: int = 0

    def __post_init__(self):
        if self.schools + self.clinics + self.unresolved + self.other != self.total:
            raise ValueError(f"class counts of {self.group!r} do not sum to total")

    def __add__(self, other: CountStats) -> CountStats:
        return CountStats(self.group, self.total + other.total, self.schools + other.schools,
                          self.clinics + other.clinics, self.unresolved + other.unresolved,
                          self.other + other.other)

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.schools, self.clinics, self.unresolved, self.other)


_FIELD = {ClassKind.SCHOOL: 0, ClassKind.CLINIC: 1, ClassKind.UNRESOLVED: 2, ClassKind.OTHER: 3}


def tally(records: Iterable, level: int | None = 0, original: bool = False) -> list[CountStats]:
    """Per-group class counts.

    Groups are the admin areas at *level* (``None`` puts everything in one
    ``"all"`` group). Records outside every area of that level are counted
    under ``"unassigned"``, which sorts last. ``original=True`` counts the
    structured-key classes instead of the final ones.
    """
    counts: dict[str, list[int]] = {}
    for rec in records:
        if level is None:
            group = "all"
        else:
            group = rec.admin_id(level) or UNASSIGNED
        klass = rec.original if original else rec.klass
        row = counts.setdefault(group, [0, 0, 0, 0])
        row[_FIELD[klass.kind]] += 1
    keys = sorted(counts, key=lambda g: (g == UNASSIGNED, g))
    return [CountStats(g, sum(counts[g]), *counts[g]) for g in keys]


def merge(parts: Iterable[Iterable[CountStats]]) -> list[CountStats]:
    """Field-wise sum of partial tallies (e.g. from parallel shards)."""
    acc: dict[str, CountStats] = {}
    for part in parts:
        for cs in part:
            acc[cs.group] = acc[cs.group] + cs if cs.group in acc else cs
    keys = sorted(acc, key=lambda g: (g == UNASSIGNED, g))
    return [acc[g] for g in keys]


def proportions(stats: CountStats) -> tuple[float, float, float, float]:
    """Percent of the group total in schools, clinics, unresolved, other."""
    if stats.total <= 0:
        raise UndefinedStatistic(f"group {stats.group!r} has no data points")
    return tuple(100.0 * c / stats.total for c in stats.counts)


def density_per_100k(count: float, population: float | None, group: str = "") -> float:
    if not population:
        raise UndefinedStatistic(f"group {group!r} has no population")
    return count * PER / population


def median(values: Sequence[float]) -> float:
    xs = sorted(values)
    n = len(xs)
    if n == 0:
        raise UndefinedStatistic("median of an empty sequence")
    mid = n // 2
    return xs[mid] if n % 2 else (xs[mid - 1] + xs[mid]) / 2


def log_density(density: float) -> float | None:
    return math.log(density) if density > 0 else None


def flag_missing(area_stats: Iterable, threshold: int) -> list[tuple]:
    """``(area, flagged)`` pairs; flagged when the area total is at most *threshold*.

    *area_stats* yields ``(area, total)`` pairs where total is an int or a
    :class:`CountStats`.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    out = []
    for area, stats in area_stats:
        total = stats.total if isinstance(stats, CountStats) else int(stats)
        out.append((area, total <= threshold))
    return out


def mean_population_flagged(flags: Iterable[tuple]) -> float:
    pops = [area.population for area, flagged in flags if flagged]
    if not pops:
        raise UndefinedStatistic("no flagged areas")
    if any(p is None for p in pops):
        raise UndefinedStatistic("flagged area without population")
    return sum(pops) / len(pops)
