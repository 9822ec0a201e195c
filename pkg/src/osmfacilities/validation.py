"""Country-level comparison of OSM clinic counts with a WHO facility list."""

from __future__ import annotations

import csv
import enum
import logging
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TextIO

from osmfacilities.errors import ConfigError
from osmfacilities.gazetteer import _read_tsv, fold

log = logging.getLogger(__name__)

DEFAULT_COLUMNS = {
    "country": "Country",
    "name": "Facility name",
    "facility_type": "Facility type",
    "lat": "Lat",
    "lon": "Long",
}

COMPARABILITY_CAVEAT = ("WHO list covers public facilities only; private and specialized "
                        "facilities are excluded, OSM counts include them.")


@dataclass(frozen=True)
class WhoFacility:
    country: str
    name: str = ""
    facility_type: str = ""
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if not self.country:
            raise ValueError("facility without country")


class Status(str, enum.Enum):
    AT_OR_OVER = "at_or_over"
    UNDER = "under"


@dataclass(frozen=True)
class ComparisonRow:
    country: str
    osm_clinics: int
    who_clinics: int
    osm_clinics_original: int | None = None

    @property
    def ratio(self) -> float | None:
        return self.osm_clinics / self.who_clinics if self.who_clinics > 0 else None

    @property
    def status(self) -> Status:
        return Status.AT_OR_OVER if self.osm_clinics >= self.who_clinics else Status.UNDER


@dataclass
class Comparison:
    rows: list[ComparisonRow]
    unmatched: dict[str, list[str]] = field(default_factory=dict)
    caveat: str = COMPARABILITY_CAVEAT


def _coord(text: str, lo: float, hi: float) -> float | None:
    try:
        v = float(text)
    except (TypeError, ValueError):
        return None
    return v if lo <= v <= hi else None


def parse_who_csv(stream: TextIO, columns: Mapping[str, str] | None = None,
                  counters: Counter | None = None) -> list[WhoFacility]:
    """Parse a WHO facility CSV with a configurable column mapping.

    Rows with unusable coordinates are kept without them; rows with an
    empty country are skipped. Both are counted in *counters*.
    """
    cols = {**DEFAULT_COLUMNS, **(columns or {})}
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    if cols["country"] not in header:
        raise ConfigError(f"WHO CSV has no country column {cols['country']!r}")
    out = []
    for row in reader:
        country = (row.get(cols["country"]) or "").strip()
        if not country:
            if counters is not None:
                counters["who_row_without_country"] += 1
            continue
        lat = _coord(row.get(cols["lat"]), -90, 90)
        lon = _coord(row.get(cols["lon"]), -180, 180)
        if lat is None or lon is None:
            if (row.get(cols["lat"]) or row.get(cols["lon"])) and counters is not None:
                counters["who_bad_coordinates"] += 1
            lat = lon = None
        out.append(WhoFacility(country, (row.get(cols["name"]) or "").strip(),
                               (row.get(cols["facility_type"]) or "").strip(), lat, lon))
    return out


class CountryAliases:
    def __init__(self, pairs: Iterable[tuple[str, str]]):
        self._map = {fold(alias): country for alias, country in pairs}

    def canonical(self, name: str) -> str | None:
        return self._map.get(fold(name))


def load_country_aliases(path=None) -> CountryAliases:
    rows = _read_tsv(path, "country_aliases.tsv", {"alias", "country"})
    return CountryAliases((r["alias"], r["country"]) for r in rows)


def compare_counts(osm: Mapping[str, int], who: Iterable[WhoFacility],
                   aliases: CountryAliases | None = None,
                   osm_original: Mapping[str, int] | None = None,
                   include_types: Iterable[str] | None = None) -> Comparison:
    """One row per harmonized country present in either source.

    *osm* maps country name to post-enrichment clinic counts, *osm_original*
    (optional) to structured-key-only counts. Names missing from the alias
    table are reported in ``unmatched`` and left out of the rows.
    """
    aliases = aliases or load_country_aliases()
    types = {fold(t) for t in include_types} if include_types else None
    unmatched: dict[str, list[str]] = {"osm": [], "who": []}

    osm_counts: Counter = Counter()
    orig_counts: Counter = Counter()
    for name, n in osm.items():
        c = aliases.canonical(name)
        if c is None:
            unmatched["osm"].append(name)
            continue
        osm_counts[c] += n
        if osm_original is not None:
            orig_counts[c] += osm_original.get(name, 0)

    who_counts: Counter = Counter()
    for fac in who:
        if types is not None and fold(fac.facility_type) not in types:
            continue
        c = aliases.canonical(fac.country)
        if c is None:
            if fac.country not in unmatched["who"]:
                unmatched["who"].append(fac.country)
            continue
        who_counts[c] += 1

    for side, names in unmatched.items():
        if names:
            log.warning("unmatched %s countries: %s", side, ", ".join(names))
    rows = [ComparisonRow(c, osm_counts[c], who_counts[c],
                          orig_counts[c] if osm_original is not None else None)
            for c in sorted(set(osm_counts) | set(who_counts))]
    return Comparison(rows, {k: sorted(v) for k, v in unmatched.items() if v})
