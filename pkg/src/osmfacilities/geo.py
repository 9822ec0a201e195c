"""Planar geometry and administrative-area joins.

Coordinates are ``(lat, lon)`` pairs throughout; geometry treats ``lon``
as x and ``lat`` as y with no geodesic correction, which is adequate for
areas a few degrees across.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from osmfacilities.errors import ConfigError

log = logging.getLogger(__name__)

Point = tuple[float, float]
DEGENERATE_AREA = 1e-14


def centroid(ring: Sequence[Point]) -> Point:
    """Area centroid of a closed ring of ``(lat, lon)`` vertices.

    Rings with (near) zero area fall back to the mean of their distinct
    vertices.
    """
    if len(ring) < 4 or tuple(ring[0]) != tuple(ring[-1]):
        raise ValueError("centroid needs a closed ring of at least 4 vertices")
    y0, x0 = ring[0]
    area2 = cx = cy = 0.0
    for (ya, xa), (yb, xb) in zip(ring, ring[1:]):
        xa, ya, xb, yb = xa - x0, ya - y0, xb - x0, yb - y0
        cross = xa * yb - xb * ya
        area2 += cross
        cx += (xa + xb) * cross
        cy += (ya + yb) * cross
    if abs(area2 / 2) < DEGENERATE_AREA:
        distinct = list(dict.fromkeys(tuple(p) for p in ring))
        return (sum(p[0] for p in distinct) / len(distinct),
                sum(p[1] for p in distinct) / len(distinct))
    return (y0 + cy / (3 * area2), x0 + cx / (3 * area2))


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if (bx - ax) * (py - ay) - (by - ay) * (px - ax) != 0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def point_in_polygon(point: Point, rings: Iterable[Sequence[Point]]) -> bool:
    """Even-odd ray casting over all rings; edge and vertex points are inside."""
    py, px = point
    inside = False
    for ring in rings:
        for (ay, ax), (by, bx) in zip(ring, ring[1:]):
            if _on_segment(px, py, ax, ay, bx, by):
                return True
            if (ay > py) != (by > py):
                x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
                if px < x_cross:
                    inside = not inside
    return inside


@dataclass(frozen=True)
class AdminArea:
    id: str
    level: int
    name: str
    rings: tuple[tuple[Point, ...], ...]
    population: int | None = None

    def __post_init__(self):
        if not 0 <= self.level <= 3:
            raise ConfigError(f"area {self.id}: level {self.level} outside 0..3")
        if not self.rings:
            raise ConfigError(f"area {self.id}: no rings")
        for ring in self.rings:
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise ConfigError(f"area {self.id}: ring not closed or shorter than 4 vertices")
        if self.population is not None and self.population < 0:
            raise ConfigError(f"area {self.id}: negative population")

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        lats = [p[0] for r in self.rings for p in r]
        lons = [p[1] for r in self.rings for p in r]
        return min(lats), min(lons), max(lats), max(lons)

    @property
    def bbox_area(self) -> float:
        s, w, n, e = self.bbox
        return (n - s) * (e - w)

    def contains(self, point: Point) -> bool:
        s, w, n, e = self.bbox
        lat, lon = point
        if not (s <= lat <= n and w <= lon <= e):
            return False
        return point_in_polygon(point, self.rings)


class AdminIndex:
    """Uniform grid over area bounding boxes, so a lookup only tests nearby areas."""

    def __init__(self, areas: Iterable[AdminArea], cell: float = 0.25):
        if cell <= 0:
            raise ValueError("cell size must be positive")
        self.areas = list(areas)
        self.cell = cell
        self._grid: dict[tuple[int, int], list[AdminArea]] = {}
        for area in self.areas:
            s, w, n, e = area.bbox
            for i in range(self._key(s), self._key(n) + 1):
                for j in range(self._key(w), self._key(e) + 1):
                    self._grid.setdefault((i, j), []).append(area)

    def _key(self, v: float) -> int:
        return math.floor(v / self.cell)

    def candidates(self, point: Point) -> list[AdminArea]:
        return self._grid.get((self._key(point[0]), self._key(point[1])), [])

    def __iter__(self):
        return iter(self.areas)

    def __len__(self):
        return len(self.areas)


def assign_admin(point: Point | None, areas: Sequence[AdminArea] | AdminIndex,
                 counters: Counter | None = None) -> dict[int, AdminArea]:
    """Containing area per admin level for *point* (levels with no hit are absent).

    Overlaps within a level go to the area with the smallest bounding box.
    """
    if point is None:
        return {}
    if hasattr(point, "location"):
        point = point.location
        if point is None:
            return {}
    if isinstance(areas, AdminIndex):
        areas = areas.candidates(point)
    by_level: dict[int, list[AdminArea]] = {}
    for area in areas:
        if area.contains(point):
            by_level.setdefault(area.level, []).append(area)
    out = {}
    for level, hits in by_level.items():
        if len(hits) > 1:
            log.debug("point %s in %d level-%d areas", point, len(hits), level)
            if counters is not None:
                counters["overlapping_admin_areas"] += 1
            hits.sort(key=lambda a: (a.bbox_area, a.id))
        out[level] = hits[0]
    return out


# -- loading -----------------------------------------------------------------

def _ring(coords, area_id) -> tuple[Point, ...]:
    try:
        return tuple((float(lat), float(lon)) for lon, lat, *_ in coords)
    except (TypeError, ValueError):
        raise ConfigError(f"area {area_id}: malformed ring coordinates") from None


def load_admin_geojson(path: str | Path, population_csv: str | Path | None = None
                       ) -> list[AdminArea]:
    """Read admin areas from a GeoJSON FeatureCollection of (Multi)Polygons.

    Feature properties: ``id``, ``level``, ``name`` and optional
    ``population``. A population CSV (``area_id``, ``population``)
    overrides the property.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    overrides = load_population_csv(population_csv) if population_csv else {}
    areas = []
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        geom = feature.get("geometry") or {}
        area_id = str(props.get("id", i))
        if "level" not in props:
            raise ConfigError(f"area {area_id}: missing 'level' property")
        if geom.get("type") == "Polygon":
            polygons = [geom["coordinates"]]
        elif geom.get("type") == "MultiPolygon":
            polygons = geom["coordinates"]
        else:
            raise ConfigError(f"area {area_id}: unsupported geometry {geom.get('type')!r}")
        rings = tuple(_ring(r, area_id) for poly in polygons for r in poly)
        population = overrides.get(area_id, props.get("population"))
        try:
            areas.append(AdminArea(area_id, int(props["level"]), str(props.get("name", area_id)),
                                   rings, None if population is None else int(population)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"area {area_id}: {exc}") from None
    return areas


def load_population_csv(path: str | Path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"area_id", "population"} <= set(reader.fieldnames or ()):
            raise ConfigError(f"{path}: needs columns area_id, population")
        out = {}
        for row in reader:
            try:
                out[row["area_id"]] = int(float(row["population"]))
            except ValueError:
                raise ConfigError(f"{path}: bad population {row['population']!r}") from None
    return out


def area_to_feature(area: AdminArea) -> dict:
    return {
        "type": "Feature",
        "properties": {"id": area.id, "level": area.level, "name": area.name,
                       "population": area.population},
        "geometry": {"type": "Polygon",
                     "coordinates": [[[lon, lat] for lat, lon in r] for r in area.rings]},
    }
