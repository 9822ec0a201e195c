"""Deterministic synthetic inputs: a PBF extract, admin boundaries and a WHO list.

The layout is fictional: ten 1-degree square "countries" on a 5x2 grid,
each split into a 4x4 grid of level-3 areas, with gaps between countries
where points fall outside every area. Some cells are left empty or nearly
empty so the missing-coverage flags have something to find.
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

from osmfacilities.geo import AdminArea, area_to_feature
from osmfacilities.pbf.elements import ElementKind, Member, RawElement
from osmfacilities.pbf.encode import encode_pbf
from osmfacilities.reference_tables import COUNTRIES

DEFAULT_BUILDINGS = 60_000

ISO = {"Benin": "BEN", "Burkina Faso": "BFA", "Cote d'Ivoire": "CIV", "Guinea": "GIN",
       "Mali": "MLI", "Mauritania": "MRT", "Niger": "NER", "Senegal": "SEN", "Chad": "TCD",
       "Togo": "TGO"}

TOWNS = ["Koungheul", "Bobo", "Kaya", "Sikasso", "Agadez", "Zinder", "Kindia", "Labé", "Atar",
         "Kaédi", "Parakou", "Abomey", "Bouaké", "Korhogo", "Sokodé", "Kara", "Abéché", "Moundou",
         "Ségou", "Mopti", "Thiès", "Ziguinchor", "Dosso", "Tahoua"]

_TEXT_FACILITIES = [
    ("name", "École primaire de {t}"), ("name", "Lycée {t}"), ("name", "{t} hospital"),
    ("name", "Centre de santé de {t}"), ("name", "CSPS {t}"), ("name", "Hôpital régional de {t}"),
    ("name", "Collège d'enseignement général de {t}"), ("name", "Dispensaire {t}"),
    ("description", "language school"), ("name", "Clinique {t}"), ("name", "Institut {t}"),
    ("name", "Maternité {t}"), ("name", "Université de {t}"), ("name", "école de musique {t}"),
]
_TEXT_NOISE = [
    ("name", "Mme {t}"), ("name", "Marché de {t}"), ("source", "Bing"), ("note", "ruins"),
    ("name", "Mosquée {t}"), ("addr:city", "{t}"), ("name", "El Hadj Diallo"),
]
_STRUCTURED = [
    ({"amenity": "school"}, 30), ({"amenity": "university"}, 3), ({"amenity": "kindergarten"}, 3),
    ({"amenity": "language_school"}, 1), ({"amenity": "music_school"}, 1),
    ({"amenity": "clinic"}, 6), ({"healthcare": "hospital", "building": "yes"}, 3),
    ({"amenity": "doctors"}, 2), ({"amenity": "pharmacy"}, 4),
    ({"building": "house"}, 300), ({"shop": "yes"}, 60), ({"landuse": "residential"}, 20),
    ({"office": "government"}, 10), ({"amenity": "place_of_worship"}, 40),
]


def country_layout() -> list[AdminArea]:
    areas = []
    rng = random.Random(1234)
    for i, name in enumerate(COUNTRIES):
        south = 8.0 + (i // 5) * 1.25
        west = -12.0 + (i % 5) * 1.25
        iso = ISO[name]
        cells = []
        for r in range(4):
            for c in range(4):
                s, w = south + r * 0.25, west + c * 0.25
                ring = ((s, w), (s, w + 0.25), (s + 0.25, w + 0.25), (s + 0.25, w), (s, w))
                cells.append(AdminArea(f"{iso}-{r}{c}", 3, f"{name} {r}{c}", (ring,),
                                       rng.randrange(4_000, 90_000)))
        ring = ((south, west), (south, west + 1), (south + 1, west + 1), (south + 1, west),
                (south, west))
        areas.append(AdminArea(iso, 0, name, (ring,), sum(a.population for a in cells)))
        areas.extend(cells)
    return areas


def worked_example_elements() -> list[RawElement]:
    """Two nodes carrying the canonical keyword and topic-model examples."""
    return [
        RawElement(1, ElementKind.NODE, {"type": "boundary", "place": "language school"},
                   13.5, 2.1),
        RawElement(2, ElementKind.NODE, {"source date": "21/03/2021", "name": "Niger hospital"},
                   13.52, 2.12),
    ]


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.nodes: list[RawElement] = []
        self.ways: list[RawElement] = []
        self.relations: list[RawElement] = []
        self.next_node = 1_000
        self.next_way = 1_000

    def node(self, lat, lon, tags=None) -> int:
        nid = self.next_node
        self.next_node += self.rng.choice((1, 1, 1, 2, 3))
        self.nodes.append(RawElement(nid, ElementKind.NODE, tags or {}, round(lat, 7),
                                     round(lon, 7)))
        return nid

    def way(self, refs, tags) -> int:
        wid = self.next_way
        self.next_way += 1
        self.ways.append(RawElement(wid, ElementKind.WAY, tags, refs=tuple(refs)))
        return wid

    def tags(self) -> dict:
        rng = self.rng
        town = rng.choice(TOWNS)
        roll = rng.random()
        if roll < 0.06:
            tags = dict(rng.choices([t for t, _ in _STRUCTURED],
                                    weights=[w for _, w in _STRUCTURED])[0])
        elif roll < 0.075:
            k, v = rng.choice(_TEXT_FACILITIES)
            tags = {"building": "yes", k: v.format(t=town)}
        elif roll < 0.10:
            k, v = rng.choice(_TEXT_NOISE)
            tags = {"building": "yes", k: v.format(t=town)}
        else:
            tags = {"building": "yes"}
        if rng.random() < 0.3:
            tags["source"] = rng.choice(("Bing", "survey", "digitalglobe", "Maxar"))
        return tags

    def building(self, lat, lon):
        rng = self.rng
        d = rng.uniform(4e-5, 2e-4)
        corners = [(lat, lon), (lat, lon + d), (lat + d, lon + d * rng.uniform(0.8, 1.2)),
                   (lat + d, lon)]
        refs = [self.node(a, b) for a, b in corners]
        self.way(refs + [refs[0]], self.tags())

    def road(self, lat, lon):
        rng = self.rng
        refs = []
        for _ in range(rng.randrange(30, 250)):
            refs.append(self.node(lat, lon))
            lat += rng.uniform(-1e-2, 1e-2)
            lon += rng.uniform(-1e-2, 1e-2)
        self.way(refs, {"highway": rng.choice(("residential", "track", "unclassified"))})


def demo_elements(n_buildings: int = DEFAULT_BUILDINGS, seed: int = 7) -> tuple[list[RawElement],
                                                                      list[AdminArea]]:
    rng = random.Random(seed)
    areas = country_layout()
    cells = [a for a in areas if a.level == 3]
    weights = []
    for _ in cells:
        r = rng.random()
        weights.append(0.0 if r < 0.12 else 0.0004 if r < 0.22 else rng.paretovariate(1.2))
    b = _Builder(rng)
    for _ in range(n_buildings):
        if rng.random() < 0.01:
            # between countries: lands in no admin area
            lat, lon = rng.uniform(8.0, 10.5), rng.uniform(-12.0, -6.0)
        else:
            cell = rng.choices(cells, weights=weights)[0]
            s, w, n, e = cell.bbox
            lat, lon = rng.uniform(s, n - 3e-4), rng.uniform(w, e - 3e-4)
        b.building(lat, lon)
        if rng.random() < 0.1:
            b.road(lat, lon)
        if rng.random() < 0.05:
            b.node(lat + 1e-4, lon + 1e-4, b.tags())
    for i in range(0, min(len(b.ways), 4000), 40):
        members = tuple(Member(ElementKind.WAY, w.id, "outer") for w in b.ways[i:i + 2])
        b.relations.append(RawElement(10_000 + i, ElementKind.RELATION,
                                      {"type": "multipolygon"}, members=members))
    return b.nodes + b.ways + b.relations, areas


def write_who_csv(path: Path, seed: int = 11) -> None:
    rng = random.Random(seed)
    spellings = {"Cote d'Ivoire": "Côte d'Ivoire", "Chad": "Tchad", "Senegal": "Sénégal"}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Country", "Admin1", "Facility name", "Facility type", "Ownership", "Lat",
                    "Long"])
        for name in COUNTRIES:
            for i in range(rng.randrange(5, 400)):
                lat = f"{rng.uniform(8, 11):.5f}" if rng.random() > 0.05 else "abc"
                w.writerow([spellings.get(name, name), "", f"Centre de santé {i}",
                            rng.choice(("Centre de santé", "Hôpital", "Dispensaire")), "MoH",
                            lat, f"{rng.uniform(-12, -5):.5f}"])
        w.writerow(["Ghana", "", "Korle Bu", "Hospital", "MoH", "5.5", "-0.2"])


def write_admin_geojson(path: Path, areas: list[AdminArea]) -> None:
    doc = {"type": "FeatureCollection", "features": [area_to_feature(a) for a in areas]}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def build_demo(out_dir: str | Path, n_buildings: int = DEFAULT_BUILDINGS, seed: int = 7) -> dict[str, Path]:
    """Write ``demo.osm.pbf``, ``admin.geojson`` and ``who.csv`` into *out_dir*."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    elements, areas = demo_elements(n_buildings, seed)
    paths = {"pbf": out / "demo.osm.pbf", "admin": out / "admin.geojson", "who": out / "who.csv"}
    paths["pbf"].write_bytes(encode_pbf(elements))
    write_admin_geojson(paths["admin"], areas)
    write_who_csv(paths["who"])
    return paths
