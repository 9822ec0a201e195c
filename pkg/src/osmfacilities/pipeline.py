"""End-to-end batch run: PBF files in, facility and statistics tables out."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from osmfacilities import __version__
from osmfacilities.classifier import FacilityRecord, Provenance, classify_element
from osmfacilities.classifier import load_topic_rules, RuleTopicModel
from osmfacilities.errors import ConfigError, PbfError
from osmfacilities.gazetteer import load_lexicon
from osmfacilities.geo import AdminArea, AdminIndex, assign_admin, load_admin_geojson
from osmfacilities.pbf.elements import filter_structures
from osmfacilities.pbf.reader import iter_elements
from osmfacilities.reference_tables import SCOPE_NOTE, proportion_median_discrepancies
from osmfacilities.stats import (UNASSIGNED, CountStats, UndefinedStatistic, density_per_100k,
                                 flag_missing, log_density, mean_population_flagged, median,
                                 proportions, tally)
from osmfacilities.tags import ClassKind, load_key_schema
from osmfacilities.validation import compare_counts, load_country_aliases, parse_who_csv

log = logging.getLogger(__name__)

STAGES = ("decode", "classify", "stats", "all")
EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2

CLASS_FIELDS = ("schools", "clinics", "unresolved", "other")


class InputError(Exception):
    """Unreadable or malformed input data; maps to exit code 1."""


@dataclass
class PipelineConfig:
    input_pbf_paths: list[Path]
    admin_geojson_path: Path
    output_dir: Path
    population_csv_path: Path | None = None
    lexicon_path: Path | None = None
    key_schema_path: Path | None = None
    topic_rules_path: Path | None = None
    who_csv_path: Path | None = None
    who_columns: dict[str, str] = field(default_factory=dict)
    missing_thresholds: tuple[int, ...] = (2, 10)
    missing_level: int | None = None
    table_precision: int | None = None
    stage: str = "all"
    workers: int | None = None

    def __post_init__(self):
        self.input_pbf_paths = [Path(p) for p in self.input_pbf_paths]
        for name in ("admin_geojson_path", "output_dir", "population_csv_path", "lexicon_path",
                     "key_schema_path", "topic_rules_path", "who_csv_path"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        self.missing_thresholds = tuple(int(t) for t in self.missing_thresholds)

    def validate(self) -> None:
        if not self.input_pbf_paths:
            raise ConfigError("at least one input PBF path is required")
        if self.admin_geojson_path is None:
            raise ConfigError("admin_geojson_path is required")
        if self.output_dir is None:
            raise ConfigError("output_dir is required")
        if any(t < 0 for t in self.missing_thresholds):
            raise ConfigError("missing-data thresholds must be non-negative")
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}")
        if self.table_precision is not None and self.table_precision < 0:
            raise ConfigError("table precision must be non-negative")

    def input_files(self) -> list[Path]:
        files = list(self.input_pbf_paths) + [self.admin_geojson_path]
        files += [p for p in (self.population_csv_path, self.who_csv_path) if p is not None]
        return files


@dataclass
class RunResult:
    records: list[FacilityRecord]
    areas: list[AdminArea]
    manifest: dict
    files: dict[str, str]


# -- formatting ----------------------------------------------------------------

def _fmt(value, precision: int | None = None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if precision is None else f"{value:.{precision}f}"
    return str(value)


def _csv(header, rows, precision=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v, precision) for v in row])
    return buf.getvalue()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _class_counts(records, original: bool) -> dict[str, int]:
    c = Counter((r.original if original else r.klass).kind for r in records)
    return {"schools": c[ClassKind.SCHOOL], "clinics": c[ClassKind.CLINIC],
            "unresolved": c[ClassKind.UNRESOLVED], "other": c[ClassKind.OTHER]}


# -- emitters --------------------------------------------------------------------

def _category(klass) -> str:
    if klass.category is not None:
        return klass.category.value
    return klass.label or ""


def facility_features(records, levels) -> list[dict]:
    features = []
    for r in records:
        if not r.klass.is_facility or r.location is None:
            continue
        props = {
            "element_id": r.element_id,
            "element_kind": r.element_kind.value,
            "class": r.klass.kind.value,
            "category": _category(r.klass),
            "provenance": r.provenance.value if r.provenance else None,
            "matched_token": r.matched_token,
            "topic": r.topic.value if r.topic else None,
            "original_class": r.original.kind.value,
        }
        for level in levels:
            props[f"admin_id_{level}"] = r.admin_id(level)
        features.append({"type": "Feature",
                         "geometry": {"type": "Point", "coordinates": [r.lon, r.lat]},
                         "properties": props})
    return features


def emit_facilities_geojson(records, levels=()) -> tuple[str, str]:
    """GeoJSON text for located schools/clinics, plus a CSV of unlocated ones."""
    doc = {"type": "FeatureCollection", "features": facility_features(records, levels)}
    unlocated = [(r.element_id, r.element_kind.value, r.klass.kind.value, _category(r.klass),
                  r.provenance.value if r.provenance else "")
                 for r in records if r.klass.is_facility and r.location is None]
    sidecar = _csv(("element_id", "element_kind", "class", "category", "provenance"), unlocated)
    return json.dumps(doc, ensure_ascii=False, indent=1) + "\n", sidecar


def _median_row(rows, start, precision):
    meds = []
    for j in range(start, len(rows[0]) if rows else 0):
        vals = [row[j] for row in rows if row[j] is not None]
        meds.append(median(vals) if vals else None)
    return meds


def proportions_table(groups: list[CountStats], names: dict[str, str],
                      precision: int | None = None) -> str:
    """Structured-key class shares per group, with a median row over named groups."""
    rows, for_median = [], []
    for cs in groups:
        try:
            pct = list(proportions(cs))
        except UndefinedStatistic:
            pct = [None] * 4
        rows.append([cs.group, names.get(cs.group, cs.group), cs.total, *pct])
        if cs.group != UNASSIGNED:
            for_median.append([cs.total, *pct])
    if for_median:
        rows.append(["Median", "Median", *_median_row(for_median, 0, precision)])
    header = ("group", "name", "total", "schools_pct", "clinics_pct", "unresolved_pct",
              "other_pct")
    return _csv(header, rows, precision)


def densities_table(original: list[CountStats], enriched: list[CountStats],
                    areas: dict[str, AdminArea], counters: Counter,
                    precision: int | None = None) -> str:
    """Per-100k densities before and after text enrichment, with a median row."""
    enriched_by = {cs.group: cs for cs in enriched}
    rows, for_median = [], []
    for cs in original:
        area = areas.get(cs.group)
        pop = area.population if area else None
        after = enriched_by[cs.group]
        counts = [cs.total, *cs.counts, *after.counts]
        try:
            dens = [density_per_100k(c, pop, cs.group) for c in counts]
        except UndefinedStatistic:
            if cs.group != UNASSIGNED:
                counters["group_without_population"] += 1
            dens = [None] * len(counts)
        rows.append([cs.group, area.name if area else cs.group, pop, *dens])
        if cs.group != UNASSIGNED:
            for_median.append(dens)
    if for_median:
        rows.append(["Median", "Median", None, *_median_row(for_median, 0, precision)])
    header = ("group", "name", "population", "total",
              *(f"original_{f}" for f in CLASS_FIELDS), *(f"enriched_{f}" for f in CLASS_FIELDS))
    return _csv(header, rows, precision)


def emit_stats_tables(original: list[CountStats], enriched: list[CountStats],
                      areas: dict[str, AdminArea], counters: Counter,
                      precision: int | None = None) -> dict[str, str]:
    names = {k: a.name for k, a in areas.items()}
    return {"proportions.csv": proportions_table(original, names, precision),
            "densities.csv": densities_table(original, enriched, areas, counters, precision)}


def missing_table(area_rows, thresholds, precision=None) -> str:
    rows = []
    flags = {t: dict((a.id, f) for a, f in flag_missing(area_rows, t)) for t in thresholds}
    for area, total in area_rows:
        try:
            dens = density_per_100k(total, area.population, area.id)
            logd = log_density(dens)
        except UndefinedStatistic:
            dens = logd = None
        rows.append([area.id, area.level, area.name, area.population, total, dens, logd,
                     *(int(flags[t][area.id]) for t in thresholds)])
    header = ("area_id", "level", "name", "population", "total", "density_per_100k",
              "log_density", *(f"flagged_le_{t}" for t in thresholds))
    return _csv(header, rows, precision)


# -- the run -----------------------------------------------------------------------

def execute(config: PipelineConfig, model=None) -> RunResult:
    """Run the pipeline in memory. Raises ``ConfigError`` or ``InputError``."""
    started = time.perf_counter()
    config.validate()
    for path in config.input_files():
        if not path.is_file():
            raise InputError(f"input file not found: {path}")

    schema = load_key_schema(config.key_schema_path)
    lexicon = load_lexicon(config.lexicon_path)
    if model is None:
        model = RuleTopicModel(load_topic_rules(config.topic_rules_path), lexicon)

    try:
        areas = load_admin_geojson(config.admin_geojson_path, config.population_csv_path)
    except (ConfigError, OSError) as exc:
        raise InputError(f"admin boundaries: {exc}") from None
    levels = sorted({a.level for a in areas})

    counters: Counter = Counter()
    decoded: Counter = Counter()
    admin_index = AdminIndex(areas)
    node_index: dict = {}
    elements = []
    for path in config.input_pbf_paths:
        try:
            with open(path, "rb") as fh:
                for el in iter_elements(fh, counters, node_index, config.workers,
                                        keep_untagged=False):
                    decoded[el.kind.value] += 1
                    elements.append(el)
        except (PbfError, OSError) as exc:
            raise InputError(f"{path}: {exc}") from None
    decoded["node"] += counters.pop("untagged_nodes", 0)

    manifest = {
        "tool": "osmfacilities",
        "version": __version__,
        "inputs": [{"path": str(p), "bytes": p.stat().st_size, "sha256": _sha256(p)}
                   for p in config.input_files()],
        "config": {"stage": config.stage, "missing_thresholds": list(config.missing_thresholds),
                   "table_precision": config.table_precision},
        "stages": {"decoded": sum(decoded.values()),
                   "decoded_by_kind": dict(sorted(decoded.items()))},
    }
    files: dict[str, str] = {}
    records: list[FacilityRecord] = []

    if config.stage != "decode":
        filtered = filter_structures(elements)
        del elements
        for el in filtered:
            rec = classify_element(el, schema, model, lexicon, node_index, counters)
            if rec.location is not None and areas:
                hit = assign_admin(rec.location, admin_index, counters)
                if hit:
                    rec = replace(rec, admin=tuple((lvl, hit[lvl].id) for lvl in sorted(hit)))
            records.append(rec)
        located = sum(1 for r in records if r.location is not None)
        manifest["stages"].update({
            "filtered": len(filtered),
            "filtered_by_kind": dict(sorted(Counter(e.kind.value for e in filtered).items())),
            "classified": len(records),
            "located": located,
            "unlocated": len(records) - located,
            "original": _class_counts(records, original=True),
            "enriched": _class_counts(records, original=False),
            "provenance": {p.value: sum(1 for r in records if r.provenance is p)
                           for p in Provenance},
        })
        files["facilities.geojson"], files["facilities_unlocated.csv"] = \
            emit_facilities_geojson(records, levels)

    if config.stage in ("stats", "all"):
        by_id = {a.id: a for a in areas}
        country_ids = sorted(a.id for a in areas if a.level == 0)
        original = _with_all_groups(tally(records, 0, original=True), country_ids)
        enriched = _with_all_groups(tally(records, 0, original=False), country_ids)
        files.update(emit_stats_tables(original, enriched, by_id, counters,
                                       config.table_precision))

        level = config.missing_level if config.missing_level is not None else (
            max(levels) if levels else None)
        area_rows = []
        if level is not None:
            totals = {cs.group: cs.total for cs in tally(records, level)}
            area_rows = [(a, totals.get(a.id, 0)) for a in sorted(areas, key=lambda a: a.id)
                         if a.level == level]
        files["missing_areas.csv"] = missing_table(area_rows, config.missing_thresholds,
                                                   config.table_precision)
        missing = {}
        for t in config.missing_thresholds:
            flags = flag_missing(area_rows, t)
            entry = {"flagged": sum(1 for _, f in flags if f)}
            try:
                entry["mean_population"] = mean_population_flagged(flags)
            except UndefinedStatistic:
                entry["mean_population"] = None
            missing[f"le_{t}"] = entry
        manifest["missing_areas"] = {"level": level, **missing}
        manifest["groups"] = {cs.group: cs.total for cs in enriched}
        manifest["reference_discrepancies"] = {
            "proportion_medians": proportion_median_discrepancies(),
            "note": ("published median row of the country proportion table does not equal the "
                     "median of its published country rows for these columns; the published "
                     "medians were likely computed on unrounded data"),
            "scope": SCOPE_NOTE,
        }

    if config.stage == "all" and config.who_csv_path is not None:
        try:
            with open(config.who_csv_path, encoding="utf-8", newline="") as fh:
                who = parse_who_csv(fh, config.who_columns, counters)
        except (ConfigError, OSError, UnicodeDecodeError) as exc:
            raise InputError(f"WHO list: {exc}") from None
        names = {a.id: a.name for a in areas if a.level == 0}
        post = {names[cs.group]: cs.clinics for cs in enriched if cs.group in names}
        pre = {names[cs.group]: cs.clinics for cs in original if cs.group in names}
        comparison = compare_counts(post, who, load_country_aliases(), osm_original=pre)
        files["who_comparison.csv"] = _csv(
            ("country", "osm_clinics", "who_clinics", "ratio", "status", "osm_clinics_original"),
            [(r.country, r.osm_clinics, r.who_clinics, r.ratio, r.status.value,
              r.osm_clinics_original) for r in comparison.rows])
        manifest["who_comparison"] = {"unmatched_countries": comparison.unmatched,
                                      "caveat": comparison.caveat,
                                      "facilities_parsed": len(who)}

    manifest["warnings"] = dict(sorted(counters.items()))
    manifest["outputs"] = sorted(files) + ["manifest.json"]
    manifest["elapsed_seconds"] = round(time.perf_counter() - started, 3)
    manifest["created_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return RunResult(records, areas, manifest, files)


def _with_all_groups(stats: list[CountStats], group_ids: list[str]) -> list[CountStats]:
    have = {cs.group: cs for cs in stats}
    out = [have.get(g, CountStats(g)) for g in group_ids]
    out += [cs for cs in stats if cs.group not in group_ids]
    return out


def write_outputs(result: RunResult, output_dir: Path) -> None:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    for name, text in result.files.items():
        with open(output_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    with open(output_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.manifest, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def run_pipeline(config: PipelineConfig, model=None) -> int:
    """Run and write outputs; returns the process exit status."""
    try:
        result = execute(config, model)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except InputError as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    write_outputs(result, config.output_dir)
    m = result.manifest["stages"]
    log.info("decoded %d elements, classified %d, wrote %d files to %s",
             m["decoded"], m.get("classified", 0), len(result.files) + 1, config.output_dir)
    return EXIT_OK
