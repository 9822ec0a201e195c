"""Command-line entry point: ``osm-facilities run`` and ``osm-facilities make-fixture``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from osmfacilities import __version__
from osmfacilities.errors import ConfigError
from osmfacilities.pipeline import EXIT_CONFIG, STAGES, PipelineConfig, run_pipeline

log = logging.getLogger("osmfacilities")

# config keys holding optional file paths
_PATH_KEYS = ("admin_geojson", "population_csv", "lexicon", "key_schema", "topic_rules",
              "who_csv")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected integers, got {text!r}") from None


def _columns(text: str) -> dict[str, str]:
    out = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"column mapping {part!r} is not field=Header")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def build_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge the optional config file with command-line flags (flags win)."""
    values = read_config_file(args.config) if args.config else {}
    known = {"input", "output_dir", "missing_thresholds", "missing_level", "table_precision",
             "stage", "workers", "who_columns", *_PATH_KEYS}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in known:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    inputs = values.get("input") or []
    if isinstance(inputs, str):
        inputs = inputs.split()
    if not inputs:
        raise ConfigError("no input PBF given")
    for key in ("admin_geojson", "output_dir"):
        if not values.get(key):
            raise ConfigError(f"{key.replace('_', '-')} is required")

    def opt_int(key):
        v = values.get(key)
        if v is None or v == "":
            return None
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{key} must be an integer") from None

    thresholds = values.get("missing_thresholds", (2, 10))
    if isinstance(thresholds, str):
        thresholds = _ints(thresholds)
    columns = values.get("who_columns") or {}
    if isinstance(columns, str):
        columns = _columns(columns)
    return PipelineConfig(
        input_pbf_paths=list(inputs),
        admin_geojson_path=values["admin_geojson"],
        output_dir=values["output_dir"],
        population_csv_path=values.get("population_csv") or None,
        lexicon_path=values.get("lexicon") or None,
        key_schema_path=values.get("key_schema") or None,
        topic_rules_path=values.get("topic_rules") or None,
        who_csv_path=values.get("who_csv") or None,
        who_columns=columns,
        missing_thresholds=tuple(thresholds),
        missing_level=opt_int("missing_level"),
        table_precision=opt_int("table_precision"),
        stage=values.get("stage", "all"),
        workers=opt_int("workers"),
    )


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osm-facilities",
                                description="Classify OSM buildings into schools and clinics "
                                            "and summarize coverage per admin area.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the classification pipeline")
    run.add_argument("input", nargs="*", default=None, help="input .osm.pbf file(s)")
    run.add_argument("--config", help="key = value file; flags override its values")
    run.add_argument("--admin-geojson", dest="admin_geojson")
    run.add_argument("--population-csv", dest="population_csv")
    run.add_argument("--lexicon")
    run.add_argument("--key-schema", dest="key_schema")
    run.add_argument("--topic-rules", dest="topic_rules")
    run.add_argument("--who-csv", dest="who_csv")
    run.add_argument("--who-columns", dest="who_columns", type=_columns,
                     help="field=Header pairs, comma separated (fields: country, name, "
                          "facility_type, lat, lon)")
    run.add_argument("-o", "--output-dir", dest="output_dir")
    run.add_argument("--missing-thresholds", dest="missing_thresholds", type=_ints,
                     help="comma-separated totals at or below which an area is flagged")
    run.add_argument("--missing-level", dest="missing_level", type=int)
    run.add_argument("--table-precision", dest="table_precision", type=int,
                     help="decimal places for floats in CSV tables (default: full repr)")
    run.add_argument("--stage", choices=STAGES)
    run.add_argument("--workers", type=int)

    fx = sub.add_parser("make-fixture", help="write the synthetic demo inputs")
    fx.add_argument("output_dir")
    fx.add_argument("--buildings", type=int, default=None)
    fx.add_argument("--seed", type=int, default=7)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "make-fixture":
        from osmfacilities.demo import DEFAULT_BUILDINGS, build_demo
        paths = build_demo(args.output_dir, args.buildings or DEFAULT_BUILDINGS, args.seed)
        for kind, path in paths.items():
            print(f"{kind}\t{path}")
        return 0

    if not args.input:
        args.input = None
    try:
        config = build_config(args)
        config.validate()
    except ConfigError as exc:
        print(f"osm-facilities: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_pipeline(config)


if __name__ == "__main__":
    sys.exit(main())
