import csv
import io
import json

import pytest

from osmfacilities.cli import main
from osmfacilities.demo import country_layout, worked_example_elements, write_admin_geojson
from osmfacilities.geo import AdminArea, area_to_feature
from osmfacilities.pbf import ElementKind, RawElement
from osmfacilities.pbf.encode import encode_pbf
from osmfacilities.pipeline import (EXIT_CONFIG, EXIT_INPUT, EXIT_OK, PipelineConfig, execute,
                                    run_pipeline)

SQUARE = ((0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 0.0), (0.0, 0.0))


@pytest.fixture
def inputs(tmp_path):
    def make(elements, areas=None):
        pbf = tmp_path / "in.osm.pbf"
        pbf.write_bytes(encode_pbf(elements))
        admin = tmp_path / "admin.geojson"
        write_admin_geojson(admin, areas if areas is not None else country_layout())
        return pbf, admin
    return make


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_worked_example_outputs(inputs, tmp_path):
    pbf, admin = inputs(worked_example_elements())
    out = tmp_path / "out"
    assert run_pipeline(PipelineConfig([pbf], admin, out)) == EXIT_OK
    features = json.loads((out / "facilities.geojson").read_text())["features"]
    props = [(f["properties"]["class"], f["properties"]["category"],
              f["properties"]["provenance"], f["properties"]["topic"]) for f in features]
    assert props == [("school", "language", "keyword_in_text", None),
                     ("clinic", "hospital", "topic_model", "location")]
    assert features[0]["geometry"]["coordinates"] == [2.1, 13.5]  # lon, lat


def test_empty_pbf_gives_headers_and_zero_counts(inputs, tmp_path):
    pbf, admin = inputs([], areas=[])
    out = tmp_path / "out"
    assert run_pipeline(PipelineConfig([pbf], admin, out)) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stages"]["decoded"] == manifest["stages"]["classified"] == 0
    for name in ("proportions.csv", "densities.csv", "missing_areas.csv",
                 "facilities_unlocated.csv"):
        text = (out / name).read_text()
        assert text.count("\n") == 1 and text.endswith("\n"), name
    assert json.loads((out / "facilities.geojson").read_text())["features"] == []


def test_missing_input_exits_1_without_outputs(inputs, tmp_path):
    _, admin = inputs([])
    out = tmp_path / "out"
    assert run_pipeline(PipelineConfig([tmp_path / "nope.pbf"], admin, out)) == EXIT_INPUT
    assert not out.exists()


def test_corrupt_input_exits_1_without_outputs(inputs, tmp_path):
    pbf, admin = inputs(worked_example_elements())
    pbf.write_bytes(pbf.read_bytes()[:-5])
    out = tmp_path / "out"
    assert run_pipeline(PipelineConfig([pbf], admin, out)) == EXIT_INPUT
    assert not out.exists()


@pytest.mark.parametrize("kwargs", [{"input_pbf_paths": []}, {"missing_thresholds": (-1,)},
                                    {"stage": "plot"}, {"table_precision": -2}])
def test_config_errors_exit_2(inputs, tmp_path, kwargs):
    pbf, admin = inputs([])
    config = dict(input_pbf_paths=[pbf], admin_geojson_path=admin, output_dir=tmp_path / "o")
    config.update(kwargs)
    assert run_pipeline(PipelineConfig(**config)) == EXIT_CONFIG


def test_way_clinic_is_a_point_at_its_centroid(inputs, tmp_path):
    corners = [(1, 0.0, 0.0), (2, 0.0, 1.0), (3, 1.0, 1.0), (4, 1.0, 0.0)]
    els = [RawElement(i, ElementKind.NODE, {}, lat, lon) for i, lat, lon in corners]
    els.append(RawElement(10, ElementKind.WAY, {"amenity": "clinic"}, refs=(1, 2, 3, 4, 1)))
    els.append(RawElement(11, ElementKind.WAY, {"amenity": "school"}, refs=(1, 2, 99, 1)))
    area = AdminArea("A", 0, "Area", (SQUARE,), 100_000)
    pbf, admin = inputs(els, [area])
    result = execute(PipelineConfig([pbf], admin, tmp_path / "o"))
    features = json.loads(result.files["facilities.geojson"])["features"]
    assert len(features) == 1
    f = features[0]
    assert f["geometry"]["coordinates"] == [0.5, 0.5]
    assert f["properties"]["element_kind"] == "way" and f["properties"]["admin_id_0"] == "A"
    unlocated = list(csv.DictReader(io.StringIO(result.files["facilities_unlocated.csv"])))
    assert [r["element_id"] for r in unlocated] == ["11"]
    assert result.manifest["warnings"]["missing_way_vertex"] == 1


def test_stage_conservation_in_manifest(demo_inputs, tmp_path):
    result = execute(PipelineConfig([demo_inputs["pbf"]], demo_inputs["admin"], tmp_path,
                                    who_csv_path=demo_inputs["who"]))
    s = result.manifest["stages"]
    assert s["decoded"] >= s["filtered"] == s["classified"] == s["located"] + s["unlocated"]
    for side in ("original", "enriched"):
        assert sum(s[side].values()) == s["classified"]
    # enrichment monotonicity from stage counts alone
    assert s["enriched"]["unresolved"] <= s["original"]["unresolved"]
    for k in ("schools", "clinics", "other"):
        assert s["enriched"][k] >= s["original"][k]
    assert s["decoded"] == sum(s["decoded_by_kind"].values())
    assert result.manifest["who_comparison"]["unmatched_countries"] == {"who": ["Ghana"]}
    assert result.manifest["missing_areas"]["le_2"]["flagged"] > 0


def test_tables_have_median_rows_and_precision(inputs, tmp_path):
    pbf, admin = inputs(worked_example_elements())
    res = execute(PipelineConfig([pbf], admin, tmp_path, table_precision=3))
    rows = list(csv.DictReader(io.StringIO(res.files["proportions.csv"])))
    # ten countries, the unassigned group, then the median row
    assert len(rows) == 12 and [r["group"] for r in rows[-2:]] == ["unassigned", "Median"]
    assert rows[-2]["unresolved_pct"] == "100.000" and rows[0]["schools_pct"] == ""
    dens = list(csv.DictReader(io.StringIO(res.files["densities.csv"])))
    assert len(dens) == 12 and dens[0]["enriched_clinics"] == "0.000"


def test_single_group_table_has_two_rows(inputs, tmp_path):
    els = [RawElement(1, ElementKind.NODE, {"amenity": "school"}, 1.0, 1.0)]
    pbf, admin = inputs(els, [AdminArea("A", 0, "Area", (SQUARE,), 50)])
    res = execute(PipelineConfig([pbf], admin, tmp_path))
    rows = list(csv.DictReader(io.StringIO(res.files["proportions.csv"])))
    assert [r["group"] for r in rows] == ["A", "Median"]
    assert rows[0]["schools_pct"] == "100.0"
    dens = list(csv.DictReader(io.StringIO(res.files["densities.csv"])))
    assert float(dens[0]["original_schools"]) == 2000.0


def test_population_override_and_missing_level(inputs, tmp_path):
    cells = [AdminArea(f"c{i}", 3, f"c{i}", (((0, i), (0, i + 1), (1, i + 1), (1, i), (0, i)),),
                       1000) for i in range(3)]
    els = [RawElement(k, ElementKind.NODE, {"shop": "x"}, 0.5, 0.5) for k in range(1, 4)]
    pbf, admin = inputs(els, cells)
    pop = tmp_path / "pop.csv"
    pop.write_text("area_id,population\nc0,300000\n", encoding="utf-8")
    res = execute(PipelineConfig([pbf], admin, tmp_path, population_csv_path=pop,
                                 missing_thresholds=(0, 3)))
    rows = list(csv.DictReader(io.StringIO(res.files["missing_areas.csv"])))
    assert [(r["area_id"], r["total"], r["flagged_le_0"], r["flagged_le_3"]) for r in rows] == [
        ("c0", "3", "0", "1"), ("c1", "0", "1", "1"), ("c2", "0", "1", "1")]
    assert rows[0]["population"] == "300000" and float(rows[0]["density_per_100k"]) == 1.0
    assert rows[0]["log_density"] == "0.0" and rows[1]["log_density"] == ""


def test_stage_decode_only(inputs, tmp_path):
    pbf, admin = inputs(worked_example_elements())
    res = execute(PipelineConfig([pbf], admin, tmp_path, stage="decode"))
    assert res.files == {} and res.manifest["stages"]["decoded"] == 2


def test_custom_topic_model_is_pluggable(inputs, tmp_path):
    pbf, admin = inputs(worked_example_elements())
    res = execute(PipelineConfig([pbf], admin, tmp_path), model=lambda tok: "miscellaneous")
    assert res.manifest["stages"]["enriched"]["clinics"] == 0
    assert res.manifest["stages"]["enriched"]["schools"] == 1


# -- command line ------------------------------------------------------------------

def test_cli_run_and_config_file(inputs, tmp_path):
    pbf, admin = inputs(worked_example_elements())
    cfg = tmp_path / "run.conf"
    cfg.write_text(f"# demo\ninput = {pbf}\nadmin-geojson = {admin}\n"
                   f"output_dir = {tmp_path / 'from_file'}\nmissing_thresholds = 1, 5\n",
                   encoding="utf-8")
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_file" / "missing_areas.csv").read_text().startswith(
        "area_id,level,name,population,total,density_per_100k,log_density,flagged_le_1,"
        "flagged_le_5\n")
    # flags override file values
    assert main(["run", "--config", str(cfg), "-o", str(tmp_path / "flag"),
                 "--missing-thresholds", "7"]) == 0
    assert "flagged_le_7" in (tmp_path / "flag" / "missing_areas.csv").read_text()
    assert not (tmp_path / "flag" / "who_comparison.csv").exists()


@pytest.mark.parametrize("argv", [["run"], ["run", "x.pbf"], ["bogus"],
                                  ["run", "x.pbf", "--admin-geojson", "a", "-o", "o",
                                   "--missing-thresholds", "a,b"]])
def test_cli_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_cli_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("colour = blue\n", encoding="utf-8")
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG


def test_cli_input_error(tmp_path, inputs):
    _, admin = inputs([])
    assert main(["run", str(tmp_path / "missing.pbf"), "--admin-geojson", str(admin), "-o",
                 str(tmp_path / "o")]) == EXIT_INPUT


def test_cli_make_fixture_small(tmp_path, capsys):
    assert main(["make-fixture", str(tmp_path / "fx"), "--buildings", "200"]) == 0
    assert (tmp_path / "fx" / "demo.osm.pbf").stat().st_size > 0
    assert "admin.geojson" in capsys.readouterr().out


def test_cli_version_and_help(capsys):
    assert main(["--version"]) == 0
    assert main(["run", "--help"]) == 0
    assert "--table-precision" in capsys.readouterr().out


def test_area_feature_serialization():
    feature = area_to_feature(AdminArea("A", 0, "Área", (SQUARE,), 5))
    assert feature["geometry"]["coordinates"][0][1] == [2.0, 0.0]
