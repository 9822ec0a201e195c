import io
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from osmfacilities.errors import ConfigError
from osmfacilities.validation import (ComparisonRow, Status, WhoFacility, compare_counts,
                                      load_country_aliases, parse_who_csv)

HEADER = "Country,Admin1,Facility name,Facility type,Ownership,Lat,Long\n"


def test_parse_well_formed():
    text = HEADER + ("Niger,,CSI Dosso,CSI,MoH,13.05,3.19\n"
                     "Mali,,CSCOM,CSCOM,MoH,12.6,-8.0\n"
                     "Tchad,,Hôpital,Hôpital,MoH,12.1,15.0\n")
    got = parse_who_csv(io.StringIO(text))
    assert [f.country for f in got] == ["Niger", "Mali", "Tchad"]
    assert got[0] == WhoFacility("Niger", "CSI Dosso", "CSI", 13.05, 3.19)


def test_bad_coordinates_are_dropped_and_counted():
    counters = Counter()
    text = HEADER + "Niger,,x,CSI,MoH,abc,3.19\nMali,,y,CSI,MoH,95,3\nMali,,z,CSI,MoH,,\n"
    got = parse_who_csv(io.StringIO(text), counters=counters)
    assert [(f.lat, f.lon) for f in got] == [(None, None)] * 3
    assert counters["who_bad_coordinates"] == 2


def test_header_only_and_missing_country_column():
    assert parse_who_csv(io.StringIO(HEADER)) == []
    with pytest.raises(ConfigError):
        parse_who_csv(io.StringIO("Pays,Nom\nNiger,x\n"))


def test_column_mapping():
    text = "Pays,Nom\nSénégal,Poste\n"
    got = parse_who_csv(io.StringIO(text), {"country": "Pays", "name": "Nom"})
    assert got == [WhoFacility("Sénégal", "Poste")]


def test_who_facility_invariants():
    with pytest.raises(ValueError):
        WhoFacility("")


@pytest.mark.parametrize("osm,who,ratio,status", [(50, 40, 1.25, Status.AT_OR_OVER),
                                                   (10, 40, 0.25, Status.UNDER),
                                                   (5, 0, None, Status.AT_OR_OVER),
                                                   (0, 0, None, Status.AT_OR_OVER)])
def test_row_ratio_and_status(osm, who, ratio, status):
    row = ComparisonRow("X", osm, who)
    assert row.ratio == ratio and row.status is status


def _who(country, n):
    return [WhoFacility(country, f"f{i}") for i in range(n)]


def test_compare_counts_examples():
    cmp = compare_counts({"Niger": 50, "Mali": 10}, _who("Niger", 40) + _who("Mali", 40)
                         + _who("Togo", 7))
    rows = {r.country: r for r in cmp.rows}
    assert (rows["Niger"].ratio, rows["Niger"].status) == (1.25, Status.AT_OR_OVER)
    assert (rows["Mali"].ratio, rows["Mali"].status) == (0.25, Status.UNDER)
    assert (rows["Togo"].osm_clinics, rows["Togo"].status, rows["Togo"].ratio) == (
        0, Status.UNDER, 0.0)
    assert "public" in cmp.caveat


def test_aliases_harmonize_spellings():
    aliases = load_country_aliases()
    for name in ("Côte d'Ivoire", "COTE D IVOIRE", "CIV", "Ivory Coast", "Côte d’Ivoire"):
        assert aliases.canonical(name) == "Cote d'Ivoire", name
    assert aliases.canonical("Tchad") == "Chad"
    cmp = compare_counts({"Cote d'Ivoire": 3}, _who("Côte d'Ivoire", 2) + _who("Ghana", 1),
                         osm_original={"Cote d'Ivoire": 1})
    assert cmp.rows == [ComparisonRow("Cote d'Ivoire", 3, 2, 1)]
    assert cmp.unmatched == {"who": ["Ghana"]}


def test_type_filter():
    who = [WhoFacility("Niger", "a", "Hôpital"), WhoFacility("Niger", "b", "CSI")]
    assert compare_counts({"Niger": 1}, who, include_types=["hopital"]).rows[0].who_clinics == 1


countries = st.sampled_from(["Niger", "Mali", "Togo", "Tchad", "Benin", "Atlantis"])


@given(st.lists(countries, max_size=40), st.dictionaries(countries, st.integers(0, 99)),
       st.randoms())
def test_comparison_invariants(who_countries, osm, rnd):
    who = [WhoFacility(c) for c in who_countries]
    cmp = compare_counts(osm, who)
    mapped = sum(1 for c in who_countries if c != "Atlantis")
    assert sum(r.who_clinics for r in cmp.rows) == mapped
    for r in cmp.rows:
        assert (r.status is Status.AT_OR_OVER) == (r.osm_clinics >= r.who_clinics)
    shuffled = list(who)
    rnd.shuffle(shuffled)
    assert compare_counts(osm, shuffled).rows == cmp.rows
