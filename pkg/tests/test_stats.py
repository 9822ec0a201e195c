import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from osmfacilities.classifier import FacilityRecord
from osmfacilities.geo import AdminArea
from osmfacilities.pbf import ElementKind
from osmfacilities.reference_tables import (DENSITIES, DENSITY_COLUMNS, DENSITY_MEDIANS,
                                            PROPORTIONS, proportion_median_discrepancies,
                                            recomputed_medians)
from osmfacilities.stats import (UNASSIGNED, CountStats, UndefinedStatistic, density_per_100k,
                                 flag_missing, log_density, mean_population_flagged, median,
                                 merge, proportions, tally)
from osmfacilities.tags import UNRESOLVED, BuildingClass, ClinicCategory, SchoolCategory

SCHOOL = BuildingClass.school(SchoolCategory.MUSIC)
CLINIC = BuildingClass.clinic(ClinicCategory.DOCTORS)
OTHER = BuildingClass.other("shop=yes")
KLASSES = [SCHOOL, CLINIC, UNRESOLVED, OTHER]


def rec(klass, group=None, original=None, i=0):
    admin = ((0, group),) if group else ()
    return FacilityRecord(i, ElementKind.NODE, klass, original or klass, admin=admin)


def test_tally_example():
    records = ([rec(SCHOOL, "G")] * 2 + [rec(CLINIC, "G")] + [rec(UNRESOLVED, "G")] * 90
               + [rec(OTHER, "G")] * 7)
    assert tally(records) == [CountStats("G", 100, 2, 1, 90, 7)]
    assert tally([]) == []


def test_tally_groups_and_unassigned_last():
    records = [rec(SCHOOL, "B"), rec(CLINIC, "A"), rec(OTHER), rec(UNRESOLVED, "B")]
    rows = tally(records)
    assert [r.group for r in rows] == ["A", "B", UNASSIGNED]
    assert sum(r.total for r in rows) == len(records)
    assert tally(records, level=None) == [CountStats("all", 4, 1, 1, 1, 1)]


def test_tally_original_classes():
    records = [rec(SCHOOL, "G", original=UNRESOLVED), rec(CLINIC, "G")]
    assert tally(records, original=True) == [CountStats("G", 2, 0, 1, 1, 0)]


records_st = st.lists(st.builds(rec, st.sampled_from(KLASSES),
                                st.sampled_from([None, "A", "B", "C"])), max_size=60)


@given(records_st, st.integers(1, 5))
def test_partition_conservation_and_merge(records, shards):
    rows = tally(records)
    for field in ("total", "schools", "clinics", "unresolved", "other"):
        assert sum(getattr(r, field) for r in rows) == sum(
            getattr(r, field) for r in tally(records, level=None))
    parts = [tally(records[i::shards]) for i in range(shards)]
    assert merge(parts) == rows


def test_count_stats_invariant():
    with pytest.raises(ValueError):
        CountStats("g", 5, 1, 1, 1, 1)


def test_proportions_examples():
    assert proportions(CountStats("g", 100, 2, 1, 90, 7)) == (2.0, 1.0, 90.0, 7.0)
    assert proportions(CountStats("g", 3, 0, 0, 3, 0)) == (0, 0, 100.0, 0)
    with pytest.raises(UndefinedStatistic):
        proportions(CountStats("g"))


def test_benin_row_sums_after_rounding():
    assert sum(PROPORTIONS["Benin"]) == pytest.approx(100.001, abs=0.005)


@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6), st.integers(0, 10 ** 6),
       st.integers(0, 10 ** 6))
def test_proportions_sum_to_100(s, c, u, o):
    total = s + c + u + o
    if total:
        assert sum(proportions(CountStats("g", total, s, c, u, o))) == pytest.approx(100.0,
                                                                                     rel=1e-12)


def test_density_examples():
    assert density_per_100k(33, 1_000_000) == pytest.approx(3.3)
    assert density_per_100k(0, 5) == 0.0
    assert density_per_100k(5, 100_000) == 5.0
    with pytest.raises(UndefinedStatistic, match="BEN-00"):
        density_per_100k(1, 0, "BEN-00")
    with pytest.raises(UndefinedStatistic):
        density_per_100k(1, None)


@given(st.integers(0, 10 ** 9), st.integers(1, 10 ** 10))
def test_density_recovers_count(count, population):
    d = density_per_100k(count, population)
    assert d * population / 100_000 == pytest.approx(count, rel=1e-9, abs=1e-9)


def test_median_examples():
    total = [DENSITIES[c][0] for c in DENSITIES]
    assert median(total) == pytest.approx(7358.79, abs=1e-9)
    i = DENSITY_COLUMNS.index("enriched_schools")
    assert median([DENSITIES[c][i] for c in DENSITIES]) == pytest.approx(21.42, abs=1e-9)
    assert median([5]) == 5
    with pytest.raises(UndefinedStatistic):
        median([])


@given(st.lists(st.floats(-1e9, 1e9), min_size=1), st.randoms())
def test_median_permutation_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert median(ys) == median(xs) == median(xs[::-1])


def test_log_density():
    assert log_density(1.0) == 0.0
    assert log_density(0) is None
    assert log_density(math.e) == 1.0


def _areas(totals):
    return [(AdminArea(f"a{i}", 3, f"a{i}", (((0, 0), (0, 1), (1, 1), (0, 0)),), 1000 * (i + 1)),
             t) for i, t in enumerate(totals)]


def test_flag_missing_examples():
    rows = _areas([2, 3, 10])
    assert [f for _, f in flag_missing(rows, 2)] == [True, False, False]
    assert [f for _, f in flag_missing(rows, 10)] == [True, True, True]
    assert [f for _, f in flag_missing([(rows[0][0], CountStats("a0", 2, 0, 0, 2, 0))], 2)] == [
        True]
    with pytest.raises(ValueError):
        flag_missing(rows, -1)


@given(st.lists(st.integers(0, 30), max_size=40), st.integers(0, 30), st.integers(0, 30))
def test_flag_missing_monotone(totals, t1, t2):
    lo, hi = sorted((t1, t2))
    rows = _areas(totals)
    low = {a.id for a, f in flag_missing(rows, lo) if f}
    high = {a.id for a, f in flag_missing(rows, hi) if f}
    assert low <= high


def test_mean_population_flagged():
    a, b = _areas([0, 0])
    a = (AdminArea("x", 3, "x", a[0].rings, 20_000), True)
    b = (AdminArea("y", 3, "y", b[0].rings, 36_000), True)
    assert mean_population_flagged([a, b]) == 28_000
    assert mean_population_flagged([(AdminArea("z", 3, "z", a[0].rings, 5), True)]) == 5
    with pytest.raises(UndefinedStatistic):
        mean_population_flagged([(a[0], False)])


def test_reference_medians():
    ours = recomputed_medians(DENSITIES, DENSITY_COLUMNS)
    for name, printed in DENSITY_MEDIANS.items():
        assert ours[name] == pytest.approx(printed, abs=0.005), name
    gaps = proportion_median_discrepancies()
    assert set(gaps) == {"schools", "unresolved", "other"}
    assert gaps["schools"] == {"published": 0.058, "recomputed": 0.0535}
