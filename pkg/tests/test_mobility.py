import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdrcrowd.domain import GeoPoint
from cdrcrowd.geo import offset_point
from cdrcrowd.mobility import (
    DEFAULT_IET_FALLBACK_S,
    avg_inter_cdr_time,
    daily_cdr_percentiles,
    dataset_day_count,
    hour_range_of_window,
    in_hour_range,
    inter_cdr_times,
    population_median_stats,
    quartile_summary,
    radius_of_gyration,
    radius_of_gyration_latlon,
    user_radii_of_gyration,
)
from helpers import BASE, cell_at, make_store
from invariants import (
    assert_am_ge_gm,
    assert_gyration_translation_invariant,
    assert_quartiles_ordered,
)

DAY = 86_400


class TestHourRange:
    def test_plain_window(self):
        assert hour_range_of_window(10 * DAY + 36_000, 10 * DAY + 39_600) == (36_000.0, 39_600.0)

    def test_wrapping_window(self):
        # 23:00 to 01:00 next day
        lo, hi = hour_range_of_window(5 * DAY + 82_800, 6 * DAY + 3_600)
        assert (lo, hi) == (82_800.0, 3_600.0)

    def test_full_day_means_no_filter(self):
        assert hour_range_of_window(0, DAY) is None
        assert hour_range_of_window(100, 100 + 2 * DAY) is None

    def test_bad_window(self):
        with pytest.raises(ValueError):
            hour_range_of_window(10, 10)

    def test_membership_with_wrap(self):
        rng = (82_800.0, 3_600.0)
        ts = np.array([82_800, 3 * DAY + 1_800, 43_200, 3_599, 3_600])
        assert in_hour_range(ts, rng).tolist() == [True, True, False, True, False]

    def test_membership_no_filter(self):
        assert in_hour_range(np.array([1, 2]), None).all()


class TestInterCdrTimes:
    def test_plain_gaps(self):
        assert inter_cdr_times(np.array([10, 40, 100])).tolist() == [30.0, 60.0]

    def test_too_few_records(self):
        assert inter_cdr_times(np.array([5])).size == 0
        assert inter_cdr_times(np.array([])).size == 0

    def test_gap_needs_both_endpoints_inside(self):
        # hours filter 10:00-11:00; records at 10:10, 10:30, 12:00, next-day 10:05
        ts = np.array([36_600, 37_800, 43_200, DAY + 36_300])
        gaps = inter_cdr_times(ts, (36_000.0, 39_600.0))
        # only the 10:10 -> 10:30 pair has both ends inside
        assert gaps.tolist() == [1_200.0]

    def test_gaps_are_not_repaired_after_filtering(self):
        # both outer records qualify but the middle one breaks the chain
        ts = np.array([36_100, 50_000, 36_200 + DAY])
        gaps = inter_cdr_times(ts, (36_000.0, 39_600.0))
        assert gaps.size == 0

    @given(st.lists(st.integers(0, 10 * DAY), min_size=2, max_size=40))
    def test_unfiltered_length(self, ts):
        ts = sorted(ts)
        assert inter_cdr_times(np.array(ts)).size == len(ts) - 1

    def test_average_and_fallback(self):
        assert avg_inter_cdr_time(np.array([0, 60, 180])) == 90.0
        assert avg_inter_cdr_time(np.array([5])) == DEFAULT_IET_FALLBACK_S
        assert avg_inter_cdr_time(np.array([5]), fallback=111.0) == 111.0
        assert DEFAULT_IET_FALLBACK_S == 64 * 60


class TestQuartiles:
    def test_pinned_example(self):
        s = quartile_summary([1.0, 2.0, 3.0, 4.0])
        assert (s.q1, s.median, s.q3) == (1.75, 2.5, 3.25)
        assert s.sample_count == 4

    def test_single_value(self):
        s = quartile_summary([7.5])
        assert (s.q1, s.median, s.q3) == (7.5, 7.5, 7.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            quartile_summary([])

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50))
    def test_ordered(self, values):
        assert_quartiles_ordered(values)


class TestPopulationStats:
    def test_pinned_example(self):
        arith, geo = population_median_stats([10.0, 1000.0])
        assert arith == 505.0
        assert geo == pytest.approx(100.0, rel=1e-12)

    def test_nonpositive_kills_geometric_mean(self):
        arith, geo = population_median_stats([0.0, 10.0])
        assert arith == 5.0
        assert geo is None

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            population_median_stats([])

    @given(st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=50))
    def test_am_ge_gm(self, values):
        assert_am_ge_gm(values)


class TestRadiusOfGyration:
    def test_zero_iff_coincident(self):
        p = GeoPoint(45.0, 7.0)
        assert radius_of_gyration([p, p, p]) == 0.0
        spread = [p, offset_point(p, 100.0, 0.0)]
        assert radius_of_gyration(spread) > 0.0

    def test_two_point_value(self):
        # Two points 1 km apart straddle their centroid at 500 m each.
        pts = [BASE, offset_point(BASE, 0.0, 1_000.0)]
        assert radius_of_gyration(pts) == pytest.approx(500.0, rel=1e-9)

    def test_single_point(self):
        assert radius_of_gyration([BASE]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            radius_of_gyration_latlon(np.array([]), np.array([]))

    @given(
        st.lists(
            st.tuples(st.floats(-1500, 1500), st.floats(-1500, 1500)),
            min_size=1, max_size=20,
        ),
        st.floats(-2000, 2000),
        st.floats(-2000, 2000),
    )
    @settings(max_examples=60)
    def test_translation_invariant(self, offsets, de, dn):
        points = [offset_point(BASE, e, n) for e, n in offsets]
        assert_gyration_translation_invariant(points, de, dn)


class TestStoreStatistics:
    CELLS = [cell_at("a", 0.0, 0.0, 200.0), cell_at("b", 2_000.0, 0.0, 200.0)]

    def test_dataset_day_count(self):
        rows = [("u1", 222, 100, "a"), ("u1", 222, 2 * DAY + 5, "a")]
        assert dataset_day_count(make_store(rows, self.CELLS)) == 3
        assert dataset_day_count(make_store([], self.CELLS)) == 0
        same_day = [("u1", 222, 100, "a"), ("u1", 222, 200, "a")]
        assert dataset_day_count(make_store(same_day, self.CELLS)) == 1

    def test_daily_percentiles(self):
        # two days of data: u1 makes 4 records, u2 makes 2
        rows = [("u1", 222, t, "a") for t in (10, 20, DAY + 10, DAY + 20)]
        rows += [("u2", 222, t, "b") for t in (30, DAY + 30)]
        pcts = daily_cdr_percentiles(make_store(rows, self.CELLS))
        assert pcts[0] == 1.0
        assert pcts[50] == 1.5
        assert pcts[100] == 2.0
        assert set(pcts) == set(range(0, 101, 5))

    def test_daily_percentiles_empty_store(self):
        with pytest.raises(ValueError):
            daily_cdr_percentiles(make_store([], self.CELLS))

    def test_user_radii_match_scalar_function(self):
        rows = [
            ("u1", 222, 10, "a"), ("u1", 222, 20, "b"),
            ("u2", 222, 10, "a"),
        ]
        store = make_store(rows, self.CELLS)
        radii = user_radii_of_gyration(store, self.CELLS)
        assert radii.shape == (2,)
        assert radii[0] == pytest.approx(
            radius_of_gyration([self.CELLS[0].center, self.CELLS[1].center])
        )
        assert radii[1] == 0.0
