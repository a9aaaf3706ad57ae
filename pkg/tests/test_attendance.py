import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdrcrowd.attendance import (
    DEFAULT_HISTORY_DAYS,
    DEFAULT_NAIVE_RADIUS_M,
    estimate_raw_attendance,
    naive_count,
    presence_from_arrays,
    presence_probability,
)
from cdrcrowd.domain import CdrRecord, ValidationError
from cdrcrowd.mobility import avg_inter_cdr_time, hour_range_of_window
from cdrcrowd.store import users_in_window
from helpers import BASE, cell_at, make_store
from invariants import assert_presence_in_unit_interval

DAY = 86_400


def _records(uid, ts_cells):
    return [CdrRecord(uid, 222, t, c) for t, c in ts_cells]


class TestPresenceProbability:
    def test_single_record_fraction(self):
        # one area record anywhere in a 240-minute window, 30-minute gap
        # prior: the dwell estimate is the gap itself, 1/8 of the window
        recs = _records("u1", [(5_000, "a")])
        a = presence_probability(recs, {"a"}, 0, 14_400, inter_cdr_time=1_800.0)
        assert a.stay_fraction == 0.125
        assert a.habit_fraction == 0.0
        assert a.probability == 0.125
        assert (a.first_seen, a.last_seen) == (5_000, 5_000)

    def test_full_duration_visitor_scores_one(self):
        recs = _records("u1", [(0, "a"), (3_599, "a")])
        a = presence_probability(recs, {"a"}, 0, 3_600, inter_cdr_time=60.0)
        assert a.probability == 1.0

    def test_always_present_resident_scores_zero(self):
        horizon = DEFAULT_HISTORY_DAYS * DAY
        recs = _records(
            "u1",
            [(-horizon, "a"), (-1, "a"), (10, "a"), (3_000, "a")],
        )
        a = presence_probability(recs, {"a"}, 0, 3_600, inter_cdr_time=600.0)
        assert a.habit_fraction == 1.0
        assert a.probability == 0.0

    def test_mid_range_hand_computed(self):
        # stay: (5400-1800+1800)/7200 = 0.75
        # habit: (86400+1800)/518400, then p = 0.75 * (1 - habit)
        recs = _records(
            "u1",
            [(-2 * DAY, "a"), (-DAY, "a"), (1_800, "a"), (5_400, "a")],
        )
        a = presence_probability(recs, {"a"}, 0, 7_200, inter_cdr_time=1_800.0)
        assert a.stay_fraction == pytest.approx(0.75, abs=1e-15)
        assert a.habit_fraction == pytest.approx(88_200 / 518_400, abs=1e-15)
        assert a.probability == pytest.approx(0.75 * (1 - 88_200 / 518_400), abs=1e-15)

    def test_non_area_records_do_not_count(self):
        recs = _records("u1", [(100, "b"), (1_000, "a"), (2_000, "b"), (3_000, "a")])
        a = presence_probability(recs, {"a"}, 0, 3_600, inter_cdr_time=100.0)
        assert (a.first_seen, a.last_seen) == (1_000, 3_000)

    def test_requires_area_record_in_window(self):
        recs = _records("u1", [(100, "b")])
        with pytest.raises(ValidationError, match="no area records"):
            presence_probability(recs, {"a"}, 0, 3_600)
        # an area record outside the window does not qualify either
        recs = _records("u1", [(9_999, "a")])
        with pytest.raises(ValidationError, match="no area records"):
            presence_probability(recs, {"a"}, 0, 3_600)

    def test_input_validation(self):
        with pytest.raises(ValidationError, match="no records"):
            presence_probability([], {"a"}, 0, 3_600)
        mixed = _records("u1", [(10, "a")]) + _records("u2", [(20, "a")])
        with pytest.raises(ValidationError, match="multiple users"):
            presence_probability(mixed, {"a"}, 0, 3_600)
        ok = _records("u1", [(10, "a")])
        with pytest.raises(ValidationError, match="empty window"):
            presence_probability(ok, {"a"}, 3_600, 3_600)
        with pytest.raises(ValidationError, match="history_days"):
            presence_probability(ok, {"a"}, 0, 3_600, history_days=0)

    def test_integer_codes_accepted(self):
        a = presence_from_arrays(
            "u1",
            np.array([100, 900]),
            np.array([3, 5]),
            np.array([5]),
            0,
            3_600,
            inter_cdr_time=60.0,
        )
        assert (a.first_seen, a.last_seen) == (900, 900)

    @given(
        st.lists(
            st.tuples(st.integers(-7 * DAY, 2 * DAY), st.sampled_from(["a", "b", "c"])),
            max_size=30,
        ),
        st.integers(0, 3_599),
        st.floats(1.0, 10_000.0),
        st.integers(1, 6),
    )
    @settings(max_examples=100)
    def test_probability_stays_in_unit_interval(self, trace, anchor_ts, iet, days):
        trace = sorted(trace + [(anchor_ts, "a")])
        recs = _records("u1", trace)
        a = presence_probability(recs, {"a", "b"}, 0, 3_600,
                                 history_days=days, inter_cdr_time=iet)
        assert_presence_in_unit_interval(a)

    @given(
        st.lists(st.integers(-6 * DAY, -1), min_size=1, max_size=10),
        st.floats(1.0, 5_000.0),
    )
    @settings(max_examples=100)
    def test_dropping_history_never_lowers_presence(self, history_ts, iet):
        during = [(600, "a"), (2_400, "a")]
        with_history = _records("u1", sorted([(t, "a") for t in history_ts] + during))
        without = _records("u1", during)
        p_with = presence_probability(with_history, {"a"}, 0, 3_600, inter_cdr_time=iet)
        p_without = presence_probability(without, {"a"}, 0, 3_600, inter_cdr_time=iet)
        assert p_without.probability >= p_with.probability


AREA_CELLS = [
    cell_at("a", 0.0, 0.0, 300.0),
    cell_at("b", 200.0, 0.0, 300.0),
    cell_at("out", 5_000.0, 0.0, 300.0),
]


class TestNaiveCount:
    def test_counts_users_in_fixed_circle(self):
        rows = [
            ("u1", 222, 100, "a"),
            ("u2", 222, 200, "b"),
            ("u3", 222, 300, "out"),
            ("u4", 222, 9_999, "a"),  # outside the window
        ]
        store = make_store(rows, AREA_CELLS)
        # default 100 m circle: cells a and b overlap it, "out" does not
        assert naive_count(store, AREA_CELLS, BASE, DEFAULT_NAIVE_RADIUS_M, 0, 1_000) == 2
        assert naive_count(store, AREA_CELLS, BASE, 5_000.0, 0, 1_000) == 3

    def test_rejects_empty_window(self):
        store = make_store([], AREA_CELLS)
        with pytest.raises(ValidationError):
            naive_count(store, AREA_CELLS, BASE, 100.0, 500, 500)


class TestEstimateRawAttendance:
    def _store(self):
        rows = [
            # u1: two area records during, history two days back, plus a
            # far-away record that only stretches its average gap
            ("u1", 222, -2 * DAY + 600, "a"),
            ("u1", 222, 600, "a"),
            ("u1", 222, 900, "out"),
            ("u1", 222, 2_400, "b"),
            # u2: single touch
            ("u2", 222, 1_200, "b"),
            # u3: never near the venue during the window
            ("u3", 222, 1_500, "out"),
            # u4: area records before the window only
            ("u4", 222, -500, "a"),
        ]
        return rows, make_store(rows, AREA_CELLS)

    def test_matches_per_user_assembly(self):
        rows, store = self._store()
        start, end = 0, 3_600
        raw = estimate_raw_attendance(store, AREA_CELLS, BASE, 100.0, start, end,
                                      event_id="ev")
        area_codes = store.cell_codes_for({"a", "b"})
        candidates = users_in_window(store, area_codes, start, end)
        hour_filter = hour_range_of_window(start, end)
        total = 0.0
        for code in candidates:
            ts_u, cells_u = store.user_slice(int(code))
            iet = avg_inter_cdr_time(ts_u, hour_filter)
            a = presence_from_arrays(
                str(store.user_labels[int(code)]), ts_u, cells_u, area_codes,
                start, end, inter_cdr_time=iet,
            )
            total += a.probability
        assert raw.event_id == "ev"
        assert raw.candidate_count == 2
        assert {a.user_id for a in raw.per_user} == {"u1", "u2"}
        assert raw.probability_sum == total  # same assembly, bit for bit

    def test_per_user_sorted_by_id(self):
        _, store = self._store()
        raw = estimate_raw_attendance(store, AREA_CELLS, BASE, 100.0, 0, 3_600)
        ids = [a.user_id for a in raw.per_user]
        assert ids == sorted(ids)

    def test_deterministic(self):
        _, store = self._store()
        r1 = estimate_raw_attendance(store, AREA_CELLS, BASE, 100.0, 0, 3_600)
        r2 = estimate_raw_attendance(store, AREA_CELLS, BASE, 100.0, 0, 3_600)
        assert r1.probability_sum == r2.probability_sum

    def test_no_candidates(self):
        _, store = self._store()
        # a radius so deep no cell qualifies
        raw = estimate_raw_attendance(store, AREA_CELLS, BASE, -301.0, 0, 3_600)
        assert raw.candidate_count == 0
        assert raw.probability_sum == 0.0
        assert raw.per_user == ()

    def test_sum_bounded_by_candidates(self):
        _, store = self._store()
        raw = estimate_raw_attendance(store, AREA_CELLS, BASE, 600.0, 0, 3_600)
        assert 0.0 <= raw.probability_sum <= raw.candidate_count
