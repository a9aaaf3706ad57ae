import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdrcrowd.domain import Cell, GeoPoint, ValidationError
from cdrcrowd.geo import (
    EventArea,
    distance,
    distances_to,
    is_relevant,
    offset_point,
    relevant_cell_list,
    relevant_cells,
)
from helpers import BASE, cell_at
from invariants import assert_relevance_monotone


def _reference_distance(a: GeoPoint, b: GeoPoint) -> float:
    """atan2 form of the great-circle distance, R = 6371 km."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dp = p2 - p1
    dl = math.radians(b.lon - a.lon)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 6_371_000.0 * 2 * math.atan2(math.sqrt(h), math.sqrt(1 - h))


class TestDistance:
    def test_pinned_values(self):
        # Values computed independently and frozen.
        assert distance(GeoPoint(45.0, 7.0), GeoPoint(45.0, 7.01)) == pytest.approx(
            786.2668661400527, abs=1e-6
        )
        assert distance(GeoPoint(45.0, 7.0), GeoPoint(45.1, 7.0)) == pytest.approx(
            11119.49266445589, abs=1e-6
        )

    def test_zero_for_identical_points(self):
        assert distance(BASE, BASE) == 0.0

    coords = st.tuples(
        st.floats(-60, 60), st.floats(-120, 120)
    ).map(lambda t: GeoPoint(*t))

    @given(coords, coords)
    def test_symmetric_and_nonnegative(self, a, b):
        d1, d2 = distance(a, b), distance(b, a)
        assert d1 >= 0.0
        assert d1 == pytest.approx(d2, abs=1e-9)

    @given(coords, coords, coords)
    def test_triangle_inequality(self, a, b, c):
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-6

    @given(coords, coords)
    def test_matches_reference_formula(self, a, b):
        assert distance(a, b) == pytest.approx(_reference_distance(a, b), abs=1e-6)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        lats = rng.uniform(44.5, 45.5, 40)
        lons = rng.uniform(6.5, 7.5, 40)
        got = distances_to(BASE, lats, lons)
        for i in range(40):
            assert got[i] == pytest.approx(
                distance(BASE, GeoPoint(lats[i], lons[i])), abs=1e-6
            )


class TestEventArea:
    def test_negative_radius_allowed(self):
        assert EventArea(BASE, -250.0).radius == -250.0

    def test_radius_must_be_finite(self):
        with pytest.raises(ValidationError):
            EventArea(BASE, float("nan"))
        with pytest.raises(ValidationError):
            EventArea(BASE, float("inf"))


class TestRelevance:
    def test_boundary_tie_excluded(self):
        # Cell tower on the venue itself: entry radius is exactly -coverage,
        # so the area radius equal to it must not admit the cell.
        c = Cell("tie", BASE, 100.0)
        assert not is_relevant(c, EventArea(BASE, -100.0))
        assert is_relevant(c, EventArea(BASE, -99.999))

    def test_negative_radius_selects_deep_overlap_only(self):
        # 400 m of coverage from 100 m away reaches 300 m past the center.
        deep = cell_at("deep", 100.0, 0.0, 400.0)
        shallow = cell_at("shallow", 300.0, 0.0, 350.0)  # reaches 50 m past
        cells = [deep, shallow]
        assert relevant_cells(cells, EventArea(BASE, -200.0)) == {"deep"}
        assert relevant_cells(cells, EventArea(BASE, -299.0)) == {"deep"}
        assert relevant_cells(cells, EventArea(BASE, -350.0)) == set()
        assert relevant_cells(cells, EventArea(BASE, 0.0)) == {"deep", "shallow"}

    def test_matches_brute_force_on_random_layouts(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            cells = [
                cell_at(f"c{i}", rng.uniform(-3000, 3000), rng.uniform(-3000, 3000),
                        rng.uniform(50, 800))
                for i in range(30)
            ]
            r = rng.uniform(-400, 1500)
            expected = {
                c.cell_id
                for c in cells
                if _reference_distance(BASE, c.center) < r + c.coverage_radius
            }
            assert relevant_cells(cells, EventArea(BASE, r)) == expected

    def test_cell_list_keeps_catalog_order(self):
        cells = [
            cell_at("far", 900.0, 0.0, 300.0),   # entry 600
            cell_at("near", 50.0, 0.0, 300.0),   # entry -250
            cell_at("mid", 400.0, 0.0, 300.0),   # entry 100
        ]
        kept = relevant_cell_list(cells, EventArea(BASE, 200.0))
        assert [c.cell_id for c in kept] == ["near", "mid"]

    @given(
        st.lists(
            st.tuples(st.floats(-5000, 5000), st.floats(-5000, 5000), st.floats(1, 900)),
            min_size=1, max_size=25,
        ),
        st.floats(-500, 1500),
        st.floats(-500, 1500),
    )
    def test_monotone_in_radius(self, layout, r1, r2):
        cells = [cell_at(f"c{i}", e, n, cov) for i, (e, n, cov) in enumerate(layout)]
        assert_relevance_monotone(cells, BASE, r1, r2)

    @given(
        st.floats(0, 2000), st.floats(1, 3000), st.floats(0, 1400),
    )
    def test_enclosing_cell_always_relevant(self, dist, margin, r):
        # Coverage strictly past the venue center keeps the cell in play
        # for every nonnegative area radius.
        c = cell_at("big", dist, 0.0, dist + margin)
        assert is_relevant(c, EventArea(BASE, r))


class TestOffsetPoint:
    def test_displacement_length(self):
        for east, north in [(500.0, 0.0), (0.0, -800.0), (300.0, 400.0)]:
            p = offset_point(BASE, east, north)
            assert distance(BASE, p) == pytest.approx(math.hypot(east, north), rel=5e-3)

    def test_roundtrip(self):
        p = offset_point(offset_point(BASE, 1234.0, -567.0), -1234.0, 567.0)
        assert distance(BASE, p) < 0.5
