import dataclasses

import pytest

from cdrcrowd.domain import (
    STRUCTURED,
    UNSTRUCTURED,
    CdrRecord,
    Cell,
    EventSpec,
    GeoPoint,
    ValidationError,
)


class TestGeoPoint:
    def test_accepts_valid_coordinates(self):
        p = GeoPoint(45.07, 7.68)
        assert (p.lat, p.lon) == (45.07, 7.68)

    @pytest.mark.parametrize("lat,lon", [
        (90.1, 0.0), (-91.0, 0.0), (0.0, 180.5), (0.0, -181.0),
        (float("nan"), 0.0), (0.0, float("inf")),
    ])
    def test_rejects_out_of_range(self, lat, lon):
        with pytest.raises(ValidationError):
            GeoPoint(lat, lon)

    def test_is_frozen(self):
        p = GeoPoint(1.0, 2.0)
        with pytest.raises(dataclasses.FrozenInstanceError):
            p.lat = 3.0


class TestCell:
    def test_requires_positive_coverage(self):
        center = GeoPoint(45.0, 7.0)
        for bad in (0.0, -10.0, float("nan")):
            with pytest.raises(ValidationError):
                Cell("c1", center, bad)
        assert Cell("c1", center, 150.0).coverage_radius == 150.0


def test_cdr_record_holds_fields():
    r = CdrRecord("u1", 222, 1_296_000_000, "c9")
    assert r.user_id == "u1"
    assert r.cell_id == "c9"


class TestEventSpec:
    def _spec(self, **kw):
        base = dict(
            event_id="e1",
            venue_id="v1",
            center=GeoPoint(45.0, 7.0),
            scheduled_start=1000,
            scheduled_end=2000,
        )
        base.update(kw)
        return EventSpec(**base)

    def test_start_must_precede_end(self):
        with pytest.raises(ValidationError):
            self._spec(scheduled_start=2000, scheduled_end=2000)
        with pytest.raises(ValidationError):
            self._spec(scheduled_start=3000, scheduled_end=2000)

    def test_ground_truth_nonnegative(self):
        with pytest.raises(ValidationError):
            self._spec(ground_truth=-1.0)
        assert self._spec(ground_truth=0.0).ground_truth == 0.0
        assert self._spec().ground_truth is None

    def test_category_checked(self):
        with pytest.raises(ValidationError):
            self._spec(category="parade")
        assert self._spec(category=UNSTRUCTURED).category == UNSTRUCTURED
        assert self._spec().category == STRUCTURED

    def test_padded_widens_both_sides(self):
        ev = self._spec(ground_truth=500.0, category=UNSTRUCTURED)
        p = ev.padded(300)
        assert (p.scheduled_start, p.scheduled_end) == (700, 2300)
        # everything else carries over
        assert p.event_id == ev.event_id
        assert p.ground_truth == ev.ground_truth
        assert p.category == ev.category
        assert p.center == ev.center

    def test_padded_zero_is_identity(self):
        ev = self._spec()
        assert ev.padded(0) is ev

    def test_padded_rejects_negative(self):
        with pytest.raises(ValidationError):
            self._spec().padded(-1)
