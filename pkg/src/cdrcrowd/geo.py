"""Geographic distance and the cell-relevance predicate for event areas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .domain import Cell, GeoPoint, ValidationError

EARTH_RADIUS_M = 6_371_000.0


def distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle (haversine) distance in meters between two points."""
    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def distances_to(origin: GeoPoint, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Haversine distances in meters from ``origin`` to each (lat, lon) pair."""
    lat0 = math.radians(origin.lat)
    lon0 = math.radians(origin.lon)
    lat = np.radians(np.asarray(lats, dtype=np.float64))
    lon = np.radians(np.asarray(lons, dtype=np.float64))
    h = np.sin((lat - lat0) / 2.0) ** 2 + math.cos(lat0) * np.cos(lat) * np.sin((lon - lon0) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


@dataclass(frozen=True)
class EventArea:
    """A circle around an event's center.

    The radius may be negative: a cell is then relevant only when its
    coverage reaches past the center by at least ``|radius|`` meters.
    """

    center: GeoPoint
    radius: float  # meters

    def __post_init__(self) -> None:
        if not math.isfinite(self.radius):
            raise ValidationError(f"event-area radius must be finite, got {self.radius}")


def is_relevant(cell: Cell, area: EventArea) -> bool:
    """True when the cell's coverage circle overlaps the event area.

    Strict inequality: a cell at distance exactly ``radius + coverage_radius``
    is excluded.
    """
    return distance(area.center, cell.center) < area.radius + cell.coverage_radius


def relevant_cells(cells: Iterable[Cell], area: EventArea) -> set[str]:
    """Ids of the cells overlapping the event area. May be empty."""
    return {c.cell_id for c in cells if is_relevant(c, area)}


def relevant_cell_list(cells: Sequence[Cell], area: EventArea) -> list[Cell]:
    """Like :func:`relevant_cells` but returns the Cell objects, catalog order."""
    return [c for c in cells if is_relevant(c, area)]


def offset_point(base: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    """Point displaced by the given local east/north meters.

    Equirectangular approximation about the base latitude; plenty for
    laying out venues and cells at city scale.
    """
    dlat = north_m / EARTH_RADIUS_M
    dlon = east_m / (EARTH_RADIUS_M * math.cos(math.radians(base.lat)))
    return GeoPoint(base.lat + math.degrees(dlat), base.lon + math.degrees(dlon))
