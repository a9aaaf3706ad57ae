"""Core domain types: geographic points, cells, CDR rows, and event descriptions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class ValidationError(ValueError):
    """Raised when a domain value violates its invariants."""


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValidationError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class Cell:
    """One antenna sector, approximated as a circle around its tower."""

    cell_id: str
    center: GeoPoint
    coverage_radius: float  # meters

    def __post_init__(self) -> None:
        if not math.isfinite(self.coverage_radius) or self.coverage_radius <= 0:
            raise ValidationError(
                f"cell {self.cell_id!r}: coverage_radius must be > 0, got {self.coverage_radius}"
            )


@dataclass(frozen=True)
class CdrRecord:
    """A single network interaction: who, when, and through which cell.

    Timestamps are UTC epoch seconds. The cell_id must resolve against the
    cell catalog of the deployment the record belongs to; that check happens
    at ingestion, not here.
    """

    user_id: str
    mcc: int
    timestamp: int
    cell_id: str


STRUCTURED = "structured"
UNSTRUCTURED = "unstructured"


@dataclass(frozen=True)
class EventSpec:
    """A candidate event: where it happens, when, and what we know about size.

    ``ground_truth`` is the reported head count when one exists; unstructured
    events (open squares, parades) often have none and can only be estimated,
    never used to train the regression.
    """

    event_id: str
    venue_id: str
    center: GeoPoint
    scheduled_start: int  # UTC epoch seconds
    scheduled_end: int
    ground_truth: Optional[float] = None
    category: str = STRUCTURED

    def __post_init__(self) -> None:
        if self.scheduled_start >= self.scheduled_end:
            raise ValidationError(
                f"event {self.event_id!r}: start must precede end "
                f"({self.scheduled_start} >= {self.scheduled_end})"
            )
        if self.ground_truth is not None and self.ground_truth < 0:
            raise ValidationError(
                f"event {self.event_id!r}: ground_truth must be >= 0"
            )
        if self.category not in (STRUCTURED, UNSTRUCTURED):
            raise ValidationError(
                f"event {self.event_id!r}: unknown category {self.category!r}"
            )

    def padded(self, pad_seconds: int) -> "EventSpec":
        """Copy of this event with the window widened by ``pad_seconds`` on each side."""
        if pad_seconds < 0:
            raise ValidationError("pad_seconds must be >= 0")
        if pad_seconds == 0:
            return self
        return EventSpec(
            event_id=self.event_id,
            venue_id=self.venue_id,
            center=self.center,
            scheduled_start=self.scheduled_start - pad_seconds,
            scheduled_end=self.scheduled_end + pad_seconds,
            ground_truth=self.ground_truth,
            category=self.category,
        )
