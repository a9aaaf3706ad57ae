"""Event-area radius estimation from anomalous activity profiles.

The venue itself is a point; the picture of how far the crowd spreads
comes from sweeping a grid of candidate radii around it and scoring each
one by how unusual the distinct-visitor count looks against recent
history.  Two estimators then collapse a sweep into a single radius:
one works from a lone event window, the other votes across several past
events at the same venue.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import Cell, EventSpec, GeoPoint, ValidationError
from .geo import distances_to
from .store import CdrStore, count_users

SECONDS_PER_DAY = 86_400


class NoEventSignal(RuntimeError):
    """Raised when no radius shows a usable positive anomaly."""


@dataclass(frozen=True)
class SweepConfig:
    """Grid and baseline settings for the radius sweep.

    Negative candidate radii are meaningful: they demand that a cell's
    coverage disc reach *past* the venue center by |r| meters before it
    counts as relevant, which selects only cells tightly focused on the
    venue.
    """

    r_min: float = -500.0
    r_max: float = 1500.0
    step: float = 100.0
    lookback_days: int = 6
    z_threshold: float = 3.0

    def __post_init__(self) -> None:
        if not (self.r_min < self.r_max):
            raise ValidationError(f"r_min {self.r_min} must be below r_max {self.r_max}")
        if self.step <= 0:
            raise ValidationError(f"step must be positive, got {self.step}")
        if self.lookback_days < 1:
            raise ValidationError("lookback_days must be at least 1")

    def radii(self) -> np.ndarray:
        # Inclusive of r_max when the grid lands on it exactly.
        return np.arange(self.r_min, self.r_max + 0.5 * self.step, self.step, dtype=float)


@dataclass(frozen=True)
class RadiusProfile:
    """Anomaly measurements for one candidate radius.

    z_score and normalized_z are None when undefined: a flat baseline
    (zero standard deviation) gives no yardstick, and zero total
    coverage leaves nothing to normalize by.
    """

    radius_m: float
    user_count: int
    baseline_mean: float
    baseline_std: float
    z_score: Optional[float]
    normalized_z: Optional[float]
    cell_count: int
    coverage_sum: float
    detected_events: int = 0


def _entry_radii(cells: Sequence[Cell], center: GeoPoint) -> np.ndarray:
    """Distance from center to each cell minus its coverage radius.

    A cell is relevant at candidate radius r exactly when its entry
    radius is strictly below r, so one distance pass serves the whole
    sweep.
    """
    lats = np.array([c.center.lat for c in cells], dtype=float)
    lons = np.array([c.center.lon for c in cells], dtype=float)
    dist = distances_to(center, lats, lons)
    cov = np.array([c.coverage_radius for c in cells], dtype=float)
    return dist - cov


def z_scores_by_radius(
    store: CdrStore,
    cells: Sequence[Cell],
    center: GeoPoint,
    start: int,
    end: int,
    config: SweepConfig = SweepConfig(),
) -> list[RadiusProfile]:
    """Sweep candidate radii and score each against day-shifted baselines.

    For each radius the distinct-user count over [start, end) is compared
    with the counts over the same clock window on each of the preceding
    ``lookback_days`` days, via a z-score with sample standard deviation.
    Callers pass the already padded event window.
    """
    if start >= end:
        raise ValidationError(f"empty window [{start}, {end})")
    entry = _entry_radii(cells, center)
    coverage = np.array([c.coverage_radius for c in cells], dtype=float)
    code_of = {cid: i for i, cid in enumerate(store.cell_labels)}
    aligned = np.array(
        [code_of.get(c.cell_id, -1) for c in cells], dtype=np.int32
    )

    profiles: list[RadiusProfile] = []
    for r in config.radii():
        mask = entry < r
        n_cells = int(mask.sum())
        cov_sum = float(coverage[mask].sum())
        codes = aligned[mask]
        codes = codes[codes >= 0]

        x = count_users(store, codes, start, end)
        baseline = np.array(
            [
                count_users(
                    store,
                    codes,
                    start - i * SECONDS_PER_DAY,
                    end - i * SECONDS_PER_DAY,
                )
                for i in range(1, config.lookback_days + 1)
            ],
            dtype=float,
        )
        mean = float(baseline.mean())
        std = float(baseline.std(ddof=1)) if baseline.size > 1 else 0.0

        z: Optional[float] = None
        zhat: Optional[float] = None
        if n_cells > 0 and std > 0.0:
            z = (x - mean) / std
            if cov_sum > 0.0:
                zhat = z / cov_sum
        profiles.append(
            RadiusProfile(
                radius_m=float(r),
                user_count=x,
                baseline_mean=mean,
                baseline_std=std,
                z_score=z,
                normalized_z=zhat,
                cell_count=n_cells,
                coverage_sum=cov_sum,
            )
        )
    return profiles


def best_radius_single(profiles: Sequence[RadiusProfile]) -> float:
    """Collapse one sweep into a radius estimate.

    Normalizing each z-score by the total coverage in play removes the
    advantage bigger areas get from simply containing more cells; the
    estimate is then the coverage-normalized-score weighted mean of the
    candidate radii. Radii where the anomaly is negative or undefined
    carry no weight.
    """
    if not profiles:
        raise ValidationError("empty radius sweep")
    radii = []
    weights = []
    for p in profiles:
        if p.normalized_z is None:
            continue
        radii.append(p.radius_m)
        weights.append(max(p.normalized_z, 0.0))
    total = sum(weights)
    if total <= 0.0:
        raise NoEventSignal(
            "no event signal: no radius shows a positive coverage-normalized anomaly"
        )
    return sum(r * w for r, w in zip(radii, weights)) / total


def detection_counts(
    store: CdrStore,
    cells: Sequence[Cell],
    center: GeoPoint,
    training_windows: Sequence[tuple[int, int]],
    config: SweepConfig = SweepConfig(),
) -> list[RadiusProfile]:
    """Sweep each training window and count detections per radius.

    A window counts as detected at radius r when its z-score there is
    defined and above ``config.z_threshold``. Returns one profile per
    radius carrying the detection tally; the per-window score fields hold
    the last window's values and are diagnostic only.
    """
    if not training_windows:
        raise ValidationError("need at least one training window")
    tallies: Optional[list[RadiusProfile]] = None
    counts = np.zeros(len(config.radii()), dtype=int)
    for start, end in training_windows:
        sweep = z_scores_by_radius(store, cells, center, start, end, config)
        for i, p in enumerate(sweep):
            if p.z_score is not None and p.z_score > config.z_threshold:
                counts[i] += 1
        tallies = sweep
    assert tallies is not None
    return [
        RadiusProfile(
            radius_m=p.radius_m,
            user_count=p.user_count,
            baseline_mean=p.baseline_mean,
            baseline_std=p.baseline_std,
            z_score=p.z_score,
            normalized_z=p.normalized_z,
            cell_count=p.cell_count,
            coverage_sum=p.coverage_sum,
            detected_events=int(counts[i]),
        )
        for i, p in enumerate(tallies)
    ]


def best_radius_multi(
    store: CdrStore,
    cells: Sequence[Cell],
    center: GeoPoint,
    training_events: Sequence[EventSpec],
    config: SweepConfig = SweepConfig(),
    pad_seconds: int = 0,
) -> float:
    """Radius estimate from several past events at the same venue.

    Each radius is weighted by how many training events light it up
    (z-score above the detection threshold); the estimate is the
    detection-weighted mean radius. The venue's own history votes, so a
    radius only matters if it repeatedly shows a crowd.
    """
    if not training_events:
        raise ValidationError("need at least one training event")
    windows = []
    for ev in training_events:
        padded = ev.padded(pad_seconds) if pad_seconds else ev
        windows.append((padded.scheduled_start, padded.scheduled_end))
    profiles = detection_counts(store, cells, center, windows, config)
    total = sum(p.detected_events for p in profiles)
    if total == 0:
        raise NoEventSignal(
            "no event signal: no training event exceeded the detection threshold "
            "at any radius"
        )
    return sum(p.radius_m * p.detected_events for p in profiles) / total
