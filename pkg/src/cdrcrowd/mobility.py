"""Per-user calling-activity and mobility statistics.

Inter-CDR times proxy how often a user's location gets sampled; the daily
hour filter restricts them to the hours an event occupies, since night gaps
would otherwise dominate. Radius of gyration summarizes how far a user's
recorded positions spread around their centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import GeoPoint
from .geo import EARTH_RADIUS_M
from .store import CdrStore

SECONDS_PER_DAY = 86_400

# Population prior for users with too few records to measure their own
# inter-CDR time: 64 minutes, the arithmetic average of per-user medians
# observed at event time over a large population.
DEFAULT_IET_FALLBACK_S = 64.0 * 60.0

# A daily hour range in seconds-of-day, half-open, possibly wrapping midnight.
HourRange = tuple[float, float]


@dataclass(frozen=True)
class InterCdrSummary:
    """Quartile summary of one duration distribution (same units as input;
    reporting layers pass minutes)."""

    q1: float
    median: float
    q3: float
    sample_count: int


def hour_range_of_window(t0: int, t1: int) -> Optional[HourRange]:
    """Daily hour range covered by the window, or None when it spans a full day."""
    if t1 <= t0:
        raise ValueError(f"bad window: {t0} >= {t1}")
    if t1 - t0 >= SECONDS_PER_DAY:
        return None
    return (float(t0 % SECONDS_PER_DAY), float(t1 % SECONDS_PER_DAY))


def in_hour_range(ts: np.ndarray, hour_range: Optional[HourRange]) -> np.ndarray:
    """Boolean mask of timestamps whose time-of-day falls inside the range."""
    ts = np.asarray(ts)
    if hour_range is None:
        return np.ones(ts.shape, dtype=bool)
    start, end = hour_range
    tod = ts % SECONDS_PER_DAY
    if start < end:
        return (tod >= start) & (tod < end)
    return (tod >= start) | (tod < end)  # wraps midnight


def inter_cdr_times(
    timestamps: np.ndarray, hour_filter: Optional[HourRange] = None
) -> np.ndarray:
    """Gaps (seconds) between consecutive records of one user.

    With a filter, a gap is kept only when both of its endpoints fall inside
    the daily hour range; the records stay consecutive in the full sequence,
    they are not re-paired after filtering. Fewer than two qualifying
    records yield an empty result.
    """
    ts = np.asarray(timestamps, dtype=np.float64)
    if ts.size < 2:
        return np.array([], dtype=np.float64)
    gaps = np.diff(ts)
    if hour_filter is None:
        return gaps
    ok = in_hour_range(ts, hour_filter)
    keep = ok[:-1] & ok[1:]
    return gaps[keep]


def avg_inter_cdr_time(
    timestamps: np.ndarray,
    hour_filter: Optional[HourRange] = None,
    fallback: float = DEFAULT_IET_FALLBACK_S,
) -> float:
    """Mean inter-CDR gap in seconds; ``fallback`` when no gap qualifies."""
    gaps = inter_cdr_times(timestamps, hour_filter)
    if gaps.size == 0:
        return float(fallback)
    return float(gaps.mean())


def quartile_summary(durations: Sequence[float] | np.ndarray) -> InterCdrSummary:
    """Linear-interpolation quartiles of a nonempty duration list."""
    arr = np.asarray(durations, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("quartile_summary requires a nonempty list")
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return InterCdrSummary(q1=float(q1), median=float(med), q3=float(q3), sample_count=int(arr.size))


def population_median_stats(
    per_user_medians: Sequence[float] | np.ndarray,
) -> tuple[float, Optional[float]]:
    """(arithmetic mean, geometric mean) of per-user median gaps.

    The geometric mean is None when any value is nonpositive; the arithmetic
    mean is still returned.
    """
    arr = np.asarray(per_user_medians, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("population_median_stats requires a nonempty list")
    arith = float(arr.mean())
    if np.any(arr <= 0):
        return arith, None
    return arith, float(np.exp(np.mean(np.log(arr))))


def _project_local(lat_deg: np.ndarray, lon_deg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Equirectangular projection (meters) about the points' mean latitude."""
    lat0 = math.radians(float(np.mean(lat_deg)))
    x = EARTH_RADIUS_M * np.radians(lon_deg) * math.cos(lat0)
    y = EARTH_RADIUS_M * np.radians(lat_deg)
    return x, y


def radius_of_gyration_latlon(lat_deg: np.ndarray, lon_deg: np.ndarray) -> float:
    """Root-mean-square deviation (meters) of positions from their centroid."""
    lat = np.asarray(lat_deg, dtype=np.float64)
    lon = np.asarray(lon_deg, dtype=np.float64)
    if lat.size == 0:
        raise ValueError("radius_of_gyration requires at least one position")
    x, y = _project_local(lat, lon)
    dx = x - x.mean()
    dy = y - y.mean()
    return float(np.sqrt(np.mean(dx * dx + dy * dy)))


def radius_of_gyration(positions: Sequence[GeoPoint]) -> float:
    """Radius of gyration of a position trace (meters)."""
    lat = np.array([p.lat for p in positions], dtype=np.float64)
    lon = np.array([p.lon for p in positions], dtype=np.float64)
    return radius_of_gyration_latlon(lat, lon)


def dataset_day_count(store: CdrStore) -> int:
    """Distinct UTC calendar days spanned by the store's records."""
    if store.record_count == 0:
        return 0
    lo, hi = store.time_span()
    return hi // SECONDS_PER_DAY - lo // SECONDS_PER_DAY + 1


def daily_cdr_percentiles(store: CdrStore, step: int = 5) -> dict[int, float]:
    """Percentiles of the per-user daily-average record count distribution."""
    if store.record_count == 0:
        raise ValueError("daily_cdr_percentiles requires a nonempty store")
    days = dataset_day_count(store)
    per_user = np.diff(store.user_starts).astype(np.float64) / days
    pcts = list(range(0, 101, step))
    values = np.percentile(per_user, pcts)
    return {p: float(v) for p, v in zip(pcts, values)}


def user_radii_of_gyration(store: CdrStore, cells: Sequence) -> np.ndarray:
    """Per-user radius of gyration (meters), using serving-cell centers as positions."""
    cell_lat = np.array([c.center.lat for c in cells], dtype=np.float64)
    cell_lon = np.array([c.center.lon for c in cells], dtype=np.float64)
    out = np.empty(store.n_users, dtype=np.float64)
    for u in range(store.n_users):
        a, b = int(store.user_starts[u]), int(store.user_starts[u + 1])
        codes = store.cell_code[a:b]
        out[u] = radius_of_gyration_latlon(cell_lat[codes], cell_lon[codes])
    return out
