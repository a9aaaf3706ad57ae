"""Per-user presence scoring and raw attendance over an event area.

Counting every SIM seen near a venue during an event badly overstates the
crowd: passers-by, residents, and people who left early all get counted
once each.  Instead each candidate gets a probability of genuine
attendance built from two fractions of their own trace, and the raw
attendance is the sum of those probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .domain import Cell, CdrRecord, GeoPoint, ValidationError
from .geo import EventArea, relevant_cells
from .mobility import DEFAULT_IET_FALLBACK_S, avg_inter_cdr_time, hour_range_of_window
from .store import CdrStore, count_users, users_in_window

SECONDS_PER_DAY = 86_400

# Days of history consulted for the frequent-visitor discount.
DEFAULT_HISTORY_DAYS = 6

# Radius of the crude fixed-circle headcount.
DEFAULT_NAIVE_RADIUS_M = 100.0


@dataclass(frozen=True)
class PresenceAssessment:
    """Presence evidence for one candidate at one event.

    stay_fraction estimates how much of the event the user was around
    for; habit_fraction estimates how much of ordinary life they spend
    in the same cells. The probability is the first discounted by the
    second, so a resident who is always there scores near zero even if
    they sat through the whole event.
    """

    user_id: str
    inter_cdr_time: float  # seconds; per-user mean gap or population fallback
    first_seen: int
    last_seen: int
    stay_fraction: float
    habit_fraction: float
    probability: float


@dataclass(frozen=True)
class RawAttendance:
    """Sum of presence probabilities over all candidates of one event."""

    event_id: str
    candidate_count: int
    probability_sum: float
    per_user: tuple[PresenceAssessment, ...]


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def naive_count(
    store: CdrStore,
    cells: Sequence[Cell],
    center: GeoPoint,
    fixed_radius: float = DEFAULT_NAIVE_RADIUS_M,
    start: int = 0,
    end: int = 0,
) -> int:
    """Distinct users seen within a fixed radius of the venue during the window.

    The crude headcount every refinement is judged against.
    """
    if end <= start:
        raise ValidationError(f"empty window [{start}, {end})")
    area = EventArea(center, fixed_radius)
    ids = relevant_cells(cells, area)
    codes = store.cell_codes_for(ids)
    return count_users(store, codes, start, end)


def presence_from_arrays(
    user_id: str,
    timestamps: np.ndarray,
    cell_keys: np.ndarray,
    area_keys: np.ndarray,
    start: int,
    end: int,
    history_days: int = DEFAULT_HISTORY_DAYS,
    inter_cdr_time: float = DEFAULT_IET_FALLBACK_S,
) -> PresenceAssessment:
    """Vectorized presence scoring over one user's parallel trace arrays.

    ``cell_keys``/``area_keys`` may be string ids or integer codes, as
    long as both use the same kind.  The stay fraction is the user's
    observed dwell span inside the area, stretched by one average
    inter-record gap (a record pins presence for about that long), over
    the window length.  The habit fraction is the same construction over
    the user's area records in the ``history_days`` days before the
    event, so regulars get discounted.  Requires at least one area
    record inside the window.
    """
    if end <= start:
        raise ValidationError(f"empty window [{start}, {end})")
    if history_days < 1:
        raise ValidationError("history_days must be at least 1")
    ts = np.asarray(timestamps, dtype=np.int64)
    in_area = np.isin(np.asarray(cell_keys), np.asarray(area_keys))

    during = in_area & (ts >= start) & (ts < end)
    if not during.any():
        raise ValidationError(f"user {user_id!r} has no area records in the window")
    ts_during = ts[during]
    first = int(ts_during.min())
    last = int(ts_during.max())
    stay = _clamp01(abs(last - first + inter_cdr_time) / (end - start))

    horizon = history_days * SECONDS_PER_DAY
    before = in_area & (ts >= start - horizon) & (ts < start)
    if before.any():
        ts_before = ts[before]
        span = abs(int(ts_before.max()) - int(ts_before.min()) + inter_cdr_time)
        habit = _clamp01(span / horizon)
    else:
        habit = 0.0

    return PresenceAssessment(
        user_id=user_id,
        inter_cdr_time=float(inter_cdr_time),
        first_seen=first,
        last_seen=last,
        stay_fraction=stay,
        habit_fraction=habit,
        probability=stay * (1.0 - habit),
    )


def presence_probability(
    user_records: Sequence[CdrRecord],
    cells_in_area: Iterable[str],
    start: int,
    end: int,
    history_days: int = DEFAULT_HISTORY_DAYS,
    inter_cdr_time: float = DEFAULT_IET_FALLBACK_S,
) -> PresenceAssessment:
    """Score one user's record list against an event area and window.

    Record-list face of :func:`presence_from_arrays`; all records must
    belong to one user and be time-ordered.
    """
    if not user_records:
        raise ValidationError("no records for user")
    ids = {r.user_id for r in user_records}
    if len(ids) != 1:
        raise ValidationError(f"records span multiple users: {sorted(ids)}")
    ts = np.array([r.timestamp for r in user_records], dtype=np.int64)
    keys = np.array([r.cell_id for r in user_records], dtype=object)
    area = np.array(sorted(set(cells_in_area)), dtype=object)
    return presence_from_arrays(
        user_id=user_records[0].user_id,
        timestamps=ts,
        cell_keys=keys,
        area_keys=area,
        start=start,
        end=end,
        history_days=history_days,
        inter_cdr_time=inter_cdr_time,
    )


def estimate_raw_attendance(
    store: CdrStore,
    cells: Sequence[Cell],
    center: GeoPoint,
    area_radius: float,
    start: int,
    end: int,
    event_id: str = "",
    history_days: int = DEFAULT_HISTORY_DAYS,
    iet_fallback: float = DEFAULT_IET_FALLBACK_S,
) -> RawAttendance:
    """Raw (uncalibrated) attendance for one event window.

    Candidates are the users with any record in the area during the
    (padded) window.  Each is scored by :func:`presence_from_arrays`
    with their personal mean inter-record gap, computed over their full
    trace restricted to the event's daily hours; users too quiet to
    yield a gap fall back to ``iet_fallback``.  Candidates are processed
    in user-id order, so the result is independent of input record
    order.
    """
    area = EventArea(center, area_radius)
    ids = relevant_cells(cells, area)
    area_codes = store.cell_codes_for(ids)
    candidates = users_in_window(store, area_codes, start, end)

    hour_filter = hour_range_of_window(start, end)
    per_user = []
    total = 0.0
    for code in candidates:  # sorted codes; code order matches id order
        ts_u, cells_u = store.user_slice(int(code))
        iet = avg_inter_cdr_time(ts_u, hour_filter, fallback=iet_fallback)
        a = presence_from_arrays(
            user_id=str(store.user_labels[int(code)]),
            timestamps=ts_u,
            cell_keys=cells_u,
            area_keys=area_codes,
            start=start,
            end=end,
            history_days=history_days,
            inter_cdr_time=iet,
        )
        per_user.append(a)
        total += a.probability

    return RawAttendance(
        event_id=event_id,
        candidate_count=int(candidates.size),
        probability_sum=float(total),
        per_user=tuple(per_user),
    )
