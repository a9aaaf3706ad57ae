"""Synthetic city generator with plantable events and known ground truth.

Real network data cannot ship with the toolkit, so validation runs
against a generated city instead: a cell deployment, a resident
population emitting records day after day, and events whose true
attendance is chosen by the test rather than estimated.  The generator
is deliberately boring where the estimators need it to be boring
(background behavior repeats day over day, so baselines mean something)
and adversarial where reality is adversarial (dense downtown activity
sitting right on top of a venue).

Determinism contract: a city built from the same config and the same
sequence of mutation calls is byte-identical.  Every mutation derives a
fresh child generator from (rng_seed, cursor), so inserting a call
changes only the streams created after it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .domain import STRUCTURED, Cell, EventSpec, GeoPoint, ValidationError
from .geo import EARTH_RADIUS_M, distances_to
from .store import CdrStore, build_store

SECONDS_PER_DAY = 86_400
METERS_PER_DEG_LAT = math.pi * EARTH_RADIUS_M / 180.0

# Sanity bounds for planted venue extents; mirrors the default sweep grid.
EXTENT_BOUNDS_M = (-500.0, 1500.0)


@dataclass(frozen=True)
class UsageModel:
    """Per-user phone-usage distribution.

    Daily record counts are Poisson around a per-user rate drawn
    lognormally (median ``median_daily_rate``); records land mostly in
    ``day_hours`` with ``day_share`` of the mass.
    """

    median_daily_rate: float = 2.5
    rate_sigma: float = 0.6
    day_share: float = 0.85
    day_hours: tuple[int, int] = (8, 23)

    def __post_init__(self) -> None:
        if self.median_daily_rate <= 0:
            raise ValidationError("median_daily_rate must be positive")
        if self.rate_sigma < 0:
            raise ValidationError("rate_sigma must be nonnegative")
        if not (0.0 < self.day_share <= 1.0):
            raise ValidationError("day_share must be in (0, 1]")
        h0, h1 = self.day_hours
        if not (0 <= h0 < h1 <= 24):
            raise ValidationError(f"bad day_hours {self.day_hours}")

    def hour_weights(self) -> np.ndarray:
        h0, h1 = self.day_hours
        n_day = h1 - h0
        p = np.full(24, (1.0 - self.day_share) / max(24 - n_day, 1))
        p[h0:h1] = self.day_share / n_day
        return p / p.sum()


@dataclass(frozen=True)
class CityConfig:
    """Knobs of the synthetic city.

    population counts only users observable in the data; carrier_share
    enters when events are planted (attendee head counts are thinned by
    it, background residents are all assumed observed).  Per-(zone, day)
    activity multipliers make day-to-day counts wobble coherently inside
    a zone, which is what gives baseline standard deviations realistic
    area scaling.
    """

    lat_min: float = 45.00
    lat_max: float = 45.14
    lon_min: float = 7.58
    lon_max: float = 7.78
    cell_count: int = 300
    coverage_radius_m: tuple[float, float] = (150.0, 600.0)
    population: int = 20_000
    carrier_share: float = 0.3
    usage: UsageModel = field(default_factory=UsageModel)
    rng_seed: int = 0
    start_epoch: int = 1_296_000_000  # day-aligned UTC
    n_days: int = 14
    core_fraction: float = 0.55
    core_sigma_m: float = 1_500.0
    commuter_fraction: float = 0.35
    work_hours: tuple[int, int] = (9, 18)
    errand_prob: float = 0.04
    zone_size_m: float = 1_500.0
    zone_day_cv: float = 0.05
    mcc: int = 222

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValidationError("empty bounding box")
        if self.cell_count <= 0:
            raise ValidationError("cell_count must be positive")
        lo, hi = self.coverage_radius_m
        if not (0 < lo <= hi):
            raise ValidationError(f"bad coverage radius range {self.coverage_radius_m}")
        if self.population < 0:
            raise ValidationError("population must be nonnegative")
        if not (0.0 < self.carrier_share <= 1.0):
            raise ValidationError("carrier_share must be in (0, 1]")
        if self.n_days < 1:
            raise ValidationError("n_days must be at least 1")
        if self.start_epoch % SECONDS_PER_DAY != 0:
            raise ValidationError("start_epoch must be day-aligned (multiple of 86400)")
        if not (0.0 <= self.core_fraction <= 1.0):
            raise ValidationError("core_fraction must be in [0, 1]")
        if not (0.0 <= self.commuter_fraction <= 1.0):
            raise ValidationError("commuter_fraction must be in [0, 1]")
        if not (0.0 <= self.errand_prob < 1.0):
            raise ValidationError("errand_prob must be in [0, 1)")
        if self.zone_size_m <= 0 or self.zone_day_cv < 0:
            raise ValidationError("bad zone parameters")

    @property
    def end_epoch(self) -> int:
        return self.start_epoch + self.n_days * SECONDS_PER_DAY

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(
            (self.lat_min + self.lat_max) / 2.0, (self.lon_min + self.lon_max) / 2.0
        )


@dataclass(frozen=True)
class PlantedEvent:
    """An event injected with a known crowd.

    extent_m is the effective venue radius the estimators should
    recover: attendees are served only by cells overlapping the venue
    center by more than -extent_m (the same predicate the sweep uses).
    Attendee cell choice is biased outward within that set
    (spill_exponent), reflecting inner cells saturating first and
    pushing connections to the edge of the area.
    """

    event_id: str
    venue_id: str
    center: GeoPoint
    extent_m: float
    start: int
    end: int
    true_attendance: int
    usage_multiplier: float = 1.0
    confounder: bool = False
    category: str = STRUCTURED
    report_truth: bool = True
    arrive_before_s: int = 1_800
    linger_after_s: int = 1_800
    cdr_rate_per_hour: float = 0.5
    spill_exponent: float = 2.0
    spill_offset_m: float = 100.0
    # Restrict attendees to these cells instead of every cell overlapping
    # the venue; each must still satisfy the extent predicate.
    attendee_cells: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.true_attendance < 0:
            raise ValidationError("true_attendance must be nonnegative")
        lo, hi = EXTENT_BOUNDS_M
        if not (lo <= self.extent_m <= hi):
            raise ValidationError(
                f"extent {self.extent_m} outside plausible bounds [{lo}, {hi}]"
            )
        if self.start >= self.end:
            raise ValidationError("event must have positive duration")
        if self.arrive_before_s < 0 or self.linger_after_s < 0:
            raise ValidationError("arrive/linger must be nonnegative")
        if self.cdr_rate_per_hour <= 0 or self.usage_multiplier <= 0:
            raise ValidationError("attendee usage rates must be positive")

    def to_spec(self) -> EventSpec:
        return EventSpec(
            event_id=self.event_id,
            venue_id=self.venue_id,
            center=self.center,
            scheduled_start=self.start,
            scheduled_end=self.end,
            ground_truth=float(self.true_attendance) if self.report_truth else None,
            category=self.category,
        )


@dataclass(frozen=True)
class StreamBlock:
    """One batch of generated records: a user-label table plus rows."""

    user_ids: np.ndarray  # object array of labels local to this block
    user_row: np.ndarray  # int64 index into user_ids, one per record
    ts: np.ndarray  # int64 epoch seconds
    cell_idx: np.ndarray  # int32 index into the city's cell tuple

    @property
    def record_count(self) -> int:
        return int(self.ts.shape[0])


@dataclass(frozen=True)
class SyntheticCity:
    """Immutable city state: cells, record blocks, planted events."""

    config: CityConfig
    cells: tuple[Cell, ...]
    blocks: tuple[StreamBlock, ...]
    events: tuple[EventSpec, ...] = ()
    planted: tuple[PlantedEvent, ...] = ()
    rng_cursor: int = 1

    @property
    def record_count(self) -> int:
        return sum(b.record_count for b in self.blocks)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(user_id, ts, cell_id) over all blocks, ordered by (ts, user, cell).

        The ordering makes serialized output independent of block
        structure, so replanting the same events yields identical files.
        """
        if not self.blocks:
            empty_o = np.array([], dtype=object)
            return empty_o, np.array([], dtype=np.int64), empty_o.copy()
        users = np.concatenate([b.user_ids[b.user_row] for b in self.blocks])
        ts = np.concatenate([b.ts for b in self.blocks])
        cell_labels = np.array([c.cell_id for c in self.cells], dtype=object)
        cell_ids = cell_labels[np.concatenate([b.cell_idx for b in self.blocks])]
        order = np.lexsort((cell_ids, users, ts))
        return users[order], ts[order], cell_ids[order]

    def to_store(self) -> CdrStore:
        user_ids, ts, cell_ids = self.arrays()
        mcc = np.full(ts.shape, self.config.mcc, dtype=np.int16)
        return build_store(user_ids, mcc, ts, cell_ids, list(self.cells))

    def _child_rng(self) -> np.random.Generator:
        return np.random.default_rng([self.config.rng_seed, self.rng_cursor])


def _meters_per_deg_lon(lat: float) -> float:
    return METERS_PER_DEG_LAT * math.cos(math.radians(lat))


def _zone_of_cells(cfg: CityConfig, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Grid-zone index per cell; zones share a daily activity multiplier."""
    m_lat = METERS_PER_DEG_LAT
    m_lon = _meters_per_deg_lon((cfg.lat_min + cfg.lat_max) / 2.0)
    iy = np.floor((lats - cfg.lat_min) * m_lat / cfg.zone_size_m).astype(np.int64)
    ix = np.floor((lons - cfg.lon_min) * m_lon / cfg.zone_size_m).astype(np.int64)
    nx = int((cfg.lon_max - cfg.lon_min) * m_lon / cfg.zone_size_m) + 2
    return (iy * nx + ix).astype(np.int64)


def _zone_day_factors(
    cfg: CityConfig, rng: np.random.Generator, zone_ids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(per-cell zone row index, factor matrix [n_zones, n_days]).

    Factors are lognormal with mean 1, drawn once per (zone, day); all
    users homed in a zone breathe together, which keeps day-to-day count
    variance proportional to area activity rather than its square root.
    """
    unique_zones, zone_row = np.unique(zone_ids, return_inverse=True)
    cv = cfg.zone_day_cv
    if cv == 0.0:
        factors = np.ones((unique_zones.size, cfg.n_days))
    else:
        sigma = math.sqrt(math.log(1.0 + cv * cv))
        factors = rng.lognormal(
            mean=-0.5 * sigma * sigma,
            sigma=sigma,
            size=(unique_zones.size, cfg.n_days),
        )
    return zone_row.astype(np.int64), factors


def _emit_stream(
    rng: np.random.Generator,
    cfg: CityConfig,
    home_cell: np.ndarray,
    work_cell: np.ndarray,
    daily_rate: np.ndarray,
    cell_zone_row: np.ndarray,
    zone_factors: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate (user_row, ts, cell_idx) for one user block over all days.

    Each user's day count is Poisson(rate x home-zone day factor);
    records get an hour from the usage model's day/night weights, a
    uniform offset within the hour, and a serving cell: home by default,
    the work cell during work hours for commuters, or a random cell for
    the occasional errand.
    """
    n_users = home_cell.shape[0]
    n_cells = cell_zone_row.shape[0]
    hour_p = cfg.usage.hour_weights()
    h0, h1 = cfg.work_hours
    out_user: list[np.ndarray] = []
    out_ts: list[np.ndarray] = []
    out_cell: list[np.ndarray] = []
    if n_users == 0:
        return (
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int32),
        )
    user_zone = cell_zone_row[home_cell]
    for day in range(cfg.n_days):
        lam = daily_rate * zone_factors[user_zone, day]
        counts = rng.poisson(lam)
        m = int(counts.sum())
        if m == 0:
            continue
        urow = np.repeat(np.arange(n_users, dtype=np.int64), counts)
        hour = rng.choice(24, size=m, p=hour_p)
        sec = (rng.random(m) * 3600.0).astype(np.int64)
        ts = cfg.start_epoch + day * SECONDS_PER_DAY + hour * 3600 + sec
        cell = home_cell[urow].astype(np.int32, copy=True)
        at_work = (work_cell[urow] >= 0) & (hour >= h0) & (hour < h1)
        cell[at_work] = work_cell[urow][at_work]
        if cfg.errand_prob > 0.0:
            errand = rng.random(m) < cfg.errand_prob
            n_err = int(errand.sum())
            if n_err:
                cell[errand] = rng.integers(0, n_cells, n_err, dtype=np.int32)
        out_user.append(urow)
        out_ts.append(ts.astype(np.int64))
        out_cell.append(cell)
    if not out_user:
        return (
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int32),
        )
    return (
        np.concatenate(out_user),
        np.concatenate(out_ts),
        np.concatenate(out_cell),
    )


def _place_cells(cfg: CityConfig, rng: np.random.Generator) -> tuple[Cell, ...]:
    """Lay out the deployment: a dense small-cell core plus uniform suburbs."""
    n_core = int(round(cfg.core_fraction * cfg.cell_count))
    n_sub = cfg.cell_count - n_core
    lat_c, lon_c = cfg.center.lat, cfg.center.lon
    sd_lat = cfg.core_sigma_m / METERS_PER_DEG_LAT
    sd_lon = cfg.core_sigma_m / _meters_per_deg_lon(lat_c)

    core_lat = np.clip(rng.normal(lat_c, sd_lat, n_core), cfg.lat_min, cfg.lat_max)
    core_lon = np.clip(rng.normal(lon_c, sd_lon, n_core), cfg.lon_min, cfg.lon_max)
    sub_lat = rng.uniform(cfg.lat_min, cfg.lat_max, n_sub)
    sub_lon = rng.uniform(cfg.lon_min, cfg.lon_max, n_sub)

    lo, hi = cfg.coverage_radius_m
    span = hi - lo
    core_r = rng.uniform(lo, lo + 0.45 * span if span else hi, n_core)
    sub_r = rng.uniform(lo + 0.25 * span, hi, n_sub)

    lats = np.concatenate([core_lat, sub_lat])
    lons = np.concatenate([core_lon, sub_lon])
    radii = np.concatenate([core_r, sub_r])
    return tuple(
        Cell(f"c{i:04d}", GeoPoint(float(lats[i]), float(lons[i])), float(radii[i]))
        for i in range(cfg.cell_count)
    )


def generate_city(
    cfg: CityConfig, extra_cells: Sequence[Cell] = ()
) -> SyntheticCity:
    """Build the deployment and the background population's full stream.

    ``extra_cells`` lets scenarios plant engineered venue cells (ids must
    not collide with the generated ``cNNNN`` ones); residents may be
    homed in them like in any other cell.
    """
    rng = np.random.default_rng([cfg.rng_seed, 0])
    cells = _place_cells(cfg, rng) + tuple(extra_cells)
    ids = [c.cell_id for c in cells]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate cell ids between generated and extra cells")

    lats = np.array([c.center.lat for c in cells])
    lons = np.array([c.center.lon for c in cells])
    zone_ids = _zone_of_cells(cfg, lats, lons)
    zone_row, zone_factors = _zone_day_factors(cfg, rng, zone_ids)

    n = cfg.population
    home = rng.integers(0, len(cells), n, dtype=np.int32)
    work = np.full(n, -1, dtype=np.int32)
    commuters = rng.random(n) < cfg.commuter_fraction
    n_com = int(commuters.sum())
    if n_com:
        # Jobs concentrate in the core half of the deployment.
        n_core = max(int(round(cfg.core_fraction * cfg.cell_count)), 1)
        work[commuters] = rng.integers(0, n_core, n_com, dtype=np.int32)
    mu = math.log(cfg.usage.median_daily_rate)
    rates = rng.lognormal(mean=mu, sigma=cfg.usage.rate_sigma, size=n)

    urow, ts, cell_idx = _emit_stream(
        rng, cfg, home, work, rates, zone_row, zone_factors
    )
    labels = np.array([f"u{i:06d}" for i in range(n)], dtype=object)
    block = StreamBlock(user_ids=labels, user_row=urow, ts=ts, cell_idx=cell_idx)
    return SyntheticCity(config=cfg, cells=cells, blocks=(block,), rng_cursor=1)


def add_activity_cluster(
    city: SyntheticCity,
    center: GeoPoint,
    user_count: int,
    daily_rate: float,
    band_m: tuple[float, float] = (0.0, 500.0),
    rate_sigma: float = 0.3,
    label_prefix: str = "x",
    cell_ids: Optional[Sequence[str]] = None,
) -> SyntheticCity:
    """Home extra always-there users on the cells in a ring around a point.

    The standard confounder: dense everyday activity that a naive
    headcount mistakes for a crowd. ``band_m`` selects the home cells by
    distance from ``center`` (inclusive lower, exclusive upper bound);
    ``cell_ids`` pins the home cells explicitly instead.
    """
    if user_count <= 0:
        raise ValidationError("user_count must be positive")
    if daily_rate <= 0:
        raise ValidationError("daily_rate must be positive")
    cfg = city.config
    lats = np.array([c.center.lat for c in city.cells])
    lons = np.array([c.center.lon for c in city.cells])
    if cell_ids is not None:
        index = {c.cell_id: i for i, c in enumerate(city.cells)}
        missing = [cid for cid in cell_ids if cid not in index]
        if missing:
            raise ValidationError(f"unknown cluster cells: {missing}")
        eligible = np.array(sorted(index[cid] for cid in set(cell_ids)), dtype=np.int64)
    else:
        dist = distances_to(center, lats, lons)
        eligible = np.flatnonzero((dist >= band_m[0]) & (dist < band_m[1]))
    if eligible.size == 0:
        raise ValidationError(f"no cells within {band_m} m of {center}")

    rng = city._child_rng()
    zone_ids = _zone_of_cells(cfg, lats, lons)
    zone_row, zone_factors = _zone_day_factors(cfg, rng, zone_ids)
    home = eligible[rng.integers(0, eligible.size, user_count)].astype(np.int32)
    work = np.full(user_count, -1, dtype=np.int32)
    rates = rng.lognormal(mean=math.log(daily_rate), sigma=rate_sigma, size=user_count)

    urow, ts, cell_idx = _emit_stream(
        rng, cfg, home, work, rates, zone_row, zone_factors
    )
    labels = np.array(
        [f"{label_prefix}{city.rng_cursor:02d}_{i:06d}" for i in range(user_count)],
        dtype=object,
    )
    block = StreamBlock(user_ids=labels, user_row=urow, ts=ts, cell_idx=cell_idx)
    return replace(
        city, blocks=city.blocks + (block,), rng_cursor=city.rng_cursor + 1
    )


def attendee_cell_pool(
    city: SyntheticCity, ev: PlantedEvent
) -> tuple[np.ndarray, np.ndarray]:
    """(cell indices, selection weights) for one event's attendees.

    Eligible cells overlap the venue center by more than -extent_m,
    exactly the relevance predicate at radius extent_m. Selection
    weight grows with the cell's entry radius (outer cells take spill
    from saturated inner ones), which is what concentrates the sweep's
    anomaly profile near the true extent.
    """
    lats = np.array([c.center.lat for c in city.cells])
    lons = np.array([c.center.lon for c in city.cells])
    cov = np.array([c.coverage_radius for c in city.cells])
    entry = distances_to(ev.center, lats, lons) - cov
    eligible = np.flatnonzero(entry < ev.extent_m)
    if ev.attendee_cells is not None:
        wanted = set(ev.attendee_cells)
        missing = wanted - {city.cells[i].cell_id for i in eligible}
        if missing:
            raise ValidationError(
                f"attendee cells {sorted(missing)} not usable for event "
                f"{ev.event_id}: unknown or outside extent {ev.extent_m} m"
            )
        eligible = np.array(
            [i for i in eligible if city.cells[i].cell_id in wanted], dtype=np.int64
        )
    if eligible.size == 0:
        raise ValidationError(
            f"venue {ev.venue_id} covered by zero cells at extent {ev.extent_m} m"
        )
    rho = entry[eligible]
    w = (rho - rho.min() + ev.spill_offset_m) ** ev.spill_exponent
    return eligible.astype(np.int32), w / w.sum()


def plant_event(city: SyntheticCity, ev: PlantedEvent) -> SyntheticCity:
    """Inject one event's attendees and record its ground truth.

    round(true_attendance x carrier_share) fresh users appear, each
    served by one cell from the venue pool for the whole visit, each
    emitting Poisson-many records uniformly over
    [start - arrive_before, end + linger_after). They have no history
    and vanish afterwards.
    """
    cfg = city.config
    if not (cfg.lat_min <= ev.center.lat <= cfg.lat_max):
        raise ValidationError(f"venue {ev.venue_id} latitude outside the city")
    if not (cfg.lon_min <= ev.center.lon <= cfg.lon_max):
        raise ValidationError(f"venue {ev.venue_id} longitude outside the city")
    t_lo = ev.start - ev.arrive_before_s
    t_hi = ev.end + ev.linger_after_s
    if t_lo < cfg.start_epoch or t_hi > cfg.end_epoch:
        raise ValidationError(
            f"event {ev.event_id} window [{t_lo}, {t_hi}) leaves the dataset span"
        )
    if any(e.event_id == ev.event_id for e in city.planted):
        raise ValidationError(f"duplicate event_id {ev.event_id}")

    pool, weights = attendee_cell_pool(city, ev)
    n = int(round(ev.true_attendance * cfg.carrier_share))
    rng = city._child_rng()

    if n == 0:
        block = StreamBlock(
            user_ids=np.array([], dtype=object),
            user_row=np.array([], dtype=np.int64),
            ts=np.array([], dtype=np.int64),
            cell_idx=np.array([], dtype=np.int32),
        )
    else:
        serving = rng.choice(pool, size=n, p=weights)
        hours = (t_hi - t_lo) / 3600.0
        lam = ev.cdr_rate_per_hour * ev.usage_multiplier * hours
        counts = rng.poisson(lam, size=n)
        urow = np.repeat(np.arange(n, dtype=np.int64), counts)
        m = urow.shape[0]
        ts = (t_lo + rng.random(m) * (t_hi - t_lo)).astype(np.int64)
        labels = np.array(
            [f"{ev.event_id}_a{i:06d}" for i in range(n)], dtype=object
        )
        block = StreamBlock(
            user_ids=labels, user_row=urow, ts=ts, cell_idx=serving[urow]
        )

    return replace(
        city,
        blocks=city.blocks + (block,),
        events=city.events + (ev.to_spec(),),
        planted=city.planted + (ev,),
        rng_cursor=city.rng_cursor + 1,
    )
