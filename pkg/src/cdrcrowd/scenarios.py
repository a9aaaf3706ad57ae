"""Canned synthetic benchmarks with pinned seeds and engineered geometry.

Each builder assembles a city, plants events with known attendance, and
returns the manifest describing what a correct pipeline should find.
The numeric constants here are calibrated: venue cells control which
radii can see the crowd, ring clusters just outside each venue's extent
inject enough day-to-day count variance that anomaly scores die off
beyond the true extent, and spill weighting concentrates attendees near
the edge of the area the way saturated inner cells push traffic outward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .domain import Cell, GeoPoint, STRUCTURED
from .geo import offset_point
from .simulator import (
    CityConfig,
    PlantedEvent,
    SyntheticCity,
    UsageModel,
    add_activity_cluster,
    generate_city,
    plant_event,
)
from .store import write_cells, write_cdrs, write_events

SECONDS_PER_DAY = 86_400
EVENING_START_H = 18
EVENT_HOURS = 3


@dataclass(frozen=True)
class Scenario:
    name: str
    city: SyntheticCity
    manifest: dict


def _event_window(cfg: CityConfig, day: int) -> tuple[int, int]:
    start = cfg.start_epoch + day * SECONDS_PER_DAY + EVENING_START_H * 3600
    return start, start + EVENT_HOURS * 3600


def _venue_cells(
    venue_id: str, center: GeoPoint, layout: Sequence[tuple[float, float]]
) -> list[Cell]:
    """Cells at (distance, coverage) pairs east of the venue center.

    Entry radius of each is distance - coverage; the layout pins exactly
    when each cell joins the sweep area.
    """
    cells = []
    for i, (dist, cov) in enumerate(layout):
        cells.append(Cell(f"{venue_id}_g{i}", offset_point(center, dist, 0.0), cov))
    return cells


# (distance, coverage) layouts keyed by venue extent. First group: cells
# attendees can use (entry radius below the extent, spread so the user-count
# curve climbs right up to it). Second group: ring cells; the first sits
# right past the extent (entry radius extent+60, so it joins the sweep one
# step beyond) and carries most of the ring population, the two farther
# ones refresh the background variance with their own day-to-day noise.
VENUE_LAYOUTS: dict[float, tuple[tuple[tuple[float, float], ...], tuple[tuple[float, float], ...]]] = {
    -200.0: (
        ((60.0, 500.0), (120.0, 420.0)),
        ((260.0, 400.0), (550.0, 300.0), (1050.0, 300.0)),
    ),
    0.0: (
        ((60.0, 450.0), (150.0, 330.0), (280.0, 330.0)),
        ((460.0, 400.0), (750.0, 300.0), (1250.0, 300.0)),
    ),
    300.0: (
        ((480.0, 330.0), (600.0, 350.0)),
        ((760.0, 400.0), (1050.0, 300.0), (1550.0, 300.0)),
    ),
    500.0: (
        ((80.0, 380.0), (300.0, 350.0), (650.0, 330.0), (800.0, 340.0)),
        ((960.0, 400.0), (1250.0, 300.0), (1750.0, 300.0)),
    ),
    800.0: (
        ((850.0, 400.0), (880.0, 330.0), (950.0, 300.0), (1050.0, 300.0)),
        ((1260.0, 400.0), (1550.0, 300.0), (2050.0, 300.0)),
    ),
}

# Ring cells fan out on different compass bearings so that distant ones
# land in different activity zones and fluctuate independently.
_RING_BEARINGS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0))


def _venue_geometry(venue_id: str, center: GeoPoint, extent: float) -> tuple[list[Cell], list[Cell]]:
    inner, ring = VENUE_LAYOUTS[extent]
    inner_cells = _venue_cells(venue_id, center, inner)
    ring_cells = []
    for i, (dist, cov) in enumerate(ring):
        be, bn = _RING_BEARINGS[i % len(_RING_BEARINGS)]
        ring_cells.append(
            Cell(f"{venue_id}_r{i}", offset_point(center, dist * be, dist * bn), cov)
        )
    return inner_cells, ring_cells


def _seed_venue_population(
    city: SyntheticCity,
    center: GeoPoint,
    inner: Sequence[Cell],
    ring: Sequence[Cell],
    floor_users: int,
    ring_users: int,
    floor_rate: float = 3.0,
    ring_rate: float = 4.0,
) -> SyntheticCity:
    """Give a venue a baseline pulse: light use of its own cells, heavy
    use of the ring just outside. The floor keeps deep-radius baselines
    from degenerating to zero; the ring makes post-extent z-scores drown.

    Ring users are split 70/15/15: the near ring does the damping, the
    far ones only refresh the variance."""
    if floor_users > 0:
        city = add_activity_cluster(
            city,
            center,
            floor_users,
            floor_rate,
            cell_ids=[c.cell_id for c in inner],
            label_prefix="vf",
        )
    if ring_users > 0:
        shares = [0.70, 0.15, 0.15][: len(ring)]
        counts = [int(round(ring_users * s / sum(shares))) for s in shares]
        counts[0] += ring_users - sum(counts)
        for cell, count in zip(ring, counts):
            if count <= 0:
                continue
            city = add_activity_cluster(
                city,
                center,
                count,
                ring_rate,
                cell_ids=[cell.cell_id],
                label_prefix="vr",
            )
    return city


def _write_city(city: SyntheticCity, out_dir: Path) -> dict[str, str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    cells_path = out_dir / "cells.csv"
    cdrs_path = out_dir / "cdrs.csv"
    events_path = out_dir / "events.csv"
    write_cells(list(city.cells), cells_path)
    write_cdrs(city.to_store(), cdrs_path)
    write_events(list(city.events), events_path)
    return {
        "cells": str(cells_path),
        "cdrs": str(cdrs_path),
        "events": str(events_path),
    }


def write_scenario(sc: Scenario, out_dir: str | Path) -> dict:
    """Write cells/CDR/event CSVs plus the scenario manifest; returns paths."""
    out = Path(out_dir)
    paths = _write_city(sc.city, out)
    manifest = dict(sc.manifest)
    manifest["paths"] = paths
    manifest["record_count"] = sc.city.record_count
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def build_demo(seed: int = 7) -> Scenario:
    """Small city, one venue, three weekly events; runs in seconds."""
    cfg = CityConfig(
        cell_count=70,
        population=2_500,
        rng_seed=seed,
        n_days=23,
        zone_day_cv=0.05,
        usage=UsageModel(median_daily_rate=2.5),
    )
    center = cfg.center
    venue = offset_point(center, 2_500.0, 1_200.0)
    inner, ring = _venue_geometry("vd", venue, 300.0)
    city = generate_city(cfg, extra_cells=inner + ring)
    city = _seed_venue_population(city, venue, inner, ring, floor_users=60, ring_users=250)
    for k, attendance in enumerate([1_500, 2_500, 4_000]):
        start, end = _event_window(cfg, 7 + 7 * k)
        city = plant_event(
            city,
            PlantedEvent(
                event_id=f"demo{k}",
                venue_id="vd",
                center=venue,
                extent_m=300.0,
                start=start,
                end=end,
                true_attendance=attendance,
            ),
        )
    manifest = {
        "scenario": "demo",
        "seed": seed,
        "venues": {"vd": {"extent_m": 300.0}},
        "events": {e.event_id: e.ground_truth for e in city.events},
    }
    return Scenario("demo", city, manifest)


def build_confounder(seed: int = 11) -> Scenario:
    """Two venues, six events each: a small-crowd downtown venue buried in
    dense everyday activity, and a big-crowd suburban venue in the quiet.

    A fixed-radius headcount ranks these backwards; the estimator must
    not.
    """
    cfg = CityConfig(
        cell_count=220,
        population=12_000,
        rng_seed=seed,
        n_days=46,
        core_fraction=0.55,
        zone_day_cv=0.05,
        usage=UsageModel(median_daily_rate=2.6),
    )
    center = cfg.center
    v_center = center
    v_suburb = offset_point(center, 5_200.0, -3_800.0)

    in_c, ring_c = _venue_geometry("vc", v_center, 300.0)
    in_s, ring_s = _venue_geometry("vs", v_suburb, 300.0)
    # A residential pocket right at the suburban venue keeps its
    # fixed-radius headcount on the same scale as downtown's, flat in
    # both places; otherwise the two venues' base counts anti-correlate
    # with crowd size and score a spurious (negative) fit.
    pocket = Cell("vs_n0", offset_point(v_suburb, 80.0, 0.0), 200.0)
    city = generate_city(cfg, extra_cells=in_c + ring_c + in_s + ring_s + [pocket])

    # The confounder: thousands of residents whose daily life happens in
    # the venue's own cells and immediate surroundings.
    city = add_activity_cluster(
        city, v_center, 5_000, 5.0, band_m=(0.0, 700.0), label_prefix="cc"
    )
    city = add_activity_cluster(
        city, v_suburb, 1_300, 5.0, cell_ids=[pocket.cell_id], label_prefix="cs"
    )
    city = _seed_venue_population(city, v_center, in_c, ring_c, floor_users=0, ring_users=400)
    city = _seed_venue_population(city, v_suburb, in_s, ring_s, floor_users=60, ring_users=250)

    central_att = [2_000, 3_200, 4_800, 6_500, 8_200, 10_000]
    suburb_att = [12_000, 16_000, 21_000, 27_000, 33_000, 40_000]
    # Attendees stay on the venues' own cells; none of those sit inside
    # the 100 m fixed circle, so the naive count never sees the crowd.
    for k, attendance in enumerate(central_att):
        start, end = _event_window(cfg, 7 + 7 * k)
        city = plant_event(
            city,
            PlantedEvent(
                event_id=f"ec{k}",
                venue_id="vc",
                center=v_center,
                extent_m=300.0,
                start=start,
                end=end,
                true_attendance=attendance,
                confounder=True,
                attendee_cells=tuple(c.cell_id for c in in_c),
            ),
        )
    for k, attendance in enumerate(suburb_att):
        start, end = _event_window(cfg, 10 + 7 * k)
        city = plant_event(
            city,
            PlantedEvent(
                event_id=f"es{k}",
                venue_id="vs",
                center=v_suburb,
                extent_m=300.0,
                start=start,
                end=end,
                true_attendance=attendance,
                attendee_cells=tuple(c.cell_id for c in in_s),
            ),
        )
    manifest = {
        "scenario": "confounder",
        "seed": seed,
        "venues": {
            "vc": {"extent_m": 300.0, "confounder": True},
            "vs": {"extent_m": 300.0, "confounder": False},
        },
        "events": {e.event_id: e.ground_truth for e in city.events},
        "acceptance": {"naive_r2_max": 0.3, "method_r2_min": 0.7, "runtime_s_max": 300},
    }
    return Scenario("confounder", city, manifest)


def build_benchmark(seed: int = 23) -> Scenario:
    """Fifteen structured events, 2k-80k attendance, across three venues."""
    cfg = CityConfig(
        cell_count=260,
        population=15_000,
        rng_seed=seed,
        n_days=45,
        zone_day_cv=0.08,
        usage=UsageModel(median_daily_rate=2.8),
    )
    center = cfg.center
    venues = {
        "b0": (offset_point(center, -1_200.0, 900.0), 300.0),
        "b1": (offset_point(center, 4_300.0, 2_600.0), 500.0),
        "b2": (offset_point(center, -4_800.0, -3_300.0), 800.0),
    }
    extra: list[Cell] = []
    geometry = {}
    for vid, (pt, extent) in venues.items():
        inner, ring = _venue_geometry(vid, pt, extent)
        geometry[vid] = (pt, inner, ring)
        extra.extend(inner + ring)
    city = generate_city(cfg, extra_cells=extra)
    for vid, (pt, inner, ring) in geometry.items():
        city = _seed_venue_population(city, pt, inner, ring, floor_users=80, ring_users=300)

    attendances = [
        2_000, 3_000, 4_500, 6_000, 8_000,
        10_000, 12_000, 15_000, 19_000, 24_000,
        30_000, 40_000, 52_000, 65_000, 80_000,
    ]
    # Crowds differ in how chatty they are, so the raw-score-to-count
    # slope wobbles between events and the regression has real work.
    multipliers = [1.0, 0.85, 1.2, 0.95, 1.1, 0.9, 1.15, 1.0, 0.85, 1.1, 0.95, 1.2, 0.9, 1.05, 1.0]
    venue_ids = list(venues)
    for k, attendance in enumerate(attendances):
        vid = venue_ids[k % len(venue_ids)]
        pt, extent = venues[vid]
        start, end = _event_window(cfg, 7 + (k % 3) + 7 * (k // 3))
        city = plant_event(
            city,
            PlantedEvent(
                event_id=f"b{k:02d}",
                venue_id=vid,
                center=pt,
                extent_m=extent,
                start=start,
                end=end,
                true_attendance=attendance,
                usage_multiplier=multipliers[k],
            ),
        )
    manifest = {
        "scenario": "benchmark",
        "seed": seed,
        "carrier_share": cfg.carrier_share,
        "venues": {vid: {"extent_m": venues[vid][1]} for vid in venues},
        "events": {e.event_id: e.ground_truth for e in city.events},
        "acceptance": {
            "regression": "piecewise",
            "neighbors": 6,
            "r2_min": 0.7,
            "median_pct_max_at_or_above_10000": 25.0,
        },
    }
    return Scenario("benchmark", city, manifest)


def build_recovery(seed: int = 37) -> Scenario:
    """Four venues with extents -200/0/300/800 m, eight events each.

    Placed in quiet corners with engineered geometry so the planted
    extent is actually recoverable; the test pins how close the two
    radius estimators must land.
    """
    cfg = CityConfig(
        cell_count=240,
        population=10_000,
        rng_seed=seed,
        n_days=64,
        core_fraction=0.5,
        zone_day_cv=0.5,
        usage=UsageModel(median_daily_rate=2.5),
    )
    center = cfg.center
    placements = {
        "r200n": (offset_point(center, -5_600.0, 4_200.0), -200.0),
        "r0": (offset_point(center, 5_600.0, 4_200.0), 0.0),
        "r300": (offset_point(center, -5_600.0, -4_200.0), 300.0),
        "r800": (offset_point(center, 5_600.0, -4_200.0), 800.0),
    }
    extra: list[Cell] = []
    geometry = {}
    for vid, (pt, extent) in placements.items():
        inner, ring = _venue_geometry(vid, pt, extent)
        geometry[vid] = (pt, inner, ring)
        extra.extend(inner + ring)
    city = generate_city(cfg, extra_cells=extra)
    for vid, (pt, inner, ring) in geometry.items():
        city = _seed_venue_population(
            city, pt, inner, ring, floor_users=50, ring_users=6_400, ring_rate=2.5
        )

    # Small crowds on purpose: the surge has to stay a fraction of the
    # ring's day-to-day standard deviation or one lucky baseline draw
    # keeps an event detectable out to the sweep edge.
    attendances = [850, 1_000, 1_200, 950, 1_350, 1_050, 900, 1_250]
    for offset, vid in enumerate(placements):
        pt, extent = placements[vid]
        for j, attendance in enumerate(attendances):
            start, end = _event_window(cfg, 7 + offset + 7 * j)
            city = plant_event(
                city,
                PlantedEvent(
                    event_id=f"{vid}_e{j}",
                    venue_id=vid,
                    center=pt,
                    extent_m=extent,
                    start=start,
                    end=end,
                    true_attendance=attendance,
                    spill_exponent=4.0,
                    spill_offset_m=40.0,
                ),
            )
    manifest = {
        "scenario": "recovery",
        "seed": seed,
        "venues": {vid: {"extent_m": placements[vid][1]} for vid in placements},
        "events": {e.event_id: e.ground_truth for e in city.events},
        "acceptance": {
            "tolerance_m": 200.0,
            "single_min_venues": 3,
            "multi_min_venues": 4,
        },
    }
    return Scenario("recovery", city, manifest)


def build_perf(seed: int = 53) -> Scenario:
    """Load benchmark: ~5 million records, 500 cells, 15 events."""
    cfg = CityConfig(
        cell_count=481,  # engineered venue cells bring the total to 500
        population=37_000,
        rng_seed=seed,
        n_days=39,
        zone_day_cv=0.08,
        usage=UsageModel(median_daily_rate=2.8),
    )
    center = cfg.center
    venues = {
        "p0": (offset_point(center, -1_500.0, 800.0), 300.0),
        "p1": (offset_point(center, 3_900.0, 2_500.0), 500.0),
        "p2": (offset_point(center, -4_500.0, -3_000.0), 800.0),
    }
    extra: list[Cell] = []
    geometry = {}
    for vid, (pt, extent) in venues.items():
        inner, ring = _venue_geometry(vid, pt, extent)
        geometry[vid] = (pt, inner, ring)
        extra.extend(inner + ring)
    city = generate_city(cfg, extra_cells=extra)
    for vid, (pt, inner, ring) in geometry.items():
        city = _seed_venue_population(city, pt, inner, ring, floor_users=80, ring_users=300)

    attendances = [
        3_000, 5_000, 8_000, 11_000, 14_000,
        17_000, 20_000, 23_000, 26_000, 30_000,
        9_000, 12_000, 18_000, 24_000, 28_000,
    ]
    venue_ids = list(venues)
    for k, attendance in enumerate(attendances):
        vid = venue_ids[k % len(venue_ids)]
        pt, extent = venues[vid]
        start, end = _event_window(cfg, 7 + (k % 3) + 7 * (k // 3))
        city = plant_event(
            city,
            PlantedEvent(
                event_id=f"p{k:02d}",
                venue_id=vid,
                center=pt,
                extent_m=extent,
                start=start,
                end=end,
                true_attendance=attendance,
            ),
        )
    manifest = {
        "scenario": "perf",
        "seed": seed,
        "cell_count": len(city.cells),
        "events": {e.event_id: e.ground_truth for e in city.events},
        "acceptance": {"runtime_s_max": 600, "parallel_speedup": True},
    }
    return Scenario("perf", city, manifest)


BUILDERS: dict[str, Callable[[int], Scenario]] = {
    "demo": build_demo,
    "confounder": build_confounder,
    "benchmark": build_benchmark,
    "recovery": build_recovery,
    "perf": build_perf,
}

DEFAULT_SEEDS = {"demo": 7, "confounder": 11, "benchmark": 23, "recovery": 37, "perf": 53}


def build_scenario(name: str, seed: Optional[int] = None) -> Scenario:
    if name not in BUILDERS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(BUILDERS)}")
    actual_seed = DEFAULT_SEEDS[name] if seed is None else seed
    return BUILDERS[name](actual_seed)
