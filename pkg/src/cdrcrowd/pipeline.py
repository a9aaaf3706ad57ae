"""End-to-end orchestration: ingest, radius, attendance, calibration, reports.

Each event flows through collect -> best radius -> presence-weighted
count -> regression scaling, and every intermediate product is written
out so any stage can be rerun or inspected on its own.  Event processing
is read-only over the store, so events can be fanned out across worker
processes; all outputs are merged in event-id order to keep reruns
byte-identical (the manifest's creation timestamp is the one exception).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import multiprocessing as mp

from .attendance import (
    DEFAULT_NAIVE_RADIUS_M,
    RawAttendance,
    estimate_raw_attendance,
    naive_count,
)
from .domain import STRUCTURED, Cell, EventSpec, ValidationError
from .radius import (
    NoEventSignal,
    RadiusProfile,
    SweepConfig,
    best_radius_multi,
    best_radius_single,
    z_scores_by_radius,
)
from .regression import (
    DEFAULT_NEIGHBORS,
    DEFAULT_RANGE_THRESHOLD,
    LooResult,
    PIECEWISE_METHOD,
    InsufficientTraining,
    leave_one_out_eval,
    pearson_r,
)
from .store import CdrStore, LoadReport, ingest_cdrs, read_cells, read_events

DEFAULT_FALLBACK_RADIUS_M = 200.0


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage and event that caused it."""

    def __init__(self, stage: str, event_id: str, message: str) -> None:
        self.stage = stage
        self.event_id = event_id
        where = f"stage={stage}" + (f" event={event_id}" if event_id else "")
        super().__init__(f"[{where}] {message}")


@dataclass(frozen=True)
class PipelineConfig:
    cells_path: str
    cdrs_path: str
    events_path: str
    out_dir: str
    r_min: float = -500.0
    r_max: float = 1500.0
    step: float = 100.0
    pad_hours: float = 2.0
    lookback_days: int = 6
    z_threshold: float = 3.0
    regression: str = PIECEWISE_METHOD
    neighbors: int = DEFAULT_NEIGHBORS
    range_threshold: float = DEFAULT_RANGE_THRESHOLD
    multi_event: bool = False
    fallback_radius_m: float = DEFAULT_FALLBACK_RADIUS_M
    naive_radius_m: float = DEFAULT_NAIVE_RADIUS_M
    workers: int = 1
    mcc_filter: Optional[int] = None
    training_categories: tuple[str, ...] = (STRUCTURED,)

    def __post_init__(self) -> None:
        if self.pad_hours < 0:
            raise ValidationError("pad_hours must be nonnegative")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")

    @property
    def pad_seconds(self) -> int:
        return int(round(self.pad_hours * 3600))

    def sweep(self) -> SweepConfig:
        return SweepConfig(
            r_min=self.r_min,
            r_max=self.r_max,
            step=self.step,
            lookback_days=self.lookback_days,
            z_threshold=self.z_threshold,
        )


@dataclass(frozen=True)
class EventOutcome:
    """Everything one event produced before regression scaling."""

    event: EventSpec
    padded_start: int
    padded_end: int
    best_radius_m: float
    radius_source: str  # "single" | "multi" | "fallback"
    naive_users: int
    raw: RawAttendance
    profiles: tuple[RadiusProfile, ...]


@dataclass(frozen=True)
class PipelineResult:
    outcomes: tuple[EventOutcome, ...]
    loo: Optional[LooResult]
    ingest_report: LoadReport
    out_dir: str


# Worker context inherited through fork; set in the parent before the pool
# spawns so each child shares the read-only store without re-pickling it.
_WORK: Optional[tuple[CdrStore, list[Cell], PipelineConfig, dict[str, tuple[float, str]]]] = None


def _process_event(
    store: CdrStore,
    cells: list[Cell],
    cfg: PipelineConfig,
    ev: EventSpec,
    venue_radius: dict[str, tuple[float, str]],
) -> EventOutcome:
    padded = ev.padded(cfg.pad_seconds)
    st, et = padded.scheduled_start, padded.scheduled_end
    sweep = cfg.sweep()
    try:
        profiles = z_scores_by_radius(store, cells, ev.center, st, et, sweep)
    except ValidationError as exc:
        raise StageError("radius-sweep", ev.event_id, str(exc)) from exc

    if cfg.multi_event:
        best_r, source = venue_radius[ev.venue_id]
    else:
        try:
            best_r, source = best_radius_single(profiles), "single"
        except NoEventSignal:
            best_r, source = cfg.fallback_radius_m, "fallback"

    naive = naive_count(store, cells, ev.center, cfg.naive_radius_m, st, et)
    raw = estimate_raw_attendance(
        store,
        cells,
        ev.center,
        best_r,
        st,
        et,
        event_id=ev.event_id,
        history_days=cfg.lookback_days,
    )
    return EventOutcome(
        event=ev,
        padded_start=st,
        padded_end=et,
        best_radius_m=best_r,
        radius_source=source,
        naive_users=naive,
        raw=raw,
        profiles=tuple(profiles),
    )


def _event_worker(ev: EventSpec) -> EventOutcome:
    assert _WORK is not None, "worker context missing (pool must be fork-based)"
    store, cells, cfg, venue_radius = _WORK
    return _process_event(store, cells, cfg, ev, venue_radius)


def _venue_radii(
    store: CdrStore,
    cells: list[Cell],
    cfg: PipelineConfig,
    events: Sequence[EventSpec],
) -> dict[str, tuple[float, str]]:
    """Multi-event path: one radius per venue from all its catalog events."""
    by_venue: dict[str, list[EventSpec]] = {}
    for ev in events:
        by_venue.setdefault(ev.venue_id, []).append(ev)
    out: dict[str, tuple[float, str]] = {}
    for venue_id in sorted(by_venue):
        train = [ev.padded(cfg.pad_seconds) for ev in by_venue[venue_id]]
        try:
            out[venue_id] = (
                best_radius_multi(
                    store, cells, train[0].center, train, cfg.sweep()
                ),
                "multi",
            )
        except NoEventSignal:
            out[venue_id] = (cfg.fallback_radius_m, "fallback")
    return out


def _fmt(v) -> str:
    # repr keeps full float precision and makes reruns byte-identical.
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_profiles(outcomes: Sequence[EventOutcome], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "event_id",
                "radius_m",
                "user_count",
                "baseline_mean",
                "baseline_std",
                "z_score",
                "normalized_z",
                "cell_count",
                "coverage_sum",
            ]
        )
        for oc in outcomes:
            for p in oc.profiles:
                w.writerow(
                    [
                        oc.event.event_id,
                        _fmt(p.radius_m),
                        p.user_count,
                        _fmt(p.baseline_mean),
                        _fmt(p.baseline_std),
                        _fmt(p.z_score),
                        _fmt(p.normalized_z),
                        p.cell_count,
                        _fmt(p.coverage_sum),
                    ]
                )


def _write_events_report(
    outcomes: Sequence[EventOutcome],
    predicted: dict[str, float],
    path: Path,
) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "event_id",
                "venue_id",
                "category",
                "ground_truth",
                "padded_start",
                "padded_end",
                "best_radius_m",
                "radius_source",
                "naive_users",
                "candidate_count",
                "raw_attendance",
                "predicted",
                "abs_err",
                "pct_err",
            ]
        )
        for oc in outcomes:
            ev = oc.event
            yhat = predicted.get(ev.event_id)
            abs_err = pct_err = None
            if yhat is not None and ev.ground_truth is not None:
                abs_err = abs(yhat - ev.ground_truth)
                if ev.ground_truth > 0:
                    pct_err = abs_err / ev.ground_truth * 100.0
            w.writerow(
                [
                    ev.event_id,
                    ev.venue_id,
                    ev.category,
                    _fmt(ev.ground_truth),
                    oc.padded_start,
                    oc.padded_end,
                    _fmt(oc.best_radius_m),
                    oc.radius_source,
                    oc.naive_users,
                    oc.raw.candidate_count,
                    _fmt(oc.raw.probability_sum),
                    _fmt(yhat),
                    _fmt(abs_err),
                    _fmt(pct_err),
                ]
            )


def _write_raw_csv(outcomes: Sequence[EventOutcome], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_id", "probability_sum", "candidate_count"])
        for oc in outcomes:
            w.writerow(
                [
                    oc.event.event_id,
                    _fmt(oc.raw.probability_sum),
                    oc.raw.candidate_count,
                ]
            )


def write_error_artifacts(
    loo: LooResult,
    truth_by_event: dict[str, float],
    naive_by_event: dict[str, int],
    method: str,
    out_dir: Path,
) -> dict:
    """error_report.json and error_cdf.csv from one evaluation run."""
    scored = [
        (p.predicted, p.truth) for p in loo.predictions if p.truth is not None
    ]
    report: dict = {
        "method": method,
        "n_events": len(loo.predictions),
        "n_scored": len(scored),
        "mean_abs": loo.report.mean_abs,
        "median_abs": loo.report.median_abs,
        "mean_pct": loo.report.mean_pct,
        "median_pct": loo.report.median_pct,
        "skewness": loo.report.skewness,
        "excluded_zero_truth": loo.report.excluded_zero_truth,
    }
    if len(scored) >= 2:
        pred, true = zip(*scored)
        r = pearson_r(pred, true)
        report["r"] = r
        report["r2"] = r * r
    naive_pairs = [
        (float(naive_by_event[eid]), truth_by_event[eid])
        for eid in sorted(truth_by_event)
        if eid in naive_by_event
    ]
    if len(naive_pairs) >= 2:
        nx, ny = zip(*naive_pairs)
        nr = pearson_r(nx, ny)
        report["naive_r"] = nr
        report["naive_r2"] = nr * nr

    (out_dir / "error_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    with (out_dir / "error_cdf.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pct_error", "cumulative_fraction"])
        for pct, frac in loo.report.error_cdf:
            w.writerow([_fmt(pct), _fmt(frac)])
    return report


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Run every stage and write all artifacts under cfg.out_dir.

    Events are processed independently (in parallel when workers > 1);
    regression scaling runs when at least 3 ground-truth events pass the
    training filter, is skipped when none carry ground truth at all, and
    fails loudly in between (1 or 2 training events cannot calibrate
    anything trustworthy).
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        cells = read_cells(cfg.cells_path)
    except Exception as exc:
        raise StageError("read-cells", "", str(exc)) from exc
    try:
        store, ingest_report = ingest_cdrs(
            cfg.cdrs_path, cells, mcc_filter=cfg.mcc_filter
        )
    except Exception as exc:
        raise StageError("ingest", "", str(exc)) from exc
    try:
        events = sorted(read_events(cfg.events_path), key=lambda e: e.event_id)
    except Exception as exc:
        raise StageError("read-events", "", str(exc)) from exc

    (out_dir / "ingest_report.json").write_text(
        json.dumps(ingest_report.as_dict(), indent=2, sort_keys=True) + "\n"
    )

    venue_radius: dict[str, tuple[float, str]] = {}
    if cfg.multi_event and events:
        try:
            venue_radius = _venue_radii(store, cells, cfg, events)
        except ValidationError as exc:
            raise StageError("multi-radius", "", str(exc)) from exc

    global _WORK
    outcomes: list[EventOutcome]
    if cfg.workers > 1 and len(events) > 1:
        _WORK = (store, cells, cfg, venue_radius)
        try:
            ctx = mp.get_context("fork")
            with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx) as pool:
                outcomes = list(pool.map(_event_worker, events))
        finally:
            _WORK = None
    else:
        outcomes = [
            _process_event(store, cells, cfg, ev, venue_radius) for ev in events
        ]

    _write_profiles(outcomes, out_dir / "radius_profiles.csv")
    _write_raw_csv(outcomes, out_dir / "raw_attendance.csv")

    allowed = set(cfg.training_categories)
    n_train = sum(
        1
        for ev in events
        if ev.ground_truth is not None and ev.category in allowed
    )
    loo: Optional[LooResult] = None
    predicted: dict[str, float] = {}
    if n_train >= 3:
        try:
            loo = leave_one_out_eval(
                [(oc.raw, oc.event) for oc in outcomes],
                method=cfg.regression,
                training_categories=cfg.training_categories,
                neighbors=cfg.neighbors,
                range_threshold=cfg.range_threshold,
            )
        except (InsufficientTraining, ValidationError) as exc:
            raise StageError("regression", "", str(exc)) from exc
        predicted = {p.event_id: p.predicted for p in loo.predictions}
    elif n_train > 0:
        raise StageError(
            "regression",
            "",
            f"only {n_train} ground-truth training event(s) in categories "
            f"{sorted(allowed)}; need at least 3 (or none, to skip scaling)",
        )

    _write_events_report(outcomes, predicted, out_dir / "events_report.csv")

    report_summary: dict = {}
    if loo is not None:
        truth = {
            oc.event.event_id: float(oc.event.ground_truth)
            for oc in outcomes
            if oc.event.ground_truth is not None
        }
        naive = {oc.event.event_id: oc.naive_users for oc in outcomes}
        report_summary = write_error_artifacts(
            loo, truth, naive, cfg.regression, out_dir
        )

    manifest = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": {
            **{k: v for k, v in asdict(cfg).items()},
        },
        "ingest": ingest_report.as_dict(),
        "n_events": len(events),
        "n_training_events": n_train,
        "regression_ran": loo is not None,
        "summary": report_summary,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )

    return PipelineResult(
        outcomes=tuple(outcomes),
        loo=loo,
        ingest_report=ingest_report,
        out_dir=str(out_dir),
    )
