"""Command-line interface.

Subcommands mirror the pipeline stages so each intermediate product can
be produced and inspected on its own: simulate -> ingest -> stats /
best-radius / estimate -> evaluate, with `run` chaining everything.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .attendance import estimate_raw_attendance, naive_count, RawAttendance
from .domain import EventSpec, ValidationError
from .mobility import (
    daily_cdr_percentiles,
    population_median_stats,
    quartile_summary,
    inter_cdr_times,
    user_radii_of_gyration,
)
from .pipeline import (
    DEFAULT_FALLBACK_RADIUS_M,
    PipelineConfig,
    StageError,
    run_pipeline,
    write_error_artifacts,
)
from .radius import NoEventSignal, SweepConfig, best_radius_multi, best_radius_single, z_scores_by_radius
from .regression import leave_one_out_eval, InsufficientTraining
from .scenarios import BUILDERS, build_scenario, write_scenario
from .store import IngestError, ingest_cdrs, read_cells, read_events


def _add_sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r-min", type=float, default=-500.0, help="sweep lower bound, meters")
    p.add_argument("--r-max", type=float, default=1500.0, help="sweep upper bound, meters")
    p.add_argument("--step", type=float, default=100.0, help="sweep step, meters")
    p.add_argument("--lookback-days", type=int, default=6, help="baseline/history days")
    p.add_argument("--z-threshold", type=float, default=3.0, help="multi-event detection threshold")
    p.add_argument("--pad-hours", type=float, default=2.0, help="event window padding, hours")


def _add_regression_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--regression", choices=["ols", "piecewise", "range"], default="piecewise"
    )
    p.add_argument("--knn", type=int, default=6, help="piecewise neighbor count")
    p.add_argument("--range-threshold", type=float, default=10_000.0)


def _add_data_flags(p: argparse.ArgumentParser, events: bool = True) -> None:
    p.add_argument("--cells", required=True, help="cell catalog CSV")
    p.add_argument("--cdrs", required=True, help="CDR CSV")
    if events:
        p.add_argument("--events", required=True, help="event catalog CSV")


def _sweep_from(args: argparse.Namespace) -> SweepConfig:
    return SweepConfig(
        r_min=args.r_min,
        r_max=args.r_max,
        step=args.step,
        lookback_days=args.lookback_days,
        z_threshold=args.z_threshold,
    )


def _load_inputs(args: argparse.Namespace, with_events: bool = True):
    cells = read_cells(args.cells)
    store, report = ingest_cdrs(args.cdrs, cells, mcc_filter=getattr(args, "mcc_filter", None))
    events = read_events(args.events) if with_events else []
    return cells, store, report, events


def _pick_event(events: Sequence[EventSpec], event_id: str) -> EventSpec:
    for ev in events:
        if ev.event_id == event_id:
            return ev
    raise ValidationError(f"event {event_id!r} not in catalog")


def _cmd_simulate(args: argparse.Namespace) -> int:
    sc = build_scenario(args.scenario, args.seed)
    manifest = write_scenario(sc, args.out)
    print(f"scenario {sc.name}: {manifest['record_count']} records, "
          f"{len(sc.city.cells)} cells, {len(sc.city.events)} events -> {args.out}")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    cells = read_cells(args.cells)
    span = tuple(args.span) if args.span else None
    store, report = ingest_cdrs(args.cdrs, cells, declared_span=span, mcc_filter=args.mcc_filter)
    payload = report.as_dict()
    payload["n_users"] = store.n_users
    payload["time_span"] = list(store.time_span())
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    cells, store, _, _ = _load_inputs(args, with_events=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    percentiles = daily_cdr_percentiles(store)
    with (out / "daily_cdr_percentiles.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["percentile", "records_per_day"])
        for pct in sorted(percentiles):
            w.writerow([pct, repr(percentiles[pct])])

    # Per-user median inter-record gaps, minutes; population prior stats.
    medians = []
    for code in range(store.n_users):
        ts_u, _ = store.user_slice(code)
        gaps = inter_cdr_times(ts_u)
        if gaps.size:
            medians.append(quartile_summary(gaps / 60.0).median)
    summary = {"users_with_gaps": len(medians)}
    if medians:
        arith, geo = population_median_stats(medians)
        summary["median_gap_arithmetic_mean_min"] = arith
        summary["median_gap_geometric_mean_min"] = geo
    (out / "inter_cdr_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )

    gyration = user_radii_of_gyration(store, cells)
    with (out / "radius_of_gyration_percentiles.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["percentile", "radius_of_gyration_m"])
        if gyration.size:
            for pct in range(0, 101, 5):
                w.writerow([pct, repr(float(np.percentile(gyration, pct)))])
    print(f"stats written to {out}")
    return 0


def _cmd_best_radius(args: argparse.Namespace) -> int:
    cells, store, _, events = _load_inputs(args)
    ev = _pick_event(events, args.event_id)
    pad = int(round(args.pad_hours * 3600))
    padded = ev.padded(pad)
    sweep = _sweep_from(args)
    profiles = z_scores_by_radius(
        store, cells, ev.center, padded.scheduled_start, padded.scheduled_end, sweep
    )
    if args.multi_event:
        training = [e.padded(pad) for e in events if e.venue_id == ev.venue_id]
        best = best_radius_multi(store, cells, ev.center, training, sweep)
        source = "multi"
    else:
        best = best_radius_single(profiles)
        source = "single"
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["radius_m", "user_count", "baseline_mean", "baseline_std",
                 "z_score", "normalized_z", "cell_count", "coverage_sum"]
            )
            for p in profiles:
                w.writerow([
                    repr(p.radius_m), p.user_count, repr(p.baseline_mean),
                    repr(p.baseline_std),
                    "" if p.z_score is None else repr(p.z_score),
                    "" if p.normalized_z is None else repr(p.normalized_z),
                    p.cell_count, repr(p.coverage_sum),
                ])
    print(f"best radius ({source}): {best:.1f} m")
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    cells, store, _, events = _load_inputs(args)
    pad = int(round(args.pad_hours * 3600))
    sweep = _sweep_from(args)
    targets = events if args.event_id is None else [_pick_event(events, args.event_id)]

    results: list[tuple[EventSpec, RawAttendance, float]] = []
    for ev in targets:
        padded = ev.padded(pad)
        st, et = padded.scheduled_start, padded.scheduled_end
        if args.radius is not None:
            best = args.radius
        else:
            profiles = z_scores_by_radius(store, cells, ev.center, st, et, sweep)
            try:
                best = best_radius_single(profiles)
            except NoEventSignal:
                best = DEFAULT_FALLBACK_RADIUS_M
        raw = estimate_raw_attendance(
            store, cells, ev.center, best, st, et,
            event_id=ev.event_id, history_days=args.lookback_days,
        )
        results.append((ev, raw, best))

    if args.event_id is not None:
        ev, raw, best = results[0]
        payload = {
            "event_id": raw.event_id,
            "radius_m": best,
            "candidate_count": raw.candidate_count,
            "probability_sum": raw.probability_sum,
        }
        if args.per_user:
            payload["per_user"] = [asdict(a) for a in raw.per_user]
        text = json.dumps(payload, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n")
        print(text)
    else:
        out = Path(args.out or "raw_attendance.csv")
        with out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["event_id", "probability_sum", "candidate_count"])
            for ev, raw, _ in results:
                w.writerow([raw.event_id, repr(raw.probability_sum), raw.candidate_count])
        print(f"raw attendance for {len(results)} event(s) -> {out}")
    return 0


def _read_raw_csv(path: str) -> dict[str, tuple[float, int]]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"event_id", "probability_sum"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise ValidationError(
                f"{path}: need columns event_id, probability_sum"
            )
        out = {}
        for row in reader:
            out[row["event_id"]] = (
                float(row["probability_sum"]),
                int(row.get("candidate_count") or 0),
            )
    return out


def _cmd_evaluate(args: argparse.Namespace) -> int:
    events = read_events(args.events)
    raw_by_id = _read_raw_csv(args.raw)
    missing = [e.event_id for e in events if e.event_id not in raw_by_id]
    if missing:
        raise ValidationError(f"raw estimates missing for events: {missing}")
    entries = []
    for ev in sorted(events, key=lambda e: e.event_id):
        psum, cand = raw_by_id[ev.event_id]
        entries.append(
            (RawAttendance(ev.event_id, cand, psum, ()), ev)
        )
    loo = leave_one_out_eval(
        entries,
        method=args.regression,
        neighbors=args.knn,
        range_threshold=args.range_threshold,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "predictions.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_id", "raw", "predicted", "truth", "abs_err", "pct_err"])
        for p in loo.predictions:
            abs_err = pct_err = ""
            if p.truth is not None:
                abs_err = repr(abs(p.predicted - p.truth))
                if p.truth > 0:
                    pct_err = repr(abs(p.predicted - p.truth) / p.truth * 100.0)
            w.writerow([p.event_id, repr(p.raw), repr(p.predicted),
                        "" if p.truth is None else repr(p.truth), abs_err, pct_err])
    truth = {
        ev.event_id: float(ev.ground_truth)
        for ev in events
        if ev.ground_truth is not None
    }
    report = write_error_artifacts(loo, truth, {}, args.regression, out)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = PipelineConfig(
        cells_path=args.cells,
        cdrs_path=args.cdrs,
        events_path=args.events,
        out_dir=args.out,
        r_min=args.r_min,
        r_max=args.r_max,
        step=args.step,
        pad_hours=args.pad_hours,
        lookback_days=args.lookback_days,
        z_threshold=args.z_threshold,
        regression=args.regression,
        neighbors=args.knn,
        range_threshold=args.range_threshold,
        multi_event=args.multi_event,
        workers=args.workers,
        mcc_filter=args.mcc_filter,
    )
    result = run_pipeline(cfg)
    n = len(result.outcomes)
    scored = (
        0 if result.loo is None
        else sum(1 for p in result.loo.predictions if p.truth is not None)
    )
    print(f"pipeline done: {n} event(s), {scored} scored; artifacts in {result.out_dir}")
    if result.loo is not None and scored:
        print(f"  median pct err: {result.loo.report.median_pct:.1f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdrcrowd",
        description="Estimate event attendance from cellular network records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic benchmark city")
    p.add_argument("--scenario", choices=sorted(BUILDERS), default="demo")
    p.add_argument("--seed", type=int, default=None, help="override the pinned seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="validate a CDR file and report rejects")
    _add_data_flags(p, events=False)
    p.add_argument("--mcc-filter", type=int, default=None)
    p.add_argument("--span", type=int, nargs=2, metavar=("LO", "HI"), default=None,
                   help="declared epoch-second span; rows outside are rejected")
    p.add_argument("--out", default=None, help="also write the report JSON here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="population usage and mobility statistics")
    _add_data_flags(p, events=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("best-radius", help="radius sweep for one event")
    _add_data_flags(p)
    p.add_argument("--event-id", required=True)
    p.add_argument("--multi-event", action="store_true",
                   help="use all events at the venue instead of this one's sweep")
    _add_sweep_flags(p)
    p.add_argument("--out", default=None, help="write the sweep profile CSV here")
    p.set_defaults(func=_cmd_best_radius)

    p = sub.add_parser("estimate", help="raw attendance for one event or all")
    _add_data_flags(p)
    p.add_argument("--event-id", default=None,
                   help="single event (JSON output); omit for all events (CSV)")
    p.add_argument("--radius", type=float, default=None,
                   help="fixed area radius; omit to run the sweep")
    p.add_argument("--per-user", action="store_true", help="include per-user detail")
    _add_sweep_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("evaluate", help="leave-one-out regression evaluation")
    p.add_argument("--events", required=True)
    p.add_argument("--raw", required=True, help="raw attendance CSV (from estimate/run)")
    _add_regression_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline")
    _add_data_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    _add_sweep_flags(p)
    _add_regression_flags(p)
    p.add_argument("--multi-event", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mcc-filter", type=int, default=None)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, IngestError, NoEventSignal, InsufficientTraining) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
