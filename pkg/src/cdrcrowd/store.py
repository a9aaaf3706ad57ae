"""CDR ingestion, validation, and an indexed immutable store.

The store keeps records in two contiguous layouts: one sorted by
(user, timestamp) for per-user trace queries, one sorted by
(cell, timestamp) for time-window scans over cell sets. Both are built
once at construction; all queries are read-only and safe to run from
multiple workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .domain import Cell, CdrRecord, EventSpec, GeoPoint, ValidationError

CDR_COLUMNS = ["user_id", "mcc", "timestamp", "cell_id"]
CELL_COLUMNS = ["cell_id", "lat", "lon", "radius_m"]
EVENT_COLUMNS = [
    "event_id",
    "venue_id",
    "lat",
    "lon",
    "start_iso8601",
    "end_iso8601",
    "ground_truth",
    "category",
]

# Reject fraction above which the input file is assumed to be the wrong one.
MAX_REJECT_FRACTION = 0.10


class IngestError(ValueError):
    """Raised when an input file cannot be ingested at all."""


@dataclass(frozen=True)
class LoadReport:
    """Outcome of one ingestion: what was read, kept, and rejected why."""

    rows_read: int
    rows_accepted: int
    rejected_bad_timestamp: int = 0
    rejected_bad_mcc: int = 0
    rejected_unknown_cell: int = 0
    rejected_out_of_span: int = 0
    filtered_mcc: int = 0  # dropped by an explicit filter, not counted as rejects

    @property
    def rows_rejected(self) -> int:
        return (
            self.rejected_bad_timestamp
            + self.rejected_bad_mcc
            + self.rejected_unknown_cell
            + self.rejected_out_of_span
        )

    def as_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejected_bad_timestamp": self.rejected_bad_timestamp,
            "rejected_bad_mcc": self.rejected_bad_mcc,
            "rejected_unknown_cell": self.rejected_unknown_cell,
            "rejected_out_of_span": self.rejected_out_of_span,
            "filtered_mcc": self.filtered_mcc,
        }


@dataclass(frozen=True)
class CdrStore:
    """Immutable record collection with per-user and per-cell time indices.

    Records are identified positionally in the user-sorted canonical layout.
    ``cell_labels`` is the full cell catalog id list; cell codes index it.
    """

    user_labels: np.ndarray  # str array, one per distinct user
    cell_labels: tuple[str, ...]  # catalog order; codes index this tuple

    # canonical layout: sorted by (user_code, timestamp)
    user_code: np.ndarray  # int32
    cell_code: np.ndarray  # int32
    mcc: np.ndarray  # int16
    ts: np.ndarray  # int64, seconds UTC
    user_starts: np.ndarray  # int64, len = n_users + 1

    # cell layout: same records sorted by (cell_code, timestamp)
    ts_by_cell: np.ndarray = field(repr=False)
    user_by_cell: np.ndarray = field(repr=False)
    cell_starts: np.ndarray = field(repr=False)  # len = n_cells + 1
    cell_to_canonical: np.ndarray = field(repr=False)  # cell-layout pos -> canonical pos

    @property
    def record_count(self) -> int:
        return int(self.ts.shape[0])

    @property
    def n_users(self) -> int:
        return int(self.user_labels.shape[0])

    def time_span(self) -> tuple[int, int]:
        """(min, max) timestamp over all records; (0, 0) when empty."""
        if self.record_count == 0:
            return (0, 0)
        return (int(self.ts.min()), int(self.ts.max()))

    def cell_codes_for(self, cell_ids: Iterable[str]) -> np.ndarray:
        """Catalog codes for the given ids; unknown ids are ignored."""
        index = {c: i for i, c in enumerate(self.cell_labels)}
        codes = sorted(index[c] for c in set(cell_ids) if c in index)
        return np.asarray(codes, dtype=np.int32)

    def user_code_for(self, user_id: str) -> Optional[int]:
        pos = np.searchsorted(self.user_labels, user_id)
        if pos < self.n_users and self.user_labels[pos] == user_id:
            return int(pos)
        return None

    def user_slice(self, user_code: int) -> tuple[np.ndarray, np.ndarray]:
        """(timestamps, cell codes) of one user's records, time-ordered."""
        a, b = int(self.user_starts[user_code]), int(self.user_starts[user_code + 1])
        return self.ts[a:b], self.cell_code[a:b]

    def iter_records(self) -> Iterable[CdrRecord]:
        labels = self.cell_labels
        for i in range(self.record_count):
            yield CdrRecord(
                user_id=str(self.user_labels[self.user_code[i]]),
                mcc=int(self.mcc[i]),
                timestamp=int(self.ts[i]),
                cell_id=labels[self.cell_code[i]],
            )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def build_store(
    user_ids: Sequence[str] | np.ndarray,
    mcc: np.ndarray,
    ts: np.ndarray,
    cell_ids: Sequence[str] | np.ndarray,
    cells: Sequence[Cell],
) -> CdrStore:
    """Construct the double-indexed store from parallel column arrays.

    All rows must already reference known cells; ingestion handles the dirty
    cases before calling this.
    """
    catalog = tuple(c.cell_id for c in cells)
    if len(set(catalog)) != len(catalog):
        raise ValidationError("cell catalog contains duplicate cell_id values")

    n = len(ts)
    codes, labels = pd.factorize(np.asarray(user_ids, dtype=object), sort=True)
    user_code = codes.astype(np.int32)
    user_labels = np.asarray(labels, dtype=object)

    cell_index = {cid: i for i, cid in enumerate(catalog)}
    cell_code = np.fromiter(
        (cell_index[c] for c in cell_ids), count=n, dtype=np.int32
    )
    mcc = np.asarray(mcc, dtype=np.int16)
    ts = np.asarray(ts, dtype=np.int64)

    order = np.lexsort((ts, user_code))
    user_code = user_code[order]
    cell_code = cell_code[order]
    mcc = mcc[order]
    ts = ts[order]
    user_starts = np.searchsorted(user_code, np.arange(len(user_labels) + 1)).astype(np.int64)

    cell_order = np.lexsort((ts, cell_code)).astype(np.int64)
    ts_by_cell = ts[cell_order]
    user_by_cell = user_code[cell_order]
    cell_starts = np.searchsorted(
        cell_code[cell_order], np.arange(len(catalog) + 1)
    ).astype(np.int64)

    return CdrStore(
        user_labels=_freeze(user_labels),
        cell_labels=catalog,
        user_code=_freeze(user_code),
        cell_code=_freeze(cell_code),
        mcc=_freeze(mcc),
        ts=_freeze(ts),
        user_starts=_freeze(user_starts),
        ts_by_cell=_freeze(ts_by_cell),
        user_by_cell=_freeze(user_by_cell),
        cell_starts=_freeze(cell_starts),
        cell_to_canonical=_freeze(cell_order),
    )


def read_cells(path: str | Path) -> list[Cell]:
    """Load a cell catalog CSV (``cell_id,lat,lon,radius_m``)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CELL_COLUMNS:
            raise IngestError(
                f"{path}: expected header {','.join(CELL_COLUMNS)!r}, got {header!r}"
            )
        cells = []
        seen: set[str] = set()
        for row in reader:
            if not row:
                continue
            cid, lat, lon, radius = row
            if cid in seen:
                raise IngestError(f"{path}: duplicate cell_id {cid!r}")
            seen.add(cid)
            from .domain import GeoPoint

            cells.append(Cell(cid, GeoPoint(float(lat), float(lon)), float(radius)))
    return cells


def write_cells(cells: Sequence[Cell], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CELL_COLUMNS)
        for c in cells:
            writer.writerow([c.cell_id, repr(c.center.lat), repr(c.center.lon), repr(c.coverage_radius)])


def parse_iso8601(text: str) -> int:
    """ISO-8601 timestamp to UTC epoch seconds; naive times are taken as UTC."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise IngestError(f"bad ISO-8601 timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_iso8601(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).isoformat()


def read_events(path: str | Path) -> list[EventSpec]:
    """Load an event catalog CSV; empty ground_truth means none known."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENT_COLUMNS:
            raise IngestError(
                f"{path}: expected header {','.join(EVENT_COLUMNS)!r}, got {header!r}"
            )
        events: list[EventSpec] = []
        seen: set[str] = set()
        for row in reader:
            if not row:
                continue
            eid, venue, lat, lon, start, end, truth, category = row
            if eid in seen:
                raise IngestError(f"{path}: duplicate event_id {eid!r}")
            seen.add(eid)
            events.append(
                EventSpec(
                    event_id=eid,
                    venue_id=venue,
                    center=GeoPoint(float(lat), float(lon)),
                    scheduled_start=parse_iso8601(start),
                    scheduled_end=parse_iso8601(end),
                    ground_truth=float(truth) if truth.strip() else None,
                    category=category,
                )
            )
    return events


def write_events(events: Sequence[EventSpec], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_COLUMNS)
        for ev in events:
            writer.writerow(
                [
                    ev.event_id,
                    ev.venue_id,
                    repr(ev.center.lat),
                    repr(ev.center.lon),
                    format_iso8601(ev.scheduled_start),
                    format_iso8601(ev.scheduled_end),
                    "" if ev.ground_truth is None else repr(ev.ground_truth),
                    ev.category,
                ]
            )


def ingest_cdrs(
    path: str | Path,
    cells: Sequence[Cell],
    declared_span: Optional[tuple[int, int]] = None,
    mcc_filter: Optional[int] = None,
) -> tuple[CdrStore, LoadReport]:
    """Load and validate a CDR CSV, building the indexed store.

    Rows failing validation are rejected and counted by reason: malformed
    timestamp, malformed MCC, unknown cell, or timestamp outside the declared
    span (when one is given). A reject fraction above
    ``MAX_REJECT_FRACTION`` aborts with :class:`IngestError` since it signals
    the wrong file. ``mcc_filter`` keeps only records of one country code;
    filtered rows are counted separately and do not count as rejects.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"cannot read CDR file: {path}")
    with path.open() as fh:
        header = fh.readline().rstrip("\r\n")
    if header.split(",") != CDR_COLUMNS:
        raise IngestError(
            f"{path}: expected header {','.join(CDR_COLUMNS)!r}, got {header!r}"
        )

    frame = pd.read_csv(
        path,
        dtype={"user_id": str, "mcc": str, "timestamp": str, "cell_id": str},
        keep_default_na=False,
        engine="c",
    )
    rows_read = len(frame)
    if rows_read == 0:
        store = build_store([], np.array([], dtype=np.int16), np.array([], dtype=np.int64), [], cells)
        return store, LoadReport(rows_read=0, rows_accepted=0)

    ts_num = pd.to_numeric(frame["timestamp"], errors="coerce")
    bad_ts = ts_num.isna() | (ts_num != np.floor(ts_num))
    mcc_num = pd.to_numeric(frame["mcc"], errors="coerce")
    bad_mcc = ~bad_ts & (mcc_num.isna() | (mcc_num < 0) | (mcc_num > 999) | (mcc_num != np.floor(mcc_num)))

    catalog_ids = pd.Index([c.cell_id for c in cells])
    known = frame["cell_id"].isin(catalog_ids)
    unknown_cell = ~bad_ts & ~bad_mcc & ~known

    out_of_span = pd.Series(False, index=frame.index)
    if declared_span is not None:
        lo, hi = declared_span
        out_of_span = ~bad_ts & ~bad_mcc & known & ((ts_num < lo) | (ts_num > hi))

    rejected = bad_ts | bad_mcc | unknown_cell | out_of_span
    report_kwargs = {
        "rejected_bad_timestamp": int(bad_ts.sum()),
        "rejected_bad_mcc": int(bad_mcc.sum()),
        "rejected_unknown_cell": int(unknown_cell.sum()),
        "rejected_out_of_span": int(out_of_span.sum()),
    }
    n_rejected = int(rejected.sum())
    if n_rejected > MAX_REJECT_FRACTION * rows_read:
        raise IngestError(
            f"{path}: {n_rejected}/{rows_read} rows rejected "
            f"(> {MAX_REJECT_FRACTION:.0%}); this looks like the wrong file. "
            f"Breakdown: {report_kwargs}"
        )

    keep = ~rejected
    filtered_mcc = 0
    if mcc_filter is not None:
        mcc_mask = keep & (mcc_num == mcc_filter)
        filtered_mcc = int(keep.sum() - mcc_mask.sum())
        keep = mcc_mask

    kept = frame.loc[keep]
    store = build_store(
        kept["user_id"].to_numpy(dtype=object),
        mcc_num.loc[keep].to_numpy(dtype=np.int16),
        ts_num.loc[keep].to_numpy(dtype=np.int64),
        kept["cell_id"].to_numpy(dtype=object),
        cells,
    )
    report = LoadReport(
        rows_read=rows_read,
        rows_accepted=store.record_count,
        filtered_mcc=filtered_mcc,
        **report_kwargs,
    )
    return store, report


def write_cdrs(store: CdrStore, path: str | Path) -> None:
    """Write the store back to the CDR CSV format (timestamp order)."""
    order = np.argsort(store.ts, kind="stable")
    users = np.asarray(store.user_labels, dtype=object)[store.user_code[order]]
    cell_ids = np.asarray(store.cell_labels, dtype=object)[store.cell_code[order]]
    frame = pd.DataFrame(
        {
            "user_id": users,
            "mcc": store.mcc[order],
            "timestamp": store.ts[order],
            "cell_id": cell_ids,
        }
    )
    frame.to_csv(path, index=False)


def window_indices(
    store: CdrStore, cells: Iterable[str] | np.ndarray, t0: int, t1: int
) -> np.ndarray:
    """Positions (in the cell layout) of records with cell in ``cells`` and
    t0 <= timestamp < t1. Half-open windows keep hourly bins disjoint."""
    if t0 > t1:
        raise ValueError(f"bad window: t0={t0} > t1={t1}")
    codes = cells if isinstance(cells, np.ndarray) else store.cell_codes_for(cells)
    chunks = []
    for code in codes:
        a, b = int(store.cell_starts[code]), int(store.cell_starts[code + 1])
        lo = a + int(np.searchsorted(store.ts_by_cell[a:b], t0, side="left"))
        hi = a + int(np.searchsorted(store.ts_by_cell[a:b], t1, side="left"))
        if hi > lo:
            chunks.append(np.arange(lo, hi, dtype=np.int64))
    if not chunks:
        return np.array([], dtype=np.int64)
    return np.concatenate(chunks)


def cdrs_in_window(
    store: CdrStore, cells: Iterable[str], t0: int, t1: int
) -> list[CdrRecord]:
    """Records with cell among ``cells`` and t0 <= timestamp < t1, time-ordered."""
    idx = window_indices(store, cells, t0, t1)
    if idx.size == 0:
        return []
    ts = store.ts_by_cell[idx]
    order = np.argsort(ts, kind="stable")
    idx = idx[order]
    canonical_pos = store.cell_to_canonical[idx]
    out = []
    for p in canonical_pos:
        out.append(
            CdrRecord(
                user_id=str(store.user_labels[store.user_code[p]]),
                mcc=int(store.mcc[p]),
                timestamp=int(store.ts[p]),
                cell_id=store.cell_labels[store.cell_code[p]],
            )
        )
    return out


def count_users(store: CdrStore, cells: Iterable[str] | np.ndarray, t0: int, t1: int) -> int:
    """Number of distinct users with at least one record in the window."""
    idx = window_indices(store, cells, t0, t1)
    if idx.size == 0:
        return 0
    return int(np.unique(store.user_by_cell[idx]).size)


def users_in_window(
    store: CdrStore, cells: Iterable[str] | np.ndarray, t0: int, t1: int
) -> np.ndarray:
    """Sorted distinct user codes with at least one record in the window."""
    idx = window_indices(store, cells, t0, t1)
    if idx.size == 0:
        return np.array([], dtype=np.int32)
    return np.unique(store.user_by_cell[idx])
