"""Small construction utilities shared across the test modules."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from cdrcrowd.domain import Cell, GeoPoint
from cdrcrowd.geo import offset_point
from cdrcrowd.store import CdrStore, build_store

# All hand-built fixtures lay cells out around this point.
BASE = GeoPoint(45.0, 7.0)


def cell_at(cell_id: str, east_m: float, north_m: float, coverage: float,
            base: GeoPoint = BASE) -> Cell:
    return Cell(cell_id, offset_point(base, east_m, north_m), coverage)


def make_store(rows: Sequence[tuple[str, int, int, str]],
               cells: Sequence[Cell]) -> CdrStore:
    """Store from (user_id, mcc, timestamp, cell_id) tuples."""
    users = np.array([r[0] for r in rows], dtype=object)
    mcc = np.array([r[1] for r in rows], dtype=np.int16)
    ts = np.array([r[2] for r in rows], dtype=np.int64)
    cids = np.array([r[3] for r in rows], dtype=object)
    return build_store(users, mcc, ts, cids, list(cells))


def brute_force_window(rows: Sequence[tuple[str, int, int, str]],
                       cell_ids: set[str], t0: int, t1: int) -> list[tuple]:
    """Reference filter for window queries, as plain row tuples."""
    return [r for r in rows if r[3] in cell_ids and t0 <= r[2] < t1]
