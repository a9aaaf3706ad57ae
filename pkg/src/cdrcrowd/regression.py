"""Scaling raw attendance to person counts.

The sum of presence probabilities undercounts reality by an unknown
factor (carrier share, phone-usage habits), so it is calibrated against
events with known attendance.  Three calibrations are offered: one
global least-squares line, a local line through the nearest training
points, and a two-regime split for small versus large events.  A
leave-one-out harness measures how well any of them generalizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .attendance import RawAttendance
from .domain import STRUCTURED, EventSpec, ValidationError

OLS_METHOD = "ols"
PIECEWISE_METHOD = "piecewise"
RANGE_METHOD = "range"
METHODS = (OLS_METHOD, PIECEWISE_METHOD, RANGE_METHOD)

DEFAULT_NEIGHBORS = 6
DEFAULT_RANGE_THRESHOLD = 10_000.0


class DegenerateDesign(ValueError):
    """Raised when a least-squares fit has no usable spread in x."""


class InsufficientTraining(ValueError):
    """Raised when too few ground-truth events are available to train on."""


@dataclass(frozen=True)
class TrainingPair:
    """One calibration point: raw estimate x against true person count y."""

    x: float
    y: float
    event_id: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"non-finite training pair ({self.x}, {self.y})")
        if self.y < 0:
            raise ValidationError(f"negative ground truth {self.y}")


@dataclass(frozen=True)
class FitLine:
    slope: float
    intercept: float
    r: float
    r2: float

    def predict(self, x: float) -> float:
        return self.slope * x + self.intercept


def fit_ols(train: Sequence[TrainingPair]) -> FitLine:
    """Least-squares line through the training pairs.

    Needs at least two pairs with distinct x. When y has zero variance
    the correlation is reported as 0 by convention (the line is flat and
    explains nothing that varies).
    """
    if len(train) < 2:
        raise DegenerateDesign(f"need at least 2 training pairs, got {len(train)}")
    x = np.array([p.x for p in train], dtype=float)
    y = np.array([p.y for p in train], dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateDesign("degenerate design: all x values identical")
    sxy = float(dx @ dy)
    syy = float(dy @ dy)
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    r = 0.0 if syy == 0.0 else sxy / math.sqrt(sxx * syy)
    return FitLine(slope=slope, intercept=intercept, r=r, r2=r * r)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation; 0 by convention when either side is constant."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValidationError("need two equal-length samples of size >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return 0.0
    return float(dx @ dy) / denom


def predict_piecewise(
    train: Sequence[TrainingPair], x: float, n: int = DEFAULT_NEIGHBORS
) -> float:
    """Local line through the n training pairs nearest to x.

    Neighbors are chosen by |x_train − x| with event_id breaking ties,
    so the selection is deterministic. When the chosen neighbors all
    share one x value no line exists and their mean y is used. With
    n at or above the training size this is exactly the global fit.
    """
    if len(train) < 2:
        raise DegenerateDesign(f"need at least 2 training pairs, got {len(train)}")
    if n < 1:
        raise ValidationError(f"neighbor count must be positive, got {n}")
    ranked = sorted(train, key=lambda p: (abs(p.x - x), p.event_id))
    neighbors = ranked[: min(n, len(ranked))]
    xs = {p.x for p in neighbors}
    if len(xs) == 1:
        return float(np.mean([p.y for p in neighbors]))
    return fit_ols(neighbors).predict(x)


@dataclass(frozen=True)
class RangeFit:
    """Two-regime calibration around a person-count threshold.

    A regime without enough pairs for its own line is None and routes
    to the global fit.
    """

    threshold_y: float
    global_fit: FitLine
    below: Optional[FitLine]
    above: Optional[FitLine]


def _side_fit(pairs: Sequence[TrainingPair]) -> Optional[FitLine]:
    # A side needs its own viable line; otherwise the global fit stands in.
    if len(pairs) < 2:
        return None
    try:
        return fit_ols(pairs)
    except DegenerateDesign:
        return None


def fit_range(
    train: Sequence[TrainingPair], threshold_y: float = DEFAULT_RANGE_THRESHOLD
) -> RangeFit:
    """Fit the global line plus per-regime lines split by ground truth."""
    global_fit = fit_ols(train)
    below = _side_fit([p for p in train if p.y < threshold_y])
    above = _side_fit([p for p in train if p.y >= threshold_y])
    return RangeFit(
        threshold_y=float(threshold_y), global_fit=global_fit, below=below, above=above
    )


def predict_range(
    train: Sequence[TrainingPair],
    x: float,
    threshold_y: float = DEFAULT_RANGE_THRESHOLD,
) -> float:
    """Two-regime prediction routed by a preliminary global estimate.

    Ground truth is unknown at prediction time, so the query's regime is
    decided by which side of the threshold the global line puts it on;
    the chosen regime's own line (or the global one, if that regime had
    too little data) produces the answer.
    """
    rf = fit_range(train, threshold_y)
    preliminary = rf.global_fit.predict(x)
    side = rf.below if preliminary < rf.threshold_y else rf.above
    fit = side if side is not None else rf.global_fit
    return fit.predict(x)


@dataclass(frozen=True)
class ErrorReport:
    """Accuracy summary over evaluated events.

    Absolute errors cover every evaluated event; percentage errors only
    those with positive ground truth (zero-truth events are counted in
    ``excluded_zero_truth``). The CDF pairs (pct_error, cumulative
    fraction) are sorted and end at 1. Skewness of the percentage
    errors is NaN below 3 usable events.
    """

    mean_abs: float
    median_abs: float
    mean_pct: float
    median_pct: float
    skewness: float
    error_cdf: tuple[tuple[float, float], ...]
    excluded_zero_truth: int = 0


def _adjusted_skewness(values: np.ndarray) -> float:
    n = values.size
    if n < 3:
        return float("nan")
    mean = values.mean()
    m2 = float(((values - mean) ** 2).mean())
    m3 = float(((values - mean) ** 3).mean())
    if m2 == 0.0:
        return float("nan")
    g1 = m3 / m2**1.5
    return g1 * math.sqrt(n * (n - 1)) / (n - 2)


def error_metrics(
    predicted: Sequence[float], truth: Sequence[float]
) -> ErrorReport:
    """Absolute and percentage error summary of predictions vs ground truth."""
    pred = np.asarray(predicted, dtype=float)
    true = np.asarray(truth, dtype=float)
    if pred.shape != true.shape or pred.size == 0:
        raise ValidationError("predicted and truth must be equal-length, nonempty")
    abs_err = np.abs(pred - true)

    positive = true > 0
    excluded = int((~positive).sum())
    pct = abs_err[positive] / true[positive] * 100.0

    if pct.size:
        mean_pct = float(pct.mean())
        median_pct = float(np.median(pct))
        ordered = np.sort(pct)
        cdf = tuple(
            (float(e), float(i + 1) / pct.size) for i, e in enumerate(ordered)
        )
    else:
        mean_pct = float("nan")
        median_pct = float("nan")
        cdf = ()

    return ErrorReport(
        mean_abs=float(abs_err.mean()),
        median_abs=float(np.median(abs_err)),
        mean_pct=mean_pct,
        median_pct=median_pct,
        skewness=_adjusted_skewness(pct),
        error_cdf=cdf,
        excluded_zero_truth=excluded,
    )


@dataclass(frozen=True)
class EventPrediction:
    """One evaluated event in a leave-one-out run."""

    event_id: str
    raw: float
    predicted: float
    truth: Optional[float]
    category: str


@dataclass(frozen=True)
class LooResult:
    predictions: tuple[EventPrediction, ...]
    report: ErrorReport


def _predict(
    train: Sequence[TrainingPair],
    x: float,
    method: str,
    neighbors: int,
    range_threshold: float,
) -> float:
    if method == OLS_METHOD:
        return fit_ols(train).predict(x)
    if method == PIECEWISE_METHOD:
        return predict_piecewise(train, x, n=neighbors)
    if method == RANGE_METHOD:
        return predict_range(train, x, threshold_y=range_threshold)
    raise ValidationError(f"unknown regression method {method!r}; use one of {METHODS}")


def leave_one_out_eval(
    events: Sequence[tuple[RawAttendance, EventSpec]],
    method: str = PIECEWISE_METHOD,
    training_categories: Sequence[str] = (STRUCTURED,),
    neighbors: int = DEFAULT_NEIGHBORS,
    range_threshold: float = DEFAULT_RANGE_THRESHOLD,
) -> LooResult:
    """Evaluate a regression method by leaving each event out in turn.

    The training pool is restricted to events with ground truth whose
    category passes ``training_categories``; everything else (including
    events outside those categories) is still evaluated, just never
    trained on. Events without ground truth get predictions but do not
    enter the error report.
    """
    allowed = set(training_categories)
    pool = {
        ev.event_id: TrainingPair(ra.probability_sum, float(ev.ground_truth), ev.event_id)
        for ra, ev in events
        if ev.ground_truth is not None and ev.category in allowed
    }
    if len(pool) < 3:
        raise InsufficientTraining(
            f"need at least 3 ground-truth events in categories {sorted(allowed)}, "
            f"got {len(pool)}"
        )

    predictions = []
    scored_pred: list[float] = []
    scored_true: list[float] = []
    for ra, ev in events:
        train = [pair for eid, pair in pool.items() if eid != ev.event_id]
        yhat = _predict(train, ra.probability_sum, method, neighbors, range_threshold)
        predictions.append(
            EventPrediction(
                event_id=ev.event_id,
                raw=ra.probability_sum,
                predicted=yhat,
                truth=None if ev.ground_truth is None else float(ev.ground_truth),
                category=ev.category,
            )
        )
        if ev.ground_truth is not None:
            scored_pred.append(yhat)
            scored_true.append(float(ev.ground_truth))

    if not scored_pred:
        raise InsufficientTraining("no evaluated event carries ground truth")
    report = error_metrics(scored_pred, scored_true)
    return LooResult(predictions=tuple(predictions), report=report)
