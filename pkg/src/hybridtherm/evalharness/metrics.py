"""Error metrics and per-month breakdowns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..timeseries import TimeSeriesFrame

MAPE_GUARD = 0.5


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("metrics need at least one value")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mape(y, yhat) -> float:
    """Mean absolute percentage error as a fraction.

    Every |y| must be at least 0.5 (Celsius readings near zero make the
    ratio meaningless).
    """
    y, yhat = _pair(y, yhat)
    if np.any(np.abs(y) < MAPE_GUARD):
        raise ValueError(f"MAPE undefined: |y| < {MAPE_GUARD} present")
    return float(np.mean(np.abs(y - yhat) / np.abs(y)))


@dataclass(frozen=True)
class RoomMetrics:
    mae: float
    mape: float
    rmse: float
    std_ratio: float = float("nan")


@dataclass(frozen=True)
class MetricReport:
    """Per-room and room-averaged errors with run metadata.

    ``mape`` is a fraction; ``std_ratio`` is the room-averaged ratio of the
    prediction standard deviation to the target standard deviation.
    """

    per_room: dict
    mae: float
    mape: float
    rmse: float
    std_ratio: float = float("nan")
    monthly: "MonthlyBreakdown | None" = None
    metadata: dict = field(default_factory=dict)


def evaluate_arrays(Y: np.ndarray, P: np.ndarray, rooms, metadata: dict | None = None,
                    timestamps=None) -> MetricReport:
    """Score predictions ``P`` against targets ``Y``, both shaped (T, n_rooms).

    With ``timestamps`` the report also carries a monthly breakdown.
    """
    Y = np.asarray(Y, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if Y.ndim != 2 or Y.shape != P.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {P.shape}")
    rooms = list(rooms)
    if len(rooms) != Y.shape[1]:
        raise ValueError("one room name per column required")
    per = {}
    for k, room in enumerate(rooms):
        sy = Y[:, k].std()
        ratio = float(P[:, k].std() / sy) if sy > 0 else float("nan")
        per[room] = RoomMetrics(mae(Y[:, k], P[:, k]), mape(Y[:, k], P[:, k]), rmse(Y[:, k], P[:, k]), ratio)
    monthly = None
    if timestamps is not None:
        monthly = _monthly(np.asarray(timestamps), Y, P, rooms)
    vals = list(per.values())
    return MetricReport(
        per,
        float(np.mean([m.mae for m in vals])),
        float(np.mean([m.mape for m in vals])),
        float(np.mean([m.rmse for m in vals])),
        float(np.mean([m.std_ratio for m in vals])),
        monthly,
        dict(metadata or {}),
    )


@dataclass(frozen=True)
class MonthlyBreakdown:
    """One report per calendar month, keyed ``"YYYY-MM"``.

    ``skipped`` lists months inside the covered span that had no rows.
    """

    reports: dict
    skipped: tuple = ()

    def mape_by_month(self) -> dict:
        return {m: r.mape for m, r in self.reports.items()}


def _monthly(ts: np.ndarray, Y: np.ndarray, P: np.ndarray, rooms) -> MonthlyBreakdown:
    months = ts.astype("datetime64[M]")
    reports, skipped = {}, []
    if len(months):
        for mo in np.arange(months.min(), months.max() + 1):
            sel = months == mo
            if not sel.any():
                skipped.append(str(mo))
                continue
            reports[str(mo)] = evaluate_arrays(Y[sel], P[sel], rooms,
                                               {"month": str(mo), "n_rows": int(sel.sum())})
    return MonthlyBreakdown(reports, tuple(skipped))


def monthly_breakdown(y: TimeSeriesFrame, yhat: TimeSeriesFrame, rooms=None) -> MonthlyBreakdown:
    """Metrics within each calendar month, averaged across rooms.

    Columns are matched by position and named after ``rooms`` (default: the
    columns of ``y``). Months are not pooled: each gets its own report.
    """
    if not np.array_equal(y.minutes, yhat.minutes):
        raise ValueError("frames are not time-aligned")
    if y.values.shape[1] != yhat.values.shape[1]:
        raise ValueError("frames have different column counts")
    return _monthly(y.timestamps, y.values, yhat.values, rooms or y.names)
