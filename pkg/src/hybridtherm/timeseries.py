"""
Multivariate building time series.

A :class:`TimeSeriesFrame` is a fixed-step, timestamped table of numeric
columns. Every column carries a :class:`FeatureGroup` tag and a unit; missing
cells are stored as NaN. Frames are immutable: every operation returns a new
frame.

CSV layout
----------
The first column is ``timestamp`` (ISO-8601, UTC). The remaining columns are
numeric. Column metadata lives in a sidecar text file with one
``name=Group,unit[,categorical]`` line per column.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

__all__ = [
    "FeatureGroup",
    "TierKind",
    "ColumnSpec",
    "TimeSeriesFrame",
    "ScenarioSpec",
    "SCENARIOS",
    "Standardizer",
    "load_csv",
    "write_csv",
    "read_schema",
    "write_schema",
    "interpolate_missing",
    "resample",
    "split_train_test",
    "fit_standardizer",
    "apply_standardizer",
    "invert_standardizer",
    "to_minutes",
]


class FeatureGroup(str, enum.Enum):
    DATETIME = "Datetime"
    WEATHER = "Weather"
    BUILDING = "Building"
    ROOM = "Room"
    SIMULATED = "Simulated"
    TARGET = "Target"


class TierKind(str, enum.Enum):
    """Fidelity of the physics sub-model."""

    ARCHETYPE = "Archetype"
    UNCALIBRATED_DETAILED = "UncalibratedDetailed"
    CALIBRATED_DETAILED = "CalibratedDetailed"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    group: FeatureGroup
    unit: str = ""
    categorical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "group", FeatureGroup(self.group))


@dataclass(frozen=True)
class ScenarioSpec:
    """Documentation/sensor scenario: which feature groups a model may read."""

    id: str
    allowed_groups: frozenset
    physics_tier: TierKind


SCENARIOS: dict[str, ScenarioSpec] = {
    "W": ScenarioSpec(
        "W",
        frozenset({FeatureGroup.DATETIME, FeatureGroup.WEATHER}),
        TierKind.ARCHETYPE,
    ),
    "WB": ScenarioSpec(
        "WB",
        frozenset({FeatureGroup.DATETIME, FeatureGroup.WEATHER, FeatureGroup.BUILDING}),
        TierKind.UNCALIBRATED_DETAILED,
    ),
    "WBR": ScenarioSpec(
        "WBR",
        frozenset(
            {
                FeatureGroup.DATETIME,
                FeatureGroup.WEATHER,
                FeatureGroup.BUILDING,
                FeatureGroup.ROOM,
            }
        ),
        TierKind.CALIBRATED_DETAILED,
    ),
}


def to_minutes(timestamps: np.ndarray) -> np.ndarray:
    """Integer minutes since the Unix epoch."""
    return np.asarray(timestamps, dtype="datetime64[m]").astype(np.int64)


def _as_minute_stamps(values) -> np.ndarray:
    if isinstance(values, pd.DatetimeIndex | pd.Series):
        values = pd.DatetimeIndex(values)
        if values.tz is not None:
            values = values.tz_convert("UTC").tz_localize(None)
        return values.values.astype("datetime64[m]")
    return np.asarray(values, dtype="datetime64[m]")


@dataclass(frozen=True, eq=False)
class TimeSeriesFrame:
    """Timestamped column table at a fixed nominal step.

    Parameters
    ----------
    timestamps : array of datetime64[m]
        Strictly increasing UTC instants.
    columns : sequence of ColumnSpec
        Column metadata, in order. Names must be unique.
    values : ndarray, shape (n_rows, n_columns)
        Cell values; NaN marks a missing cell.
    step_minutes : int, optional
        Nominal step. Inferred from the timestamps when omitted.
    """

    timestamps: np.ndarray
    columns: tuple
    values: np.ndarray
    step_minutes: int = 0
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ts = _as_minute_stamps(self.timestamps)
        cols = tuple(self.columns)
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1) if cols else vals.reshape(len(ts), 0)
        if vals.shape != (len(ts), len(cols)):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"{len(ts)} timestamps x {len(cols)} columns"
            )
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate column: {dup[0]}")
        minutes = to_minutes(ts)
        if len(minutes) > 1 and np.any(np.diff(minutes) <= 0):
            raise ValueError("non-monotonic timestamps")
        step = int(self.step_minutes)
        if step <= 0:
            if len(minutes) > 1:
                diffs, counts = np.unique(np.diff(minutes), return_counts=True)
                step = int(diffs[np.argmax(counts)])
            else:
                step = 1
        ts.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "step_minutes", step)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    # -- accessors -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def spec(self, name: str) -> ColumnSpec:
        return self.columns[self._index[name]]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self._index[name]]
        except KeyError:
            raise KeyError(f"unknown column: {name}") from None

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        missing = [n for n in names if n not in self._index]
        if missing:
            raise KeyError(f"unknown column: {missing[0]}")
        return self.values[:, [self._index[n] for n in names]]

    def names_in_groups(self, groups: Iterable) -> list[str]:
        groups = {FeatureGroup(g) for g in groups}
        return [c.name for c in self.columns if c.group in groups]

    @property
    def minutes(self) -> np.ndarray:
        return to_minutes(self.timestamps)

    # -- derived frames --------------------------------------------------
    def select(self, names: Sequence[str]) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self.timestamps,
            [self.spec(n) for n in names],
            self.matrix(names),
            self.step_minutes,
        )

    def drop(self, names: Iterable[str]) -> "TimeSeriesFrame":
        names = set(names)
        return self.select([n for n in self.names if n not in names])

    def rows(self, index) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self.timestamps[index], self.columns, self.values[index], self.step_minutes
        )

    def with_columns(
        self, specs: Sequence[ColumnSpec], values: np.ndarray
    ) -> "TimeSeriesFrame":
        """Append columns, or replace existing ones of the same name."""
        values = np.asarray(values, dtype=np.float64).reshape(self.n_rows, len(specs))
        cols = list(self.columns)
        vals = self.values.copy()
        extra_cols, extra_vals = [], []
        for j, s in enumerate(specs):
            if s.name in self._index:
                i = self._index[s.name]
                cols[i] = s
                vals[:, i] = values[:, j]
            else:
                extra_cols.append(s)
                extra_vals.append(values[:, j])
        if extra_cols:
            vals = np.column_stack([vals] + extra_vals)
        return TimeSeriesFrame(self.timestamps, cols + extra_cols, vals, self.step_minutes)

    def concat_columns(self, other: "TimeSeriesFrame") -> "TimeSeriesFrame":
        if not np.array_equal(self.minutes, other.minutes):
            raise ValueError("frames are not time-aligned")
        return self.with_columns(other.columns, other.values)

    def missing_count(self) -> int:
        return int(np.isnan(self.values).sum())

    def content_hash(self) -> str:
        h = hashlib.sha1()
        h.update(self.minutes.tobytes())
        h.update("|".join(self.names).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()

    def to_pandas(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.values, index=pd.DatetimeIndex(self.timestamps, name="timestamp"),
            columns=self.names,
        )


# ---------------------------------------------------------------------------
# CSV + schema sidecar


def read_schema(path) -> dict[str, ColumnSpec]:
    """Parse a ``name=Group,unit[,categorical]`` sidecar file."""
    specs: dict[str, ColumnSpec] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, _, rhs = line.partition("=")
        parts = [p.strip() for p in rhs.split(",")]
        if not name.strip() or not parts[0]:
            raise ValueError(f"malformed schema line: {raw!r}")
        categorical = len(parts) > 2 and parts[2].lower() in {"categorical", "1", "true"}
        specs[name.strip()] = ColumnSpec(
            name.strip(), FeatureGroup(parts[0]), parts[1] if len(parts) > 1 else "", categorical
        )
    return specs


def write_schema(frame_or_specs, path) -> None:
    specs = frame_or_specs.columns if isinstance(frame_or_specs, TimeSeriesFrame) else frame_or_specs
    lines = ["# column=group,unit[,categorical]"]
    for s in specs:
        line = f"{s.name}={s.group.value},{s.unit}"
        if s.categorical:
            line += ",categorical"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path, schema) -> TimeSeriesFrame:
    """Read a frame from CSV.

    ``schema`` is either a mapping of column name to :class:`ColumnSpec` or
    the path of a sidecar schema file. Unparseable cells become NaN.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    if not isinstance(schema, Mapping):
        schema = read_schema(schema)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh))
    header = [h.strip() for h in header]
    if not header or header[0] != "timestamp":
        raise ValueError("first column must be 'timestamp'")
    names = header[1:]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ValueError(f"duplicate column: {dup[0]}")
    unknown = [n for n in names if n not in schema]
    if unknown:
        raise ValueError(f"column not in schema: {unknown[0]}")

    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df.columns = header
    stamps = pd.to_datetime(df["timestamp"], utc=True)
    values = np.empty((len(df), len(names)))
    for j, n in enumerate(names):
        values[:, j] = pd.to_numeric(df[n].str.strip(), errors="coerce").to_numpy(np.float64)
    return TimeSeriesFrame(_as_minute_stamps(stamps), [schema[n] for n in names], values)


def _format_value(v: float) -> str:
    return "" if np.isnan(v) else format(v, ".12g")


def write_csv(frame: TimeSeriesFrame, path, schema_path=None) -> None:
    """Write ``frame`` as CSV (12 significant digits, blank for missing)."""
    stamps = pd.DatetimeIndex(frame.timestamps).strftime("%Y-%m-%dT%H:%M:%SZ")
    df = pd.DataFrame(frame.values, columns=frame.names)
    df.insert(0, "timestamp", stamps)
    df.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    if schema_path is not None:
        write_schema(frame, schema_path)


# ---------------------------------------------------------------------------
# cleaning and aggregation


def interpolate_missing(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Fill missing cells.

    Continuous columns are interpolated linearly in time; categorical columns
    carry the previous observation forward. Leading and trailing gaps take the
    nearest observed value.
    """
    t = frame.minutes.astype(np.float64)
    out = frame.values.copy()
    for j, spec in enumerate(frame.columns):
        col = out[:, j]
        bad = np.isnan(col)
        if not bad.any():
            continue
        good = ~bad
        if good.sum() < 2:
            raise ValueError(f"column {spec.name!r} is all-missing or has a single value")
        if spec.categorical:
            idx = np.where(good, np.arange(len(col)), -1)
            np.maximum.accumulate(idx, out=idx)
            first = np.argmax(good)
            idx[idx < 0] = first
            out[:, j] = col[idx]
        else:
            out[bad, j] = np.interp(t[bad], t[good], col[good])
    return TimeSeriesFrame(frame.timestamps, frame.columns, out, frame.step_minutes)


def resample(frame: TimeSeriesFrame, step_minutes: int) -> TimeSeriesFrame:
    """Aggregate to a coarser step.

    Bins are aligned to multiples of ``step_minutes`` since the epoch and
    labelled by their start. Continuous columns take the bin mean, categorical
    columns the last observed value in the bin.
    """
    step_minutes = int(step_minutes)
    if step_minutes <= 0 or step_minutes % frame.step_minutes:
        raise ValueError(
            f"step {step_minutes} is not a multiple of the nominal step {frame.step_minutes}"
        )
    if frame.missing_count():
        raise ValueError("resample requires a frame without missing values")
    if step_minutes == frame.step_minutes:
        return frame
    bins = frame.minutes // step_minutes
    starts = np.flatnonzero(np.r_[True, bins[1:] != bins[:-1]])
    ends = np.r_[starts[1:], len(bins)]
    counts = (ends - starts).astype(np.float64)
    sums = np.add.reduceat(frame.values, starts, axis=0)
    out = sums / counts[:, None]
    last = frame.values[ends - 1]
    cat = np.array([c.categorical for c in frame.columns], dtype=bool)
    if cat.any():
        out[:, cat] = last[:, cat]
    stamps = (bins[starts] * step_minutes).astype("datetime64[m]")
    return TimeSeriesFrame(stamps, frame.columns, out, step_minutes)


def split_train_test(frame: TimeSeriesFrame, boundary) -> tuple[TimeSeriesFrame, TimeSeriesFrame]:
    """Rows strictly before ``boundary`` go to train, the rest to test."""
    b = np.datetime64(boundary, "m").astype(np.int64)
    m = frame.minutes
    if len(m) == 0 or b <= m[0] or b > m[-1]:
        raise ValueError("boundary outside the covered range")
    cut = int(np.searchsorted(m, b, side="left"))
    return frame.rows(slice(0, cut)), frame.rows(slice(cut, None))


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    columns: tuple
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(tuple(d["columns"]), np.asarray(d["mean"], float), np.asarray(d["std"], float))


def fit_standardizer(frame: TimeSeriesFrame, columns: Sequence[str]) -> Standardizer:
    """Per-column mean and population standard deviation.

    Constant columns get a unit standard deviation so they map to zeros.
    """
    if frame.n_rows == 0:
        raise ValueError("cannot fit a standardizer on an empty frame")
    X = frame.matrix(list(columns))
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.maximum(1.0, np.abs(mean))
    std = np.where(std <= 1e-12 * scale, 1.0, std)
    return Standardizer(tuple(columns), mean, std)


def apply_standardizer(s: Standardizer, frame: TimeSeriesFrame) -> TimeSeriesFrame:
    Z = s.transform(frame.matrix(list(s.columns)))
    return frame.with_columns([frame.spec(c) for c in s.columns], Z)


def invert_standardizer(s: Standardizer, frame: TimeSeriesFrame) -> TimeSeriesFrame:
    X = s.inverse(frame.matrix(list(s.columns)))
    return frame.with_columns([frame.spec(c) for c in s.columns], X)
