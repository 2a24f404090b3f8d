"""Multivariate time-series container, PCA, window curves, scaling fits.

The on-disk format is a long CSV with a header ``series_id,time,<var1>,...``:
one row per observation, empty cells for missing values.  Rows are grouped
into :class:`Series` by id and sorted by time.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DuplicateTimestampError,
    NumericalError,
    ParseError,
    SchemaError,
)

logger = logging.getLogger("chronoflow.dataset")

__all__ = [
    "ColumnSchema",
    "Series",
    "Dataset",
    "PcaResult",
    "WindowCurve",
    "ScalingFit",
    "load_dataset",
    "run_pca",
    "scores_dataset",
    "sliding_window_mean",
    "fit_temporal_scaling",
]


@dataclass(frozen=True)
class ColumnSchema:
    """Column mapping for :func:`load_dataset`.

    ``variables=None`` means every column other than the series and time
    columns is a variable, in header order.
    """

    series: str = "series_id"
    time: str = "time"
    variables: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Series:
    """One named trajectory: strictly increasing times, one row of values
    (NaN = missing) per observation."""

    series_id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != times.shape[0]:
            raise SchemaError(
                f"series {self.series_id!r}: {times.shape[0]} times but "
                f"{values.shape[0]} value rows")
        if times.size and np.any(np.diff(times) <= 0):
            raise SchemaError(
                f"series {self.series_id!r}: times must be strictly increasing")
        if values.size and np.all(np.isnan(values), axis=1).any():
            raise SchemaError(
                f"series {self.series_id!r}: observation with no values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of series sharing one variable list."""

    series: tuple[Series, ...]
    variable_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        if not self.variable_names:
            raise SchemaError("dataset needs at least one variable")
        ids = [s.series_id for s in self.series]
        if len(set(ids)) != len(ids):
            raise SchemaError("series ids must be unique")
        k = len(self.variable_names)
        for s in self.series:
            if s.values.shape[1] != k:
                raise SchemaError(
                    f"series {s.series_id!r} has {s.values.shape[1]} variables, "
                    f"dataset declares {k}")

    @property
    def variable_count(self) -> int:
        return len(self.variable_names)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """All observations as one matrix.

        Returns (values (n, k), times (n,), series id per row).
        """
        if not self.series:
            k = len(self.variable_names)
            return np.empty((0, k)), np.empty(0), []
        values = np.vstack([s.values for s in self.series])
        times = np.concatenate([s.times for s in self.series])
        ids: list[str] = []
        for s in self.series:
            ids.extend([s.series_id] * len(s))
        return values, times, ids

    def column(self, name: str) -> int:
        try:
            return self.variable_names.index(name)
        except ValueError:
            raise SchemaError(f"no variable named {name!r}") from None


def load_dataset(path, schema: ColumnSchema | None = None) -> Dataset:
    """Read a long-format CSV into a :class:`Dataset`.

    Empty cells become missing values (NaN).  Rows whose time or value cells
    fail to parse are dropped with a logged warning naming the CSV line.
    Duplicate (series, time) pairs raise :class:`DuplicateTimestampError`.
    """
    schema = schema or ColumnSchema()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open dataset file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for required in (schema.series, schema.time):
            if required not in header:
                raise ParseError(f"{path}: missing column {required!r}")
        if schema.variables is None:
            variables = tuple(
                h for h in header if h not in (schema.series, schema.time))
        else:
            variables = tuple(schema.variables)
            for v in variables:
                if v not in header:
                    raise ParseError(f"{path}: missing column {v!r}")
        if not variables:
            raise ParseError(f"{path}: no variable columns")
        series_col = header.index(schema.series)
        time_col = header.index(schema.time)
        var_cols = [header.index(v) for v in variables]

        rows: dict[str, list[tuple[float, list[float]]]] = {}
        order: list[str] = []
        rejected: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                rejected.append(line_no)
                continue
            sid = row[series_col].strip()
            if not sid:
                rejected.append(line_no)
                continue
            try:
                t = float(row[time_col])
            except ValueError:
                rejected.append(line_no)
                continue
            vals = []
            ok = True
            for c in var_cols:
                cell = row[c].strip()
                if not cell:
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    ok = False
                    break
            if not ok:
                rejected.append(line_no)
                continue
            if np.all(np.isnan(vals)):
                rejected.append(line_no)
                continue
            if sid not in rows:
                rows[sid] = []
                order.append(sid)
            rows[sid].append((t, vals))

    if rejected:
        logger.warning("%s: rejected %d malformed row(s) at line(s) %s",
                       path, len(rejected), rejected)

    series = []
    for sid in order:
        obs = rows[sid]
        times = np.array([t for t, _ in obs])
        uniq, counts = np.unique(times, return_counts=True)
        if np.any(counts > 1):
            dup = uniq[counts > 1][0]
            raise DuplicateTimestampError(
                f"series {sid!r}: duplicate observation at time {dup}")
        idx = np.argsort(times, kind="stable")
        values = np.array([obs[i][1] for i in idx])
        series.append(Series(sid, times[idx], values))
    return Dataset(tuple(series), variables)


# ---------------------------------------------------------------------------
# principal components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaResult:
    """Principal components of the stacked observations.

    components has one orthonormal row per component; scores has one row per
    used observation.  row_series / row_times identify those observations.
    Sign convention: the largest-magnitude loading of each component is
    positive.
    """

    components: np.ndarray
    explained_fraction: np.ndarray
    scores: np.ndarray
    mean: np.ndarray
    row_series: tuple[str, ...] = field(default=(), repr=False)
    row_times: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def to_dict(self) -> dict:
        return {
            "components": self.components.tolist(),
            "explained_fraction": self.explained_fraction.tolist(),
            "scores": self.scores.tolist(),
            "mean": self.mean.tolist(),
        }


def run_pca(dataset: Dataset, impute: str = "drop-incomplete") -> PcaResult:
    """Principal component analysis of all observations, equally weighted.

    Parameters
    ----------
    dataset : Dataset
    impute : {"drop-incomplete", "mean-fill"}
        How to handle observations with missing entries: drop them, or fill
        each gap with its variable's mean over the non-missing entries.

    Returns
    -------
    PcaResult
        With all components retained, ``scores @ components + mean``
        reproduces the (imputed) observation matrix to machine precision.
    """
    values, times, ids = dataset.stacked()
    if impute == "drop-incomplete":
        keep = ~np.isnan(values).any(axis=1)
        matrix = values[keep]
        row_times = times[keep]
        row_ids = [i for i, k in zip(ids, keep) if k]
    elif impute == "mean-fill":
        matrix = values.copy()
        for j in range(matrix.shape[1]):
            col = matrix[:, j]
            missing = np.isnan(col)
            if missing.all():
                raise SchemaError(
                    f"variable {dataset.variable_names[j]!r} has no data")
            col[missing] = col[~missing].mean()
        row_times = times
        row_ids = list(ids)
    else:
        raise SchemaError(f"unknown impute strategy {impute!r}")

    if matrix.shape[0] < 2:
        raise SchemaError("need at least 2 usable observations for PCA")

    mean = matrix.mean(axis=0)
    centered = matrix - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    variances = svals ** 2
    total = variances.sum()
    if total <= 0.0:
        raise NumericalError("zero-variance dataset")

    # orient: largest-magnitude loading of each component positive
    for r in range(vt.shape[0]):
        j = np.argmax(np.abs(vt[r]))
        if vt[r, j] < 0:
            vt[r] = -vt[r]
    scores = centered @ vt.T
    return PcaResult(
        components=vt,
        explained_fraction=variances / total,
        scores=scores,
        mean=mean,
        row_series=tuple(row_ids),
        row_times=row_times,
    )


def scores_dataset(dataset: Dataset, result: PcaResult,
                   n_components: int = 2) -> Dataset:
    """Project a dataset onto leading components, as a new Dataset.

    Variables are named pc1, pc2, ...; observations dropped by the PCA's
    impute step are absent from the projection.
    """
    m = min(n_components, result.components.shape[0])
    names = tuple(f"pc{i + 1}" for i in range(m))
    per_series: dict[str, list[tuple[float, np.ndarray]]] = {}
    order: list[str] = []
    for sid, t, row in zip(result.row_series, result.row_times, result.scores):
        if sid not in per_series:
            per_series[sid] = []
            order.append(sid)
        per_series[sid].append((t, row[:m]))
    series = []
    for sid in order:
        obs = sorted(per_series[sid], key=lambda p: p[0])
        times = np.array([t for t, _ in obs])
        values = np.array([v for _, v in obs])
        series.append(Series(sid, times, values))
    return Dataset(tuple(series), names)


# ---------------------------------------------------------------------------
# sliding window means
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowCurve:
    """Window means of y against x at evenly spaced centers."""

    centers: np.ndarray
    means: np.ndarray
    standard_errors: np.ndarray
    window_width: float

    def __post_init__(self):
        if np.any(np.diff(self.centers) <= 0):
            raise SchemaError("window centers must be strictly increasing")
        if not (self.window_width > 0):
            raise SchemaError("window width must be positive")
        if not (len(self.centers) == len(self.means) == len(self.standard_errors)):
            raise SchemaError("window curve arrays must align")

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "means": self.means.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "window_width": self.window_width,
        }


def sliding_window_mean(points, width: float, min_count: int = 5,
                        n_centers: int = 100) -> WindowCurve:
    """Mean of y in windows |x - center| <= width/2.

    Centers are ``n_centers`` evenly spaced values spanning the x-range;
    centers with fewer than ``min_count`` points are omitted.  Standard
    errors use the sample standard deviation (0 for singleton windows).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise SchemaError("points must be an (n, 2) array of (x, y)")
    if pts.shape[0] == 0:
        raise SchemaError("no points")
    if not (width > 0):
        raise SchemaError("width must be positive")
    if min_count < 1:
        raise SchemaError("min_count must be >= 1")
    x = pts[:, 0]
    y = pts[:, 1]
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        centers = np.array([lo])
    else:
        centers = np.linspace(lo, hi, n_centers)
    half = width / 2.0
    out_c, out_m, out_s = [], [], []
    for c in centers:
        mask = np.abs(x - c) <= half
        n = int(mask.sum())
        if n < min_count:
            continue
        sel = y[mask]
        m = float(sel.mean())
        if n >= 2:
            s = float(sel.std(ddof=1) / np.sqrt(n))
        else:
            s = 0.0
        out_c.append(float(c))
        out_m.append(m)
        out_s.append(s)
    if not out_c:
        raise SchemaError(
            f"no window reaches min_count={min_count}; widen the window")
    return WindowCurve(np.array(out_c), np.array(out_m), np.array(out_s),
                       float(width))


# ---------------------------------------------------------------------------
# temporal scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    """Power-law fit y = exp(intercept) * x**exponent over a time window."""

    exponent: float
    intercept: float
    r_squared: float
    window: tuple[float, float]


def fit_temporal_scaling(x_series, y_series, window) -> ScalingFit:
    """Least-squares slope of log y against log x on paired observations.

    Parameters
    ----------
    x_series, y_series : (times, values) pairs of 1-D arrays
        Observations are paired on exactly equal time stamps.
    window : (t_start, t_end)
        Inclusive time interval selecting the pairs to fit.

    Raises on fewer than 3 pairs inside the window or on any non-positive
    paired value there.
    """
    tx, vx = (np.asarray(a, dtype=float) for a in x_series)
    ty, vy = (np.asarray(a, dtype=float) for a in y_series)
    t0, t1 = float(window[0]), float(window[1])
    if not (t0 <= t1):
        raise SchemaError("window start must not exceed its end")
    common, ix, iy = np.intersect1d(tx, ty, return_indices=True)
    inside = (common >= t0) & (common <= t1)
    xs = vx[ix][inside]
    ys = vy[iy][inside]
    if xs.size < 3:
        raise SchemaError(
            f"need >= 3 paired observations in window, found {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise SchemaError("non-positive values inside the scaling window")
    lx = np.log(xs)
    ly = np.log(ys)
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, _, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - design @ coef
    sse = float(resid @ resid)
    sst = float(((ly - ly.mean()) ** 2).sum())
    if sst <= 0.0 or sse < 1e-28 * max(1.0, sst):
        r2 = 1.0
    else:
        r2 = 1.0 - sse / sst
    return ScalingFit(slope, intercept, r2, (t0, t1))
