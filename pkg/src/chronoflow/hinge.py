"""Continuous piecewise-linear (saw-tooth) fits and event-timing labels.

The fitted model is y = b0 + b1 x + sum_k g_k max(0, x - break_k): linear
segments joined continuously at breakpoints strictly inside the data range.
Breakpoints are chosen by least squares over candidate locations taken from
the data values themselves, refined by coordinate descent from several
seeded starts, and fits of different complexity compare by BIC with
parameter count 2 + 2 * n_breaks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .exceptions import SchemaError

logger = logging.getLogger("chronoflow.hinge")

__all__ = [
    "HingeFit",
    "EventTiming",
    "TimingReport",
    "fit_sawtooth",
    "select_breakpoint_count",
    "classify_event_timing",
    "mg_timing_report",
]

_LABELS = ("before_first", "between", "after_second")


@dataclass(frozen=True)
class HingeFit:
    """Breakpoints with per-segment slope and intercept, plus fit scores.

    Segment j covers [breakpoints[j-1], breakpoints[j]) with the convention
    that a breakpoint belongs to the segment on its right; evaluating
    segment j as intercepts[j] + slopes[j] * x agrees with its neighbors at
    the shared breakpoint to 1e-9.
    """

    breakpoints: np.ndarray
    segment_slopes: np.ndarray
    segment_intercepts: np.ndarray
    sse: float
    bic: float

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        s = np.asarray(self.segment_slopes, dtype=float)
        c = np.asarray(self.segment_intercepts, dtype=float)
        if b.ndim != 1 or s.shape != (b.size + 1,) or c.shape != s.shape:
            raise SchemaError("need n breakpoints and n+1 segment coefficients")
        if b.size > 1 and np.any(np.diff(b) <= 0):
            raise SchemaError("breakpoints must be strictly increasing")
        if self.sse < 0:
            raise SchemaError("sse must be >= 0")
        scale = max(1.0, float(np.abs(s).max()), float(np.abs(c).max()))
        for j, x in enumerate(b):
            left = c[j] + s[j] * x
            right = c[j + 1] + s[j + 1] * x
            if abs(left - right) > 1e-9 * scale:
                raise SchemaError(f"segments discontinuous at breakpoint {x}")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "segment_slopes", s)
        object.__setattr__(self, "segment_intercepts", c)

    @property
    def n_breaks(self) -> int:
        return self.breakpoints.size

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.segment_intercepts[0] + self.segment_slopes[0] * x
        for j, b in enumerate(self.breakpoints):
            seg = self.segment_intercepts[j + 1] + self.segment_slopes[j + 1] * x
            y = np.where(x >= b, seg, y)
        return y

    def to_dict(self) -> dict:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "segment_slopes": self.segment_slopes.tolist(),
            "segment_intercepts": self.segment_intercepts.tolist(),
            "sse": self.sse,
            "bic": self.bic,
        }


@dataclass(frozen=True)
class EventTiming:
    """One event placed relative to a two-breakpoint fit.

    margins are the signed distances event_x - breakpoint, one per
    breakpoint; the label follows the boundary-to-the-right rule.
    """

    event_name: str
    event_x: float
    label: str
    margins: tuple[float, ...]

    def __post_init__(self):
        if self.label not in _LABELS:
            raise SchemaError(f"label must be one of {_LABELS}")

    def to_dict(self) -> dict:
        return {"event_name": self.event_name, "event_x": self.event_x,
                "label": self.label, "margins": list(self.margins)}


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _solve_at_breaks(x: np.ndarray, y: np.ndarray,
                     breaks: np.ndarray) -> tuple[np.ndarray, float]:
    cols = [np.ones_like(x), x]
    for b in breaks:
        cols.append(np.maximum(0.0, x - b))
    design = np.column_stack(cols)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, float(resid @ resid)


def _coef_to_segments(coef: np.ndarray, breaks: np.ndarray):
    k = breaks.size
    slopes = np.empty(k + 1)
    intercepts = np.empty(k + 1)
    slopes[0] = coef[1]
    intercepts[0] = coef[0]
    for j in range(k):
        slopes[j + 1] = slopes[j] + coef[2 + j]
        # continuity at the breakpoint pins the next intercept
        intercepts[j + 1] = intercepts[j] + (slopes[j] - slopes[j + 1]) * breaks[j]
    return slopes, intercepts


def _bic(sse: float, n: int, n_breaks: int, y_scale: float) -> float:
    floor = n * (1e-12 * max(1.0, y_scale)) ** 2
    return n * np.log(max(sse, floor) / n) + (2 + 2 * n_breaks) * np.log(n)


def _descend(x, y, breaks, candidates) -> tuple[np.ndarray, float]:
    """Coordinate descent: replace one breakpoint at a time by the best
    candidate, repeating until no strict improvement."""
    breaks = np.sort(np.asarray(breaks, dtype=float))
    _, best_sse = _solve_at_breaks(x, y, breaks)
    improved = True
    while improved:
        improved = False
        for j in range(breaks.size):
            others = np.delete(breaks, j)
            for c in candidates:
                if np.any(others == c):
                    continue
                trial = np.sort(np.append(others, c))
                _, sse = _solve_at_breaks(x, y, trial)
                if sse < best_sse - 1e-15 * max(1.0, best_sse):
                    best_sse = sse
                    breaks = trial
                    improved = True
    return breaks, best_sse


def fit_sawtooth(points, n_breaks: int, restarts: int = 8,
                 seed: int = 0) -> HingeFit:
    """Least-squares continuous piecewise-linear fit with n_breaks hinges.

    Candidate breakpoints are the distinct interior data x-values; a coarse
    evenly spaced subset seeds the coordinate descent, whose winner is then
    polished against every candidate in its local bracket.  ``restarts``
    descents run from different (seeded) coarse subsets and the best sse
    wins, so results are deterministic per seed and shift along with the
    data under x translation.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise SchemaError("points must be an (n, 2) array of (x, y)")
    if n_breaks < 0:
        raise SchemaError("n_breaks must be >= 0")
    if restarts < 1:
        raise SchemaError("restarts must be >= 1")
    n = pts.shape[0]
    needed = 2 * (n_breaks + 1) + n_breaks
    if n < needed:
        raise SchemaError(
            f"need >= {needed} points for {n_breaks} breakpoints, got {n}")
    x = pts[:, 0]
    y = pts[:, 1]
    uniq = np.unique(x)
    if uniq.size < 2:
        raise SchemaError("x values are all equal; nothing to fit")
    y_scale = float(np.abs(y).max())

    if n_breaks == 0:
        coef, sse = _solve_at_breaks(x, y, np.empty(0))
        slopes, intercepts = _coef_to_segments(coef, np.empty(0))
        return HingeFit(np.empty(0), slopes, intercepts, sse,
                        _bic(sse, n, 0, y_scale))

    interior = uniq[1:-1]
    if interior.size < n_breaks:
        raise SchemaError(
            f"only {interior.size} distinct interior x values for "
            f"{n_breaks} breakpoints")

    n_coarse = min(interior.size, max(48, n_breaks))
    coarse_idx = np.unique(np.linspace(0, interior.size - 1, n_coarse)
                           .round().astype(int))
    coarse = interior[coarse_idx]
    rng = np.random.default_rng(seed)

    best_breaks = None
    best_sse = np.inf
    for r in range(restarts):
        if r == 0:
            pick = np.linspace(0, coarse.size - 1, n_breaks + 2)[1:-1]
            init_idx = np.unique(pick.round().astype(int))
            if init_idx.size < n_breaks:
                init_idx = rng.choice(coarse.size, size=n_breaks,
                                      replace=False)
        else:
            init_idx = rng.choice(coarse.size, size=n_breaks, replace=False)
        breaks, sse = _descend(x, y, coarse[init_idx], coarse)
        if sse < best_sse:
            best_sse = sse
            best_breaks = breaks

    # polish each breakpoint over every candidate between its coarse
    # neighbors; the coarse grid alone is too sparse for tight recovery
    for j in range(n_breaks):
        pos = np.searchsorted(coarse, best_breaks[j])
        lo = coarse[max(pos - 1, 0)]
        hi = coarse[min(pos + 1, coarse.size - 1)]
        local = interior[(interior >= lo) & (interior <= hi)]
        best_breaks, best_sse = _descend(x, y, best_breaks, local)

    coef, sse = _solve_at_breaks(x, y, best_breaks)
    slopes, intercepts = _coef_to_segments(coef, best_breaks)
    return HingeFit(best_breaks, slopes, intercepts, sse,
                    _bic(sse, n, n_breaks, y_scale))


def select_breakpoint_count(points, max_breaks: int, restarts: int = 8,
                            seed: int = 0) -> HingeFit:
    """Fit 0..max_breaks breakpoints and keep the minimum-BIC model."""
    if max_breaks < 0:
        raise SchemaError("max_breaks must be >= 0")
    best = None
    for k in range(max_breaks + 1):
        fit = fit_sawtooth(points, k, restarts=restarts, seed=seed)
        logger.debug("select_breakpoint_count: k=%d sse=%.6g bic=%.6g",
                     k, fit.sse, fit.bic)
        if best is None or fit.bic < best.bic:
            best = fit
    return best


# ---------------------------------------------------------------------------
# event timing
# ---------------------------------------------------------------------------

def classify_event_timing(event_x: float, fit: HingeFit,
                          event_name: str = "event") -> EventTiming:
    """Place an event relative to a two-breakpoint fit.

    A value equal to a breakpoint belongs to the segment on the right, so
    event_x == first break labels between, and event_x == second break
    labels after_second.
    """
    if fit.n_breaks != 2:
        raise SchemaError(
            f"timing labels need exactly 2 breakpoints, fit has {fit.n_breaks}")
    b1, b2 = fit.breakpoints
    x = float(event_x)
    if x < b1:
        label = "before_first"
    elif x < b2:
        label = "between"
    else:
        label = "after_second"
    return EventTiming(event_name, x, label, (x - b1, x - b2))


@dataclass(frozen=True)
class TimingReport:
    """Label counts plus the per-series placements behind them.

    Series with no event are counted as censored rather than dropped;
    events dated outside their series' observed time range appear in
    ``extrapolated`` and are excluded from the counts.
    """

    counts: dict
    timings: tuple[EventTiming, ...]
    extrapolated: tuple[EventTiming, ...]
    censored: int

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "timings": [t.to_dict() for t in self.timings],
            "extrapolated": [t.to_dict() for t in self.extrapolated],
            "censored": self.censored,
        }


def mg_timing_report(dataset: Dataset, events, fit: HingeFit) -> TimingReport:
    """Label every series' event onset by its interpolated score.

    ``events`` maps series id to onset time (a mapping or an iterable of
    (series_id, onset_time) pairs).  The score is the variable named pc1
    when present, else the dataset's first variable, linearly interpolated
    at the onset time.  Onsets outside the observed time range are flagged
    extrapolated (score clamped to the nearest endpoint) and left out of
    the counts; series without an event count as censored.
    """
    if isinstance(events, dict):
        event_map = {str(k): float(v) for k, v in events.items()}
    else:
        event_map = {str(k): float(v) for k, v in events}
    try:
        col = dataset.column("pc1")
    except SchemaError:
        col = 0

    known = {s.series_id for s in dataset.series}
    for sid in event_map:
        if sid not in known:
            logger.warning("event series %r not in dataset; skipped", sid)

    counts = {label: 0 for label in _LABELS}
    timings: list[EventTiming] = []
    extrapolated: list[EventTiming] = []
    censored = 0
    for series in dataset.series:
        if series.series_id not in event_map:
            censored += 1
            continue
        onset = event_map[series.series_id]
        vals = series.values[:, col]
        keep = ~np.isnan(vals)
        if not keep.any():
            logger.warning("series %r has no usable score values; censored",
                           series.series_id)
            censored += 1
            continue
        times = series.times[keep]
        vals = vals[keep]
        score = float(np.interp(onset, times, vals))
        timing = classify_event_timing(score, fit,
                                       event_name=series.series_id)
        if onset < times[0] or onset > times[-1]:
            extrapolated.append(timing)
        else:
            counts[timing.label] += 1
            timings.append(timing)
    return TimingReport(counts, tuple(timings), tuple(extrapolated), censored)
