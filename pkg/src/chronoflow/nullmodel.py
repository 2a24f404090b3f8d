"""Homogeneous-chain null model for clustered score histograms.

Fits a time-invariant transition kernel over a binned 1-D score, regenerates
ensembles of short transient series from it, and tests the pooled values for
multimodality with a bootstrap-calibrated dip statistic.  The point of the
exercise: pooled histograms of many short runs can cluster strongly even
though the generator is a single fixed kernel with a unique stationary law,
so clusters alone say nothing about attractors.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ._kernels import chain_path, dip_batch, dip_statistic_sorted
from .dataset import Dataset, Series
from .exceptions import EmptyEnsembleError, SchemaError
from .markov import (
    StateBinning,
    TransitionKernel,
    estimate_chain,
    kernel_from_dict,
    kernel_to_dict,
)

logger = logging.getLogger("chronoflow.nullmodel")

__all__ = [
    "EnsembleSpec",
    "BimodalityReport",
    "VarianceProfile",
    "fit_conditional_kernel",
    "generate_ensemble",
    "bimodality_test",
    "variance_gradient_demo",
    "reference_configuration",
    "spec_to_dict",
    "spec_from_dict",
]


def _check_distribution(values, weights, what: str):
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.ndim != 1 or v.size == 0 or v.shape != w.shape:
        raise SchemaError(f"{what} needs matching 1-D values and weights")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise SchemaError(f"{what} weights must be nonnegative and sum to 1")
    return v, w / w.sum()


@dataclass(frozen=True)
class EnsembleSpec:
    """How to draw an ensemble: per-series start values and lengths.

    Both distributions are (values, weights) pairs; starts live in value
    space and are mapped through the kernel's binning, lengths count
    observations per series (>= 1).
    """

    n_series: int
    start_distribution: tuple
    length_distribution: tuple
    seed: int

    def __post_init__(self):
        if self.n_series < 0:
            raise SchemaError("n_series must be >= 0")
        sv, sw = _check_distribution(*self.start_distribution,
                                     "start_distribution")
        lv, lw = _check_distribution(*self.length_distribution,
                                     "length_distribution")
        if np.any(lv < 1) or not np.all(lv == np.floor(lv)):
            raise SchemaError("lengths must be integers >= 1")
        object.__setattr__(self, "start_distribution", (sv, sw))
        object.__setattr__(self, "length_distribution",
                           (lv.astype(np.int64), lw))


@dataclass(frozen=True)
class BimodalityReport:
    """Dip statistic with bootstrap p-value and a histogram mode summary."""

    dip_statistic: float
    p_value: float
    histogram: tuple[np.ndarray, np.ndarray]
    modes: tuple[float, ...]

    def __post_init__(self):
        if self.dip_statistic < 0:
            raise SchemaError("dip statistic must be >= 0")
        if not (0.0 <= self.p_value <= 1.0):
            raise SchemaError("p_value must lie in [0, 1]")

    def to_dict(self) -> dict:
        edges, counts = self.histogram
        return {
            "dip_statistic": self.dip_statistic,
            "p_value": self.p_value,
            "histogram": {"edges": edges.tolist(),
                          "counts": counts.tolist()},
            "modes": list(self.modes),
        }


# ---------------------------------------------------------------------------
# kernel fitting and ensemble generation
# ---------------------------------------------------------------------------

def fit_conditional_kernel(series_set, bin_edges) -> TransitionKernel:
    """Bin each series and estimate one shared transition kernel.

    ``series_set`` is a Dataset (first variable used) or an iterable of 1-D
    value arrays.  All values must lie inside the bin range; the binning is
    stored on the returned kernel.
    """
    binning = StateBinning(np.asarray(bin_edges, dtype=float))
    if isinstance(series_set, Dataset):
        arrays = [s.values[:, 0] for s in series_set.series]
    else:
        arrays = [np.asarray(a, dtype=float).ravel() for a in series_set]
    sequences = []
    for a in arrays:
        a = a[~np.isnan(a)]
        if a.size:
            sequences.append(binning.index(a))
    kernel = estimate_chain(sequences, binning.state_count)
    return TransitionKernel(kernel.matrix, binning=binning)


def generate_ensemble(kernel: TransitionKernel,
                      spec: EnsembleSpec) -> Dataset:
    """Simulate ``spec.n_series`` independent chains from the kernel.

    Each series draws its start value and length from the spec's
    distributions on its own spawned random stream, so output is
    deterministic per seed and independent of n_series ordering.  Values are
    bin centers; times are 0, 1, 2, ...
    """
    if kernel.binning is None:
        raise SchemaError("kernel needs a stored binning to map start values")
    if spec.n_series == 0:
        raise EmptyEnsembleError("n_series is 0; nothing to generate")
    start_values, start_weights = spec.start_distribution
    lengths, length_weights = spec.length_distribution
    start_states = kernel.binning.index(start_values)
    centers = kernel.binning.centers
    cdf = np.cumsum(kernel.matrix, axis=1)
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_series)
    series = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        start = start_states[rng.choice(start_values.size, p=start_weights)]
        length = int(lengths[rng.choice(lengths.size, p=length_weights)])
        states = chain_path(cdf, int(start), rng.random(length - 1))
        values = centers[states]
        series.append(Series(f"sim-{i:03d}", np.arange(length, dtype=float),
                             values))
    return Dataset(tuple(series), ("value",))


# ---------------------------------------------------------------------------
# bimodality
# ---------------------------------------------------------------------------

def _histogram_modes(values: np.ndarray) -> tuple[tuple, tuple[float, ...]]:
    """Freedman-Diaconis histogram plus trough-separated peak locations.

    Two peaks count as distinct modes only when some bin between them drops
    below half the lower peak.  Each mode location is the mean of the
    observations inside the peak bin and its immediate neighbors, which
    refines the coarse bin-center estimate.
    """
    counts, edges = np.histogram(values, bins="fd")
    n_bins = counts.size
    padded = np.concatenate([[-1], counts, [-1]])
    # strict rise on the left keeps only the first bin of a plateau
    peaks = [i for i in range(n_bins)
             if counts[i] > 0 and padded[i] < counts[i] >= padded[i + 2]]

    accepted: list[int] = []
    for p in sorted(peaks, key=lambda i: (-counts[i], i)):
        separated = True
        for q in accepted:
            lo, hi = min(p, q), max(p, q)
            trough = counts[lo + 1:hi].min() if hi - lo > 1 else counts[lo:hi + 1].min()
            if trough >= 0.5 * min(counts[p], counts[q]):
                separated = False
                break
        if separated:
            accepted.append(p)

    modes = []
    for p in sorted(accepted):
        lo_edge = edges[max(p - 1, 0)]
        hi_edge = edges[min(p + 2, n_bins)]
        sel = values[(values >= lo_edge) & (values <= hi_edge)]
        modes.append(float(sel.mean()))
    return (edges, counts), tuple(modes)


def bimodality_test(values, n_bootstrap: int = 1000,
                    seed: int = 0) -> BimodalityReport:
    """Hartigan dip statistic with a uniform-null bootstrap p-value.

    The p-value is the add-one fraction of >= 1000 bootstrap replicates
    (uniform samples of the same size) whose dip reaches the observed one.
    The dip itself depends only on the shape of the empirical distribution,
    so it is invariant under increasing affine transforms of the values.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 10:
        raise SchemaError(f"need >= 10 values, got {v.size}")
    if np.any(np.isnan(v)):
        raise SchemaError("values must not contain NaN")
    if n_bootstrap < 1000:
        raise SchemaError("n_bootstrap must be >= 1000")
    dip = float(dip_statistic_sorted(np.sort(v)))
    rng = np.random.default_rng(seed)
    boots = np.asarray(dip_batch(rng.random((n_bootstrap, v.size))))
    p = (1.0 + float((boots >= dip).sum())) / (n_bootstrap + 1.0)
    histogram, modes = _histogram_modes(v)
    return BimodalityReport(dip, p, histogram, modes)


# ---------------------------------------------------------------------------
# variance-gradient demonstration
# ---------------------------------------------------------------------------

_PROFILE_KINDS = ("step", "ramp")


@dataclass(frozen=True)
class VarianceProfile:
    """Position-dependent step variance, from a fixed two-entry catalog.

    kind "step": variance ``left`` below ``split``, ``right`` at or above.
    kind "ramp": linear from ``v0`` at ``x0`` to ``v1`` at ``x1``, clamped
    outside [x0, x1].  All variance levels must be positive.
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise SchemaError(
                f"unknown profile kind {self.kind!r}; catalog: {_PROFILE_KINDS}")
        p = dict(self.params)
        if self.kind == "step":
            needed = {"split", "left", "right"}
            if set(p) != needed:
                raise SchemaError(f"step profile needs params {sorted(needed)}")
            if p["left"] <= 0 or p["right"] <= 0:
                raise SchemaError("step variances must be positive")
        else:
            needed = {"x0", "x1", "v0", "v1"}
            if set(p) != needed:
                raise SchemaError(f"ramp profile needs params {sorted(needed)}")
            if p["x1"] <= p["x0"]:
                raise SchemaError("ramp needs x1 > x0")
            if p["v0"] <= 0 or p["v1"] <= 0:
                raise SchemaError("ramp variances must be positive")
        object.__setattr__(self, "params", p)

    def variance(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "step":
            return np.where(x < p["split"], p["left"], p["right"])
        frac = np.clip((x - p["x0"]) / (p["x1"] - p["x0"]), 0.0, 1.0)
        return p["v0"] + frac * (p["v1"] - p["v0"])


def variance_gradient_demo(mean_step: float, variance_profile: VarianceProfile,
                           steps: int, n_series: int,
                           seed: int) -> tuple[Dataset, BimodalityReport]:
    """Constant-drift walks whose step variance varies over space.

    Every series starts at 0 and evolves x += mean_step + sqrt(var(x)) * z
    with standard normal z.  Returns the ensemble and the bimodality report
    of all pooled positions: where the variance is low, walkers creep and
    pile up density; where it is high, they spread thin.  Clusters appear
    with no attractor anywhere in the dynamics.
    """
    if n_series == 0:
        raise EmptyEnsembleError("n_series is 0; nothing to simulate")
    if n_series < 0:
        raise SchemaError("n_series must be >= 0")
    if steps < 1:
        raise SchemaError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((n_series, steps))
    positions = np.empty((n_series, steps + 1))
    positions[:, 0] = 0.0
    for t in range(steps):
        x = positions[:, t]
        amp = np.sqrt(variance_profile.variance(x))
        positions[:, t + 1] = x + mean_step + amp * normals[:, t]
    times = np.arange(steps + 1, dtype=float)
    series = tuple(Series(f"walk-{i:03d}", times, positions[i])
                   for i in range(n_series))
    dataset = Dataset(series, ("x",))
    report = bimodality_test(positions.ravel(), seed=seed + 1)
    return dataset, report


# ---------------------------------------------------------------------------
# shipped reference configuration
# ---------------------------------------------------------------------------

def spec_to_dict(spec: EnsembleSpec) -> dict:
    sv, sw = spec.start_distribution
    lv, lw = spec.length_distribution
    return {
        "n_series": spec.n_series,
        "start_distribution": {"values": sv.tolist(), "weights": sw.tolist()},
        "length_distribution": {"values": lv.tolist(), "weights": lw.tolist()},
        "seed": spec.seed,
    }


def spec_from_dict(data: dict) -> EnsembleSpec:
    try:
        sd = data["start_distribution"]
        ld = data["length_distribution"]
        return EnsembleSpec(
            n_series=int(data["n_series"]),
            start_distribution=(sd["values"], sd["weights"]),
            length_distribution=(ld["values"], ld["weights"]),
            seed=int(data["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed ensemble spec: {exc}")


def reference_configuration() -> tuple[TransitionKernel, EnsembleSpec]:
    """The shipped drift kernel and transient-ensemble spec.

    A 12-state binned kernel over [-3, 3] with slow rightward drift whose
    spread shrinks toward the top bins, plus 30 series of mixed short and
    long lengths started in the low bins.  Running the standard pipeline on
    it (generate, pool, test) produces significantly bimodal values from a
    kernel whose stationary law exists and is unique.
    """
    text = resources.files("chronoflow").joinpath(
        "data/nullmodel_reference.json").read_text(encoding="utf-8")
    data = json.loads(text)
    kernel = kernel_from_dict(data["kernel"])
    spec = spec_from_dict(data["ensemble"])
    return kernel, spec


def reference_configuration_dict() -> dict:
    kernel, spec = reference_configuration()
    return {"kernel": kernel_to_dict(kernel), "ensemble": spec_to_dict(spec)}
