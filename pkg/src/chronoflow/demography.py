"""Age-structured projection and a regime-switching demographic model.

A Leslie model projects female counts by age class: fertilities on the first
matrix row, survivals on the sub-diagonal.  The hidden-regime model extends
this with N alternative Leslie models, regime transitions driven by an
observed categorical climate path (one column-stochastic matrix per climate
state), and two observation channels tied to the population trajectory:
dated sample counts per year (weights proportional to annual totals) and
aged skeletal finds within a period window (weights proportional to the age
class share of the window's population).

Because sample-year weights are normalized over the whole trajectory, the
emission terms couple the entire hidden path; the likelihood is therefore
marginalized by exact vectorized enumeration of all N^T paths (bounded)
rather than a per-step forward recursion, which would be approximate here.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.special

from .exceptions import (
    NonConvergenceWarning,
    NonIdentifiableWarning,
    NotPrimitiveError,
    NumericalError,
    ParseError,
    SchemaError,
)

logger = logging.getLogger("chronoflow.demography")

__all__ = [
    "LeslieModel",
    "PopulationVector",
    "StableDemography",
    "DemographicHmm",
    "HiddenPath",
    "Observation",
    "AscentConfig",
    "InferenceResult",
    "leslie_matrix",
    "project_population",
    "stable_structure",
    "simulate_hmm",
    "sample_radiocarbon",
    "forward_log_likelihood",
    "infer_transitions",
    "parse_observations",
    "write_observations",
    "hmm_to_dict",
    "hmm_from_dict",
]

_MAX_PATHS = 2 ** 21

_KINDS = ("c14", "skeletal")


@dataclass(frozen=True)
class LeslieModel:
    """Fertility per age class (length J+1) and survival between classes
    (length J), with the age-class width in years."""

    fertilities: np.ndarray
    survivals: np.ndarray
    age_spacing: float = 1.0

    def __post_init__(self):
        f = np.asarray(self.fertilities, dtype=float)
        p = np.asarray(self.survivals, dtype=float)
        if f.ndim != 1 or f.size < 1:
            raise SchemaError("fertilities must be a non-empty vector")
        if p.shape != (f.size - 1,):
            raise SchemaError(
                f"survivals must have length {f.size - 1}, got {p.shape}")
        if np.any(f < 0):
            raise SchemaError("fertilities must be >= 0")
        if np.any((p < 0) | (p > 1)):
            raise SchemaError("survivals must lie in [0, 1]")
        if not (self.age_spacing > 0):
            raise SchemaError("age_spacing must be positive")
        object.__setattr__(self, "fertilities", f)
        object.__setattr__(self, "survivals", p)

    @property
    def n_classes(self) -> int:
        return self.fertilities.size

    def to_dict(self) -> dict:
        return {"fertilities": self.fertilities.tolist(),
                "survivals": self.survivals.tolist(),
                "age_spacing": self.age_spacing}


@dataclass(frozen=True)
class PopulationVector:
    """Nonnegative female count per age class."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or z.size < 1:
            raise SchemaError("population vector must be 1-D and non-empty")
        if np.any(z < 0):
            raise SchemaError("population entries must be >= 0")
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class StableDemography:
    """Spectral summary: per-period growth factor, stable age structure
    (sums to 1), and reproductive values scaled so their dot product with
    the age structure is 1."""

    growth_factor: float
    age_structure: np.ndarray
    reproductive_value: np.ndarray


def leslie_matrix(model: LeslieModel) -> np.ndarray:
    """Assemble the projection matrix: first row fertilities, sub-diagonal
    survivals, zeros elsewhere."""
    j1 = model.n_classes
    a = np.zeros((j1, j1))
    a[0, :] = model.fertilities
    if j1 > 1:
        a[np.arange(1, j1), np.arange(j1 - 1)] = model.survivals
    return a


def project_population(models_per_step, z0) -> np.ndarray:
    """Apply one Leslie matrix per step: z_{t+1} = A_t z_t.

    Returns an array of shape (steps + 1, J + 1) whose first row is z0.
    """
    if isinstance(z0, PopulationVector):
        z0 = z0.z
    z = PopulationVector(np.asarray(z0, dtype=float)).z
    models = list(models_per_step)
    out = np.empty((len(models) + 1, z.size))
    out[0] = z
    for t, model in enumerate(models):
        if model.n_classes != z.size:
            raise SchemaError(
                f"step {t}: model has {model.n_classes} classes, "
                f"population has {z.size}")
        z = leslie_matrix(model) @ z
        out[t + 1] = z
    return out


def _is_primitive(a: np.ndarray) -> bool:
    """Wielandt bound check: some power of the positivity pattern must be
    strictly positive."""
    n = a.shape[0]
    reach = a > 0
    step = reach.copy()
    bound = n * n - 2 * n + 2
    power = 1
    while power < bound and not reach.all():
        step = step @ (a > 0)
        reach = step
        power += 1
    return bool(reach.all())


def _power_iterate(a: np.ndarray, tol: float = 1e-12,
                   max_iter: int = 200_000) -> tuple[float, np.ndarray]:
    x = np.full(a.shape[0], 1.0 / a.shape[0])
    lam = 1.0
    for _ in range(max_iter):
        y = a @ x
        total = y.sum()
        if total <= 0:
            raise NumericalError("power iteration collapsed to zero")
        lam = total / x.sum()
        y = y / total
        if np.abs(a @ y - lam * y).max() <= tol * max(1.0, lam):
            return float(lam), y
        x = y
    raise NumericalError(
        "power iteration did not reach residual 1e-12; dominant eigenvalue "
        "may be nearly tied")


def stable_structure(model: LeslieModel) -> StableDemography:
    """Dominant eigentriple of the projection matrix by power iteration.

    Requires a primitive matrix (some power strictly positive); periodic
    constructions such as fertility only in the last class raise
    NotPrimitiveError.  Residuals of both eigenvector equations are driven
    below 1e-12 relative to the growth factor.
    """
    a = leslie_matrix(model)
    if not _is_primitive(a):
        raise NotPrimitiveError(
            "projection matrix is not primitive; no single stable age "
            "distribution exists")
    lam, u = _power_iterate(a)
    _, v = _power_iterate(a.T)
    v = v / (v @ u)
    return StableDemography(lam, u, v)


# ---------------------------------------------------------------------------
# hidden-regime model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HiddenPath:
    """Regime index per period."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q)
        if q.ndim != 1:
            raise SchemaError("hidden path must be 1-D")
        if q.size and (not np.issubdtype(q.dtype, np.integer) or q.min() < 0):
            raise SchemaError("hidden path entries must be integers >= 0")
        object.__setattr__(self, "q", q.astype(np.int64))


@dataclass(frozen=True)
class Observation:
    """A dated record: period index, channel kind, and channel payload.

    kind "c14": payload {"count": n}, n samples dated to this period.
    kind "skeletal": payload {"age_class": j, "window": [t0, t1]}, one
    individual of age class j recovered from the inclusive period window.
    """

    period: int
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SchemaError(f"kind must be one of {_KINDS}")
        if self.period < 0:
            raise SchemaError("period must be >= 0")
        p = dict(self.payload)
        if self.kind == "c14":
            if set(p) != {"count"} or int(p["count"]) < 0:
                raise SchemaError('c14 payload must be {"count": n >= 0}')
            p["count"] = int(p["count"])
        else:
            if set(p) != {"age_class", "window"}:
                raise SchemaError(
                    'skeletal payload must be {"age_class": j, "window": [t0, t1]}')
            t0, t1 = (int(v) for v in p["window"])
            if not (0 <= t0 <= t1):
                raise SchemaError("window must satisfy 0 <= t0 <= t1")
            p["age_class"] = int(p["age_class"])
            p["window"] = [t0, t1]
        object.__setattr__(self, "payload", p)


@dataclass(frozen=True)
class DemographicHmm:
    """N candidate Leslie models with climate-indexed regime switching.

    transition_matrices is a (K, N, N) stack, one column-stochastic matrix
    per climate state: entry [k, i, j] is the probability of moving to
    regime i from regime j under climate k.  None marks the matrices as
    unknown (to be inferred).  The climate path fixes the model horizon:
    T = len(climate_path).  z0_policy is "stable" (start each hidden path
    at the stable age structure of its initial regime, unit total) or an
    explicit nonnegative vector shared by all paths.
    """

    reference_dynamics: tuple[LeslieModel, ...]
    climate_states: int
    transition_matrices: np.ndarray | None
    climate_path: np.ndarray
    initial_state_distribution: np.ndarray
    z0_policy: object = "stable"

    def __post_init__(self):
        dyn = tuple(self.reference_dynamics)
        if not dyn:
            raise SchemaError("need at least one reference model")
        j1 = dyn[0].n_classes
        if any(m.n_classes != j1 for m in dyn):
            raise SchemaError("all reference models must share the age classes")
        n = len(dyn)
        if self.climate_states < 1:
            raise SchemaError("climate_states must be >= 1")
        w = self.transition_matrices
        if w is not None:
            w = np.asarray(w, dtype=float)
            if w.shape != (self.climate_states, n, n):
                raise SchemaError(
                    f"transition matrices must have shape "
                    f"({self.climate_states}, {n}, {n})")
            if np.any(w < 0):
                raise SchemaError("transition probabilities must be >= 0")
            if np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
                raise SchemaError("transition matrix columns must sum to 1")
        c = np.asarray(self.climate_path)
        if c.ndim != 1 or c.size < 1:
            raise SchemaError("climate path must be a non-empty 1-D sequence")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(c == np.floor(c)):
                raise SchemaError("climate path entries must be integers")
            c = c.astype(np.int64)
        if c.size and (c.min() < 0 or c.max() >= self.climate_states):
            raise SchemaError(
                f"climate path entries must lie in [0, {self.climate_states})")
        p0 = np.asarray(self.initial_state_distribution, dtype=float)
        if p0.shape != (n,) or np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-9:
            raise SchemaError(
                "initial state distribution must be a length-N probability vector")
        policy = self.z0_policy
        if isinstance(policy, str):
            if policy != "stable":
                raise SchemaError('z0_policy must be "stable" or a vector')
        else:
            policy = PopulationVector(np.asarray(policy, dtype=float)).z
            if policy.size != j1:
                raise SchemaError("explicit z0 must have one entry per age class")
        object.__setattr__(self, "reference_dynamics", dyn)
        object.__setattr__(self, "transition_matrices", w)
        object.__setattr__(self, "climate_path", c.astype(np.int64))
        object.__setattr__(self, "initial_state_distribution", p0 / p0.sum())
        object.__setattr__(self, "z0_policy", policy)

    @property
    def n_regimes(self) -> int:
        return len(self.reference_dynamics)

    @property
    def n_classes(self) -> int:
        return self.reference_dynamics[0].n_classes

    @property
    def horizon(self) -> int:
        return self.climate_path.size

    def _matrices(self) -> np.ndarray:
        return np.stack([leslie_matrix(m) for m in self.reference_dynamics])

    def _initial_populations(self) -> np.ndarray:
        """z0 per initial regime, shape (N, J+1)."""
        if isinstance(self.z0_policy, str):
            return np.stack([stable_structure(m).age_structure
                             for m in self.reference_dynamics])
        return np.tile(self.z0_policy, (self.n_regimes, 1))


def simulate_hmm(model: DemographicHmm, T: int,
                 seed: int) -> tuple[HiddenPath, np.ndarray, np.ndarray]:
    """Sample a regime path and project the population along it.

    q_0 follows the initial distribution; q_{t+1} follows column q_t of the
    transition matrix for climate c_t; z_{t+1} = A^(q_t) z_t.  Returns the
    path, the (T, J+1) population sequence, and the per-period totals.
    """
    if T < 1:
        raise SchemaError("T must be >= 1")
    if model.transition_matrices is None:
        raise SchemaError("model has no transition matrices")
    if model.horizon < T:
        raise SchemaError(
            f"climate path has {model.horizon} entries, need >= {T}")
    rng = np.random.default_rng(seed)
    w = model.transition_matrices
    n = model.n_regimes
    q = np.empty(T, dtype=np.int64)
    q[0] = rng.choice(n, p=model.initial_state_distribution)
    for t in range(T - 1):
        q[t + 1] = rng.choice(n, p=w[model.climate_path[t]][:, q[t]])
    mats = model._matrices()
    z = np.empty((T, model.n_classes))
    z[0] = model._initial_populations()[q[0]]
    for t in range(T - 1):
        z[t + 1] = mats[q[t]] @ z[t]
    return HiddenPath(q), z, z.sum(axis=1)


def sample_radiocarbon(annual_totals, n_samples: int,
                       seed: int) -> list[Observation]:
    """Draw dated-sample years with probability proportional to the annual
    totals and aggregate them into per-year count observations."""
    totals = np.asarray(annual_totals, dtype=float)
    if totals.ndim != 1 or totals.size < 1 or np.any(totals < 0):
        raise SchemaError("annual totals must be a nonnegative vector")
    if n_samples < 0:
        raise SchemaError("n_samples must be >= 0")
    s = totals.sum()
    if s <= 0:
        raise SchemaError("annual totals are all zero; nothing to date")
    rng = np.random.default_rng(seed)
    years = rng.choice(totals.size, size=n_samples, p=totals / s)
    counts = np.bincount(years, minlength=totals.size)
    return [Observation(int(t), "c14", {"count": int(c)})
            for t, c in enumerate(counts) if c > 0]


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------

def _validate_observations(model: DemographicHmm, observations):
    t_max = model.horizon
    j1 = model.n_classes
    c14: dict[int, int] = {}
    skeletal: list[tuple[int, int, int]] = []
    for obs in observations:
        if not isinstance(obs, Observation):
            obs = Observation(*obs)
        if obs.period >= t_max:
            raise SchemaError(
                f"observation period {obs.period} outside [0, {t_max})")
        if obs.kind == "c14":
            c14[obs.period] = c14.get(obs.period, 0) + obs.payload["count"]
        else:
            j = obs.payload["age_class"]
            if j >= j1:
                raise SchemaError(f"age class {j} outside [0, {j1})")
            t0, t1 = obs.payload["window"]
            if t1 >= t_max:
                raise SchemaError(
                    f"window end {t1} outside [0, {t_max})")
            skeletal.append((j, t0, t1))
    return c14, skeletal


def forward_log_likelihood(model: DemographicHmm, observations) -> float:
    """Log probability of the observations, marginalized over hidden paths.

    Emissions: each dated sample picks its year with weight proportional to
    that year's total population over the whole horizon's total; each
    skeletal find picks its age class with weight equal to the class share
    of the population summed over its window.  The sum over hidden paths is
    exact (vectorized enumeration); the path count N^T is capped at 2^21.

    Returns 0.0 for an empty observation list and -inf (with a logged
    diagnostic) when every path gives the observations probability zero.
    """
    if model.transition_matrices is None:
        raise SchemaError("model has no transition matrices")
    c14, skeletal = _validate_observations(model, observations)
    if not c14 and not skeletal:
        return 0.0
    n = model.n_regimes
    t_max = model.horizon
    n_paths = n ** t_max
    if n_paths > _MAX_PATHS:
        raise NumericalError(
            f"{n}^{t_max} hidden paths exceed the {_MAX_PATHS} cap; "
            "shorten the climate path or reduce the regime count")

    idx = np.arange(n_paths, dtype=np.int64)
    digits = np.empty((t_max, n_paths), dtype=np.int8)
    for t in range(t_max):
        digits[t] = (idx // n ** (t_max - 1 - t)) % n

    with np.errstate(divide="ignore"):
        log_w = np.log(model.transition_matrices)
        log_p0 = np.log(model.initial_state_distribution)
    log_prior = log_p0[digits[0]].astype(float)
    for t in range(t_max - 1):
        log_prior += log_w[model.climate_path[t], digits[t + 1], digits[t]]

    mats = model._matrices()
    z0s = model._initial_populations()
    z = z0s[digits[0]]
    total_sum = np.zeros(n_paths)
    c14_logw = np.zeros(n_paths)
    m_total = sum(c14.values())
    skel_num = [np.zeros(n_paths) for _ in skeletal]
    skel_den = [np.zeros(n_paths) for _ in skeletal]
    with np.errstate(divide="ignore"):
        for t in range(t_max):
            totals = z.sum(axis=1)
            total_sum += totals
            m = c14.get(t, 0)
            if m > 0:
                c14_logw += m * np.log(totals)
            for o, (j, t0, t1) in enumerate(skeletal):
                if t0 <= t <= t1:
                    skel_num[o] += z[:, j]
                    skel_den[o] += totals
            if t < t_max - 1:
                nxt = np.empty_like(z)
                for r in range(n):
                    mask = digits[t] == r
                    if mask.any():
                        nxt[mask] = z[mask] @ mats[r].T
                z = nxt

        log_emit = np.zeros(n_paths)
        if m_total > 0:
            log_emit = np.where(
                total_sum > 0,
                c14_logw - m_total * np.log(np.maximum(total_sum, 1e-300)),
                -np.inf)
        for o in range(len(skeletal)):
            num, den = skel_num[o], skel_den[o]
            ok = (num > 0) & (den > 0)
            log_emit = log_emit + np.where(
                ok, np.log(np.maximum(num, 1e-300))
                - np.log(np.maximum(den, 1e-300)), -np.inf)

    result = float(scipy.special.logsumexp(log_prior + log_emit))
    if result == -np.inf:
        logger.warning(
            "observations have probability 0 under every hidden path "
            "(for example a dated sample in a period of zero population)")
    return result


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AscentConfig:
    """Knobs for the multi-start projected coordinate ascent."""

    n_starts: int = 4
    max_sweeps: int = 60
    initial_step: float = 0.25
    min_step: float = 1e-3
    profile_points: int = 21

    def __post_init__(self):
        if self.n_starts < 1 or self.max_sweeps < 1:
            raise SchemaError("n_starts and max_sweeps must be >= 1")
        if not (0 < self.min_step <= self.initial_step <= 1):
            raise SchemaError("need 0 < min_step <= initial_step <= 1")
        if self.profile_points < 3:
            raise SchemaError("profile_points must be >= 3")


@dataclass(frozen=True)
class InferenceResult:
    """Fitted model with per-entry profile-likelihood intervals.

    intervals has shape (K, N, N, 2): for each transition entry, the range
    of values keeping the (column-renormalized) log-likelihood within 1.92
    of the maximum.  converged is False when any start exhausted its sweep
    budget before the step size shrank below min_step.
    """

    model: DemographicHmm
    log_likelihood: float
    intervals: np.ndarray
    converged: bool


def _set_entry(w: np.ndarray, k: int, i: int, j: int,
               value: float) -> np.ndarray:
    """Copy of w with entry [k, i, j] = value and column j renormalized by
    scaling the other entries."""
    out = w.copy()
    col = out[k, :, j].copy()
    old = col[i]
    rest = 1.0 - old
    col[i] = value
    if rest > 1e-300:
        col[np.arange(col.size) != i] *= (1.0 - value) / rest
    else:
        fill = (1.0 - value) / max(col.size - 1, 1)
        col[np.arange(col.size) != i] = fill
    out[k, :, j] = np.clip(col, 0.0, 1.0)
    out[k, :, j] /= out[k, :, j].sum()
    return out


def infer_transitions(skeleton: DemographicHmm, observations,
                      config: AscentConfig | None = None,
                      seed: int = 0) -> InferenceResult:
    """Maximum-likelihood transition matrices by coordinate ascent.

    Each start perturbs one entry at a time (up and down by the current
    step, column renormalized), keeps strict improvements, and halves the
    step after a sweep without progress.  Starts: the skeleton's own
    matrices when present, uniform columns, then Dirichlet draws.  Emits
    NonConvergenceWarning when the sweep budget runs out first, and
    NonIdentifiableWarning when every profile interval spans all of [0, 1]
    (the data do not constrain the transitions at all).
    """
    config = config or AscentConfig()
    n = skeleton.n_regimes
    k_states = skeleton.climate_states
    if n > 4 or k_states > 3:
        raise SchemaError("inference supports at most N=4 regimes and K=3 "
                          "climate states")
    obs = list(observations)
    if not obs:
        raise SchemaError("need at least one observation")

    if n == 1:
        w = skeleton.transition_matrices
        if w is None:
            w = np.ones((k_states, 1, 1))
        model = replace(skeleton, transition_matrices=w)
        ll = forward_log_likelihood(model, obs)
        return InferenceResult(model, ll,
                               np.tile([1.0, 1.0], (k_states, 1, 1, 1)),
                               True)

    def ll_of(w: np.ndarray) -> float:
        return forward_log_likelihood(
            replace(skeleton, transition_matrices=w), obs)

    rng = np.random.default_rng(seed)
    starts = []
    if skeleton.transition_matrices is not None:
        starts.append(np.asarray(skeleton.transition_matrices, dtype=float))
    starts.append(np.full((k_states, n, n), 1.0 / n))
    while len(starts) < config.n_starts:
        w = rng.dirichlet(np.ones(n), size=(k_states, n))
        starts.append(np.transpose(w, (0, 2, 1)))

    best_w = None
    best_ll = -np.inf
    converged = True
    for w in starts[: config.n_starts]:
        w = w.copy()
        cur = ll_of(w)
        step = config.initial_step
        sweeps = 0
        while step >= config.min_step and sweeps < config.max_sweeps:
            improved = False
            for k in range(k_states):
                for j in range(n):
                    for i in range(n):
                        for direction in (+1.0, -1.0):
                            val = float(np.clip(w[k, i, j] + direction * step,
                                                0.0, 1.0))
                            if val == w[k, i, j]:
                                continue
                            trial = _set_entry(w, k, i, j, val)
                            trial_ll = ll_of(trial)
                            if trial_ll > cur + 1e-12:
                                w, cur = trial, trial_ll
                                improved = True
            sweeps += 1
            if not improved:
                step *= 0.5
        if step >= config.min_step:
            converged = False
        if cur > best_ll:
            best_ll, best_w = cur, w
    if not converged:
        warnings.warn("coordinate ascent exhausted its sweep budget; "
                      "returning best point found", NonConvergenceWarning)

    grid = np.linspace(0.0, 1.0, config.profile_points)
    intervals = np.empty((k_states, n, n, 2))
    cutoff = best_ll - 1.92
    all_flat = True
    for k in range(k_states):
        for j in range(n):
            for i in range(n):
                lls = np.array([ll_of(_set_entry(best_w, k, i, j, g))
                                for g in grid])
                inside = grid[lls >= cutoff]
                if inside.size == 0:
                    inside = np.array([best_w[k, i, j]])
                intervals[k, i, j] = (inside.min(), inside.max())
                if not (inside.min() <= 0.0 and inside.max() >= 1.0):
                    all_flat = False
    if all_flat:
        warnings.warn("likelihood is flat in every transition entry; the "
                      "observations do not identify the transitions",
                      NonIdentifiableWarning)

    model = replace(skeleton, transition_matrices=best_w)
    return InferenceResult(model, best_ll, intervals, converged)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def parse_observations(path) -> list[Observation]:
    """Read a period,kind,payload CSV; the payload cell holds JSON."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open observations file {path}: {exc}")
    out = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != \
                ["period", "kind", "payload"]:
            raise ParseError(f"{path}: header must be period,kind,payload")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{line_no}: expected 3 columns")
            try:
                period = int(row[0])
                payload = json.loads(row[2])
            except (ValueError, json.JSONDecodeError) as exc:
                raise ParseError(f"{path}:{line_no}: {exc}")
            try:
                out.append(Observation(period, row[1].strip(), payload))
            except SchemaError as exc:
                raise ParseError(f"{path}:{line_no}: {exc}")
    return out


def write_observations(path, observations) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "kind", "payload"])
        for obs in observations:
            writer.writerow([obs.period, obs.kind,
                             json.dumps(obs.payload, sort_keys=True)])


def hmm_to_dict(model: DemographicHmm) -> dict:
    w = model.transition_matrices
    policy = model.z0_policy
    return {
        "reference_dynamics": [m.to_dict() for m in model.reference_dynamics],
        "climate_states": model.climate_states,
        "transition_matrices": None if w is None else w.tolist(),
        "climate_path": model.climate_path.tolist(),
        "initial_state_distribution":
            model.initial_state_distribution.tolist(),
        "z0_policy": policy if isinstance(policy, str) else policy.tolist(),
    }


def hmm_from_dict(data: dict) -> DemographicHmm:
    try:
        dynamics = tuple(
            LeslieModel(d["fertilities"], d["survivals"],
                        float(d.get("age_spacing", 1.0)))
            for d in data["reference_dynamics"])
        w = data.get("transition_matrices")
        return DemographicHmm(
            reference_dynamics=dynamics,
            climate_states=int(data["climate_states"]),
            transition_matrices=None if w is None else np.asarray(w, float),
            climate_path=np.asarray(data["climate_path"]),
            initial_state_distribution=np.asarray(
                data["initial_state_distribution"], float),
            z0_policy=data.get("z0_policy", "stable"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed model object: {exc}")
