"""Finite-state chains: estimation, simulation, stationary laws, master
equation, embeddability, and an order test for coarse-grained sequences.

Transition kernels are row-stochastic: ``matrix[i, j]`` is the probability of
moving from state i to state j over one time step.  Rate matrices follow the
same row convention with zero row sums, so the master equation reads
``dp/dt = Q^T p`` for a column of occupation probabilities p.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from ._kernels import chain_path
from .exceptions import (
    NoUniqueStationaryError,
    NumericalError,
    SchemaError,
)

logger = logging.getLogger("chronoflow.markov")

__all__ = [
    "StateBinning",
    "TransitionKernel",
    "RateMatrix",
    "EmbeddabilityVerdict",
    "MasterEquationTrajectory",
    "MarkovOrderReport",
    "estimate_chain",
    "simulate_chain",
    "stationary_distribution",
    "integrate_master_equation",
    "check_embeddability",
    "coarse_grain",
    "test_markov_order",
    "random_walk",
    "kernel_to_dict",
    "kernel_from_dict",
    "rate_matrix_to_dict",
    "rate_matrix_from_dict",
]

_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class StateBinning:
    """Strictly increasing bin edges mapping values to state indices.

    Bins are half-open [e_i, e_{i+1}) except the last, which is closed so the
    top edge itself is a valid value.
    """

    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise SchemaError("binning needs at least 2 edges")
        if np.any(np.diff(edges) <= 0):
            raise SchemaError("bin edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @property
    def state_count(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def index(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.size and (v.min() < self.edges[0] or v.max() > self.edges[-1]):
            raise SchemaError(
                f"values outside binning range [{self.edges[0]}, {self.edges[-1]}]")
        idx = np.searchsorted(self.edges, v, side="right") - 1
        return np.clip(idx, 0, self.state_count - 1).astype(np.int64)


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic one-step transition matrix."""

    matrix: np.ndarray
    binning: StateBinning | None = None
    time_step: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise SchemaError("kernel matrix must be square and non-empty")
        if np.any(m < -_ROW_SUM_TOL) or np.any(m > 1 + _ROW_SUM_TOL):
            raise SchemaError("kernel entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > _ROW_SUM_TOL):
            raise SchemaError("kernel rows must sum to 1 within 1e-12")
        if self.binning is not None and self.binning.state_count != m.shape[0]:
            raise SchemaError("binning state count must match matrix size")
        if not (self.time_step > 0):
            raise SchemaError("time_step must be positive")
        object.__setattr__(self, "matrix", m)

    @property
    def states(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class RateMatrix:
    """Continuous-time generator: off-diagonals >= 0, zero row sums."""

    rates: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rates, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise SchemaError("rate matrix must be square and non-empty")
        off = q.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0):
            raise SchemaError("off-diagonal rates must be >= 0")
        if np.any(np.abs(q.sum(axis=1)) > _ROW_SUM_TOL * max(1.0, np.abs(q).max())):
            raise SchemaError("rate matrix rows must sum to 0")
        object.__setattr__(self, "rates", q)

    @property
    def states(self) -> int:
        return self.rates.shape[0]


# ---------------------------------------------------------------------------
# estimation and simulation
# ---------------------------------------------------------------------------

def estimate_chain(sequences, state_count: int,
                   prior_count: float = 0.0) -> TransitionKernel:
    """Maximum-likelihood transition kernel with an additive prior.

    matrix[i, j] = (count[i, j] + prior) / (sum_j count[i, j] + S * prior).
    Rows never observed keep a self-loop of 1 when the prior is zero.

    Parameters
    ----------
    sequences : iterable of integer state sequences
    state_count : number of states S; all symbols must lie in [0, S)
    prior_count : additive pseudo-count, >= 0
    """
    if state_count < 1:
        raise SchemaError("state_count must be >= 1")
    if prior_count < 0:
        raise SchemaError("prior_count must be >= 0")
    counts = np.zeros((state_count, state_count))
    n_transitions = 0
    for seq in sequences:
        s = np.asarray(seq)
        if s.size == 0:
            continue
        if not np.issubdtype(s.dtype, np.integer):
            if not np.all(s == np.floor(s)):
                raise SchemaError("state sequences must be integers")
            s = s.astype(np.int64)
        if s.min() < 0 or s.max() >= state_count:
            raise SchemaError(
                f"state symbol outside [0, {state_count}) in sequence")
        if s.size < 2:
            continue
        flat = s[:-1] * state_count + s[1:]
        counts += np.bincount(flat, minlength=state_count ** 2).reshape(
            state_count, state_count)
        n_transitions += s.size - 1
    if n_transitions == 0:
        raise SchemaError("no transitions observed")
    totals = counts.sum(axis=1)
    matrix = np.empty_like(counts)
    for i in range(state_count):
        denom = totals[i] + state_count * prior_count
        if denom == 0.0:
            matrix[i] = 0.0
            matrix[i, i] = 1.0
        else:
            matrix[i] = (counts[i] + prior_count) / denom
    return TransitionKernel(matrix)


def simulate_chain(kernel: TransitionKernel, start_state: int, steps: int,
                   seed: int) -> np.ndarray:
    """Sample a path of ``steps`` transitions; deterministic per seed.

    Returns an int64 array of length steps + 1 beginning at start_state.
    """
    if not (0 <= start_state < kernel.states):
        raise SchemaError(f"start_state {start_state} outside [0, {kernel.states})")
    if steps < 0:
        raise SchemaError("steps must be >= 0")
    cdf = np.cumsum(kernel.matrix, axis=1)
    uniforms = np.random.default_rng(seed).random(steps)
    return chain_path(cdf, start_state, uniforms)


def stationary_distribution(kernel: TransitionKernel) -> np.ndarray:
    """The unique stationary law pi with pi P = pi.

    Raises NoUniqueStationaryError when the positive-entry digraph is not
    strongly connected.  The returned vector satisfies the balance equation
    with infinity-norm residual below 1e-10.
    """
    p = kernel.matrix
    s = kernel.states
    graph = scipy.sparse.csr_matrix((p > 0).astype(np.int8))
    n_comp, _ = scipy.sparse.csgraph.connected_components(
        graph, directed=True, connection="strong")
    if n_comp != 1:
        raise NoUniqueStationaryError(
            f"kernel is reducible ({n_comp} strongly connected components)")
    a = np.vstack([p.T - np.eye(s), np.ones((1, s))])
    b = np.zeros(s + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = np.abs(pi @ p - pi).max()
    if residual >= 1e-10:
        raise NumericalError(
            f"stationary solve residual {residual:.3e} exceeds 1e-10")
    return pi


# ---------------------------------------------------------------------------
# master equation
# ---------------------------------------------------------------------------

class MasterEquationTrajectory(NamedTuple):
    times: np.ndarray
    probabilities: np.ndarray


def integrate_master_equation(rates: RateMatrix, p0, t_final: float,
                              dt: float) -> MasterEquationTrajectory:
    """Integrate dp/dt = Q^T p with classic fourth-order Runge-Kutta.

    The state is renormalized to total probability 1 after every step, so
    conservation holds to well below 1e-9 at every stored time.  Requires
    dt * max|rate| < 0.1 for stability.
    """
    q = rates.rates
    p = np.asarray(p0, dtype=float).copy()
    if p.shape != (rates.states,):
        raise SchemaError("p0 length must match the rate matrix")
    if np.any(p < 0) or abs(p.sum() - 1.0) > _ROW_SUM_TOL:
        raise SchemaError("p0 must be a probability vector")
    if not (dt > 0):
        raise SchemaError("dt must be positive")
    if t_final < 0:
        raise SchemaError("t_final must be >= 0")
    max_rate = np.abs(q).max()
    if dt * max_rate >= 0.1:
        raise SchemaError(
            f"unstable step: dt * max|rate| = {dt * max_rate:.3g} >= 0.1")
    qt = q.T
    n = max(int(np.ceil(t_final / dt - 1e-12)), 0)
    times = np.empty(n + 1)
    probs = np.empty((n + 1, rates.states))
    times[0] = 0.0
    probs[0] = p
    t = 0.0
    for i in range(n):
        step = min(dt, t_final - t)
        k1 = qt @ p
        k2 = qt @ (p + 0.5 * step * k1)
        k3 = qt @ (p + 0.5 * step * k2)
        k4 = qt @ (p + step * k3)
        p = p + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
        t = min(t + step, t_final)
        times[i + 1] = t
        probs[i + 1] = p
    return MasterEquationTrajectory(times, probs)


# ---------------------------------------------------------------------------
# embeddability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddabilityVerdict:
    """Outcome of the generator-existence check for a discrete kernel.

    status is one of "embeddable", "not_embeddable", "indeterminate";
    generator is populated only when embeddable.
    """

    status: str
    generator: RateMatrix | None = None
    reason: str = ""

    @property
    def is_embeddable(self) -> bool:
        return self.status == "embeddable"


def check_embeddability(kernel: TransitionKernel,
                        tolerance: float = 1e-8) -> EmbeddabilityVerdict:
    """Decide whether the kernel is exp(Q) for a valid generator Q.

    The candidate is the principal matrix logarithm (inverse scaling and
    squaring).  Embeddable means: the principal log is real, its off-diagonal
    entries are >= -tolerance (negative dust is clipped to zero in the
    returned generator), and exponentiating the rebuilt generator reproduces
    the kernel within 1e-6.  A 2x2 kernel with non-positive determinant is
    rejected outright by the exact determinant criterion; any kernel with a
    non-positive determinant has no real generator since det exp(Q) =
    exp(tr Q) > 0.  Numerical failure of the logarithm, or a round-trip
    mismatch, yields "indeterminate" rather than a guess.
    """
    if tolerance < 0:
        raise SchemaError("tolerance must be >= 0")
    p = kernel.matrix
    s = kernel.states
    if s == 1:
        return EmbeddabilityVerdict("embeddable", RateMatrix(np.zeros((1, 1))))
    det = float(np.linalg.det(p))
    if det <= 0.0:
        why = "determinant is non-positive"
        if s == 2:
            why = f"2x2 determinant criterion: det = {det:.6g} <= 0"
        return EmbeddabilityVerdict("not_embeddable", reason=why)
    try:
        log_p, _err = scipy.linalg.logm(p, disp=False)
    except Exception as exc:  # scipy raises LinAlgError and friends
        return EmbeddabilityVerdict(
            "indeterminate", reason=f"matrix logarithm failed: {exc}")
    log_p = np.asarray(log_p)
    if not np.all(np.isfinite(log_p.real)) or not np.all(np.isfinite(log_p.imag)):
        return EmbeddabilityVerdict(
            "indeterminate", reason="matrix logarithm did not converge")
    scale = max(1.0, float(np.abs(log_p.real).max()))
    if np.abs(log_p.imag).max() > 1e-9 * scale:
        return EmbeddabilityVerdict(
            "not_embeddable", reason="principal logarithm is not real")
    candidate = log_p.real / kernel.time_step
    off = candidate.copy()
    np.fill_diagonal(off, np.inf)
    min_off = float(off.min())
    if min_off < -tolerance:
        return EmbeddabilityVerdict(
            "not_embeddable",
            reason=f"off-diagonal log entry {min_off:.3e} below -tolerance")
    rebuilt = np.clip(candidate, 0.0, None)
    np.fill_diagonal(rebuilt, 0.0)
    np.fill_diagonal(rebuilt, -rebuilt.sum(axis=1))
    roundtrip = scipy.linalg.expm(rebuilt * kernel.time_step)
    gap = float(np.abs(roundtrip - p).max())
    if gap > 1e-6:
        return EmbeddabilityVerdict(
            "indeterminate",
            reason=f"round-trip error {gap:.3e} exceeds 1e-6 after clipping")
    return EmbeddabilityVerdict("embeddable", RateMatrix(rebuilt))


# ---------------------------------------------------------------------------
# coarse graining and order testing
# ---------------------------------------------------------------------------

def coarse_grain(sequence, bin_width: int) -> np.ndarray:
    """Map integer positions to contiguous bins of ``bin_width`` by floor
    division (negatives round toward minus infinity)."""
    if bin_width < 1:
        raise SchemaError("bin_width must be a positive integer")
    s = np.asarray(sequence)
    if s.size and not np.issubdtype(s.dtype, np.integer):
        raise SchemaError("sequence must be integer-valued")
    return np.floor_divide(s, bin_width).astype(np.int64)


@dataclass(frozen=True)
class MarkovOrderReport:
    """Lag-wise memory diagnostic of a state sequence.

    divergences[k-1] is the total-variation distance between the one-step
    conditional given the current state and the conditional given the current
    state plus the state k steps back, averaged over conditioning contexts
    seen at least 20 times.
    """

    max_lag_tested: int
    divergences: np.ndarray
    verdict: str
    lag: int | None
    threshold: float


def test_markov_order(sequence, max_lag: int = 3,
                      threshold: float = 0.05) -> MarkovOrderReport:
    """First-order check: does extra history shift the one-step law?

    A lag k "fails" when the average total-variation divergence exceeds
    ``threshold``; the verdict is higher_order with the smallest failing lag,
    else first_order.  Requires len(sequence) >= 10 * (state count)^2.
    """
    if max_lag < 1:
        raise SchemaError("max_lag must be >= 1")
    if not (0 < threshold < 1):
        raise SchemaError("threshold must lie in (0, 1)")
    raw = np.asarray(sequence)
    if raw.ndim != 1:
        raise SchemaError("sequence must be 1-D")
    _, seq = np.unique(raw, return_inverse=True)
    n = seq.size
    s = int(seq.max()) + 1 if n else 0
    if n < 10 * s * s or n < max_lag + 2:
        raise SchemaError(
            f"sequence too short: need >= {max(10 * s * s, max_lag + 2)} "
            f"observations for {s} states, got {n}")

    divergences = np.zeros(max_lag)
    for k in range(1, max_lag + 1):
        past = seq[: n - 1 - k]
        cur = seq[k: n - 1]
        nxt = seq[k + 1:]
        c3 = np.bincount(
            (past * s + cur) * s + nxt, minlength=s ** 3
        ).reshape(s * s, s).astype(float)
        c2 = np.bincount(cur * s + nxt, minlength=s ** 2).reshape(s, s).astype(float)
        tot2 = c2.sum(axis=1, keepdims=True)
        base = np.divide(c2, tot2, out=np.zeros_like(c2), where=tot2 > 0)
        tot3 = c3.sum(axis=1)
        qualified = tot3 >= 20
        if not qualified.any():
            continue
        cond = c3[qualified] / tot3[qualified, None]
        cur_of_ctx = np.nonzero(qualified)[0] % s
        tv = 0.5 * np.abs(cond - base[cur_of_ctx]).sum(axis=1)
        divergences[k - 1] = float(tv.mean())

    failing = np.nonzero(divergences > threshold)[0]
    if failing.size:
        lag = int(failing[0]) + 1
        return MarkovOrderReport(max_lag, divergences, "higher_order", lag,
                                 threshold)
    return MarkovOrderReport(max_lag, divergences, "first_order", None,
                             threshold)


def random_walk(p_up: float, steps: int, start: int = 0,
                seed: int = 0) -> np.ndarray:
    """Integer +-1 random walk: P(step = +1) = p_up, else -1."""
    if not (0.0 <= p_up <= 1.0):
        raise SchemaError("p_up must lie in [0, 1]")
    if steps < 0:
        raise SchemaError("steps must be >= 0")
    rng = np.random.default_rng(seed)
    increments = np.where(rng.random(steps) < p_up, 1, -1)
    positions = np.empty(steps + 1, dtype=np.int64)
    positions[0] = start
    np.cumsum(increments, out=positions[1:])
    positions[1:] += start
    return positions


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def kernel_to_dict(kernel: TransitionKernel) -> dict:
    out = {
        "states": kernel.states,
        "matrix": kernel.matrix.tolist(),
        "time_step": kernel.time_step,
    }
    if kernel.binning is not None:
        out["bin_edges"] = kernel.binning.edges.tolist()
    return out


def kernel_from_dict(data: dict) -> TransitionKernel:
    try:
        matrix = np.asarray(data["matrix"], dtype=float)
        states = int(data["states"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"kernel object needs 'states' and 'matrix': {exc}")
    if matrix.shape != (states, states):
        raise SchemaError(
            f"kernel matrix shape {matrix.shape} does not match states={states}")
    binning = None
    if data.get("bin_edges") is not None:
        binning = StateBinning(np.asarray(data["bin_edges"], dtype=float))
    return TransitionKernel(matrix, binning=binning,
                            time_step=float(data.get("time_step", 1.0)))


def rate_matrix_to_dict(rates: RateMatrix) -> dict:
    return {"states": rates.states, "rates": rates.rates.tolist()}


def rate_matrix_from_dict(data: dict) -> RateMatrix:
    try:
        rates = np.asarray(data["rates"], dtype=float)
        states = int(data["states"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"rate object needs 'states' and 'rates': {exc}")
    if rates.shape != (states, states):
        raise SchemaError("rate matrix shape does not match states")
    return RateMatrix(rates)
