"""Drift-diffusion fields on 2-D grids: estimation from trajectories,
Euler-Maruyama sampling, return-cycle probabilities, and a discrete
Helmholtz decomposition.

Conventions.  A field stores, per grid node, the drift vector A(x) and a
scalar diffusion D(x) equal to the squared noise amplitude B(x)^2 of
dx/dt = A + B xi per axis; the sampler's per-step noise is therefore
sqrt(D * dt) * N(0, 1) on each axis.  Nodes with no data support hold NaN and
are never silently evaluated: interpolation touching them terminates the
trajectory with a flag.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
import scipy.spatial

from ._kernels import _interp_node_fields, cycle_outcome, sde_path
from .dataset import Dataset
from .exceptions import NumericalError, SchemaError, UnsupportedNodeError

logger = logging.getLogger("chronoflow.sde")

__all__ = [
    "GridSpec",
    "DriftDiffusionField",
    "SdeTrajectory",
    "CycleQuery",
    "CycleEstimate",
    "HelmholtzDecomposition",
    "estimate_drift_diffusion",
    "field_from_potentials",
    "sample_sde",
    "return_probability",
    "helmholtz_decompose",
    "field_to_dict",
    "field_from_dict",
]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular node grid; arrays over it are indexed [iy, ix]."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise SchemaError("grid extents must be positive")
        if self.nx < 2 or self.ny < 2:
            raise SchemaError("grid needs at least 2 nodes per axis")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def spacing(self) -> tuple[float, float]:
        return ((self.x_max - self.x_min) / (self.nx - 1),
                (self.y_max - self.y_min) / (self.ny - 1))

    def contains(self, x: float, y: float) -> bool:
        return (self.x_min <= x <= self.x_max
                and self.y_min <= y <= self.y_max)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max,
                "y_min": self.y_min, "y_max": self.y_max,
                "nx": self.nx, "ny": self.ny}


@dataclass(frozen=True)
class DriftDiffusionField:
    """Node-wise drift vectors and diffusion scalars with support counts."""

    grid: GridSpec
    drift: np.ndarray
    diffusion: np.ndarray
    sample_counts: np.ndarray

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=float)
        diffusion = np.asarray(self.diffusion, dtype=float)
        counts = np.asarray(self.sample_counts, dtype=np.int64)
        shape = (self.grid.ny, self.grid.nx)
        if drift.shape != shape + (2,):
            raise SchemaError(f"drift must have shape {shape + (2,)}")
        if diffusion.shape != shape or counts.shape != shape:
            raise SchemaError(f"diffusion and sample_counts must have shape {shape}")
        if np.any(counts < 0):
            raise SchemaError("sample_counts must be >= 0")
        supported = counts > 0
        if np.any(~np.isfinite(diffusion[supported])) or \
                np.any(~np.isfinite(drift[supported])):
            raise SchemaError("supported nodes must hold finite values")
        if np.any(diffusion[supported] < 0):
            raise SchemaError("diffusion must be >= 0 at supported nodes")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "sample_counts", counts)

    @property
    def supported(self) -> np.ndarray:
        return self.sample_counts > 0

    def _kernel_args(self):
        hx, hy = self.grid.spacing
        return (self.grid.x_min, self.grid.y_min, hx, hy,
                self.grid.nx, self.grid.ny,
                np.ascontiguousarray(self.drift[:, :, 0]),
                np.ascontiguousarray(self.drift[:, :, 1]),
                np.ascontiguousarray(self.diffusion))


@dataclass(frozen=True)
class SdeTrajectory:
    """A sampled path; exited marks early termination at the grid edge or an
    unsupported node."""

    times: np.ndarray
    positions: np.ndarray
    exited: bool


@dataclass(frozen=True)
class CycleQuery:
    """Return-cycle event: leave the epsilon1-ball around origin, then
    re-enter the epsilon2-ball before the horizon elapses."""

    origin: tuple[float, float]
    epsilon1: float
    epsilon2: float
    horizon: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if not (self.epsilon1 > 0 and self.epsilon2 > 0):
            raise SchemaError("epsilons must be positive")
        if self.epsilon2 > self.epsilon1:
            raise SchemaError("epsilon2 must not exceed epsilon1")
        if not (self.horizon > 0):
            raise SchemaError("horizon must be positive")
        if self.n_samples < 1:
            raise SchemaError("n_samples must be >= 1")


@dataclass(frozen=True)
class CycleEstimate:
    probability: float
    half_width: float
    successes: int
    n_samples: int

    def to_dict(self) -> dict:
        return {"probability": self.probability,
                "half_width": self.half_width,
                "successes": self.successes,
                "n_samples": self.n_samples}


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

def _consecutive_pairs(dataset: Dataset, cols: tuple[int, int]):
    """Start points, displacements, and time steps of consecutive observations."""
    starts, deltas, dts = [], [], []
    for series in dataset.series:
        xy = series.values[:, list(cols)]
        t = series.times
        good = ~np.isnan(xy).any(axis=1)
        idx = np.nonzero(good)[0]
        for a, b in zip(idx[:-1], idx[1:]):
            if b != a + 1:
                continue  # a gap of missing rows breaks the pair chain
            dt = t[b] - t[a]
            if dt <= 0:
                continue
            starts.append(xy[a])
            deltas.append(xy[b] - xy[a])
            dts.append(dt)
    if not starts:
        raise SchemaError("no consecutive observation pairs to fit")
    return np.array(starts), np.array(deltas), np.array(dts)


def estimate_drift_diffusion(dataset: Dataset, grid: GridSpec,
                             bandwidth: float | None = None
                             ) -> DriftDiffusionField:
    """Binned Kramers-Moyal estimate of drift and diffusion on a grid.

    Each consecutive pair contributes at every node within ``bandwidth`` of
    the pair's starting point, weighted by a Gaussian kernel
    (sigma = bandwidth / 2):

    - drift: weighted mean of dx / dt (per axis)
    - diffusion: weighted mean of ||dx - drift dt||^2 / (2 dt)

    Pairs are anchored at their start, not their spatial midpoint: any
    time-symmetric anchor correlates with the noise in dx and cancels
    mean-reverting drift entirely for stationary input.

    The default bandwidth is twice the larger grid spacing.  Nodes without a
    single pair in range are left unsupported (NaN, count 0).

    The dataset's first two variables are the plane coordinates.
    """
    if dataset.variable_count < 2:
        raise SchemaError("need at least 2 variables for a planar fit")
    hx, hy = grid.spacing
    if bandwidth is None:
        bandwidth = 2.0 * max(hx, hy)
    if not (bandwidth > 0):
        raise SchemaError("bandwidth must be positive")
    starts, deltas, dts = _consecutive_pairs(dataset, (0, 1))

    sigma2 = (bandwidth / 2.0) ** 2
    ny, nx = grid.ny, grid.nx
    drift = np.full((ny, nx, 2), np.nan)
    diffusion = np.full((ny, nx), np.nan)
    counts = np.zeros((ny, nx), dtype=np.int64)
    xs, ys = grid.xs, grid.ys

    rates = deltas / dts[:, None]
    for iy in range(ny):
        d2y = (starts[:, 1] - ys[iy]) ** 2
        for ix in range(nx):
            d2 = (starts[:, 0] - xs[ix]) ** 2 + d2y
            mask = d2 <= bandwidth * bandwidth
            n = int(mask.sum())
            if n == 0:
                continue
            w = np.exp(-d2[mask] / (2.0 * sigma2))
            wsum = w.sum()
            a = (w[:, None] * rates[mask]).sum(axis=0) / wsum
            resid = deltas[mask] - a[None, :] * dts[mask, None]
            d_est = float((w * (resid ** 2).sum(axis=1)
                           / (2.0 * dts[mask])).sum() / wsum)
            counts[iy, ix] = n
            drift[iy, ix] = a
            diffusion[iy, ix] = d_est
    return DriftDiffusionField(grid, drift, diffusion, counts)


# ---------------------------------------------------------------------------
# discrete operators and synthetic fields
# ---------------------------------------------------------------------------

def _grad_x(f: np.ndarray, hx: float) -> np.ndarray:
    g = np.empty_like(f)
    g[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * hx)
    g[:, 0] = (f[:, 1] - f[:, 0]) / hx
    g[:, -1] = (f[:, -1] - f[:, -2]) / hx
    return g


def _grad_y(f: np.ndarray, hy: float) -> np.ndarray:
    g = np.empty_like(f)
    g[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2.0 * hy)
    g[0, :] = (f[1, :] - f[0, :]) / hy
    g[-1, :] = (f[-1, :] - f[-2, :]) / hy
    return g


def field_from_potentials(grid: GridSpec, phi: np.ndarray, psi: np.ndarray,
                          diffusion: float = 0.0) -> DriftDiffusionField:
    """Drift field -grad(phi) + perp-grad(psi) under the package's discrete
    operators (central differences inside, one-sided at edges).

    perp-grad(psi) = (d psi / dy, -d psi / dx).  Useful for building exactly
    representable test fields; every node gets count 1 and the given constant
    diffusion.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    shape = (grid.ny, grid.nx)
    if phi.shape != shape or psi.shape != shape:
        raise SchemaError(f"potentials must have shape {shape}")
    hx, hy = grid.spacing
    fx = -_grad_x(phi, hx) + _grad_y(psi, hy)
    fy = -_grad_y(phi, hy) - _grad_x(psi, hx)
    drift = np.stack([fx, fy], axis=-1)
    diff = np.full(shape, float(diffusion))
    counts = np.ones(shape, dtype=np.int64)
    return DriftDiffusionField(grid, drift, diff, counts)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _require_supported_at(field: DriftDiffusionField, x: float, y: float):
    args = field._kernel_args()
    _, _, _, ok = _interp_node_fields(x, y, *args)
    if ok == 0:
        raise UnsupportedNodeError(
            f"position ({x}, {y}) is outside the grid or unsupported")


def sample_sde(field: DriftDiffusionField, x0, dt: float, t_final: float,
               seed: int) -> SdeTrajectory:
    """Euler-Maruyama path from x0; deterministic per seed.

    Drift and diffusion are bilinearly interpolated between nodes.  The path
    terminates early, flagged, when it exits the grid or touches an
    unsupported node.
    """
    if not (dt > 0):
        raise SchemaError("dt must be positive")
    if t_final < 0:
        raise SchemaError("t_final must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2,):
        raise SchemaError("x0 must be a 2-vector")
    _require_supported_at(field, float(x0[0]), float(x0[1]))
    n = max(int(np.ceil(t_final / dt - 1e-12)), 0)
    normals = np.random.default_rng(seed).standard_normal((n, 2))
    xs, ys, done, exited = sde_path(float(x0[0]), float(x0[1]), dt, normals,
                                    *field._kernel_args())
    positions = np.column_stack([xs[:done + 1], ys[:done + 1]])
    times = np.arange(done + 1) * dt
    return SdeTrajectory(times, positions, bool(exited))


def return_probability(field: DriftDiffusionField, query: CycleQuery,
                       dt: float = 0.01) -> CycleEstimate:
    """Monte Carlo probability of leaving the epsilon1-ball and re-entering
    the epsilon2-ball before the horizon.

    Each sample runs on its own spawned random stream, so enlarging the
    horizon with the same seed replays the same paths for longer (the
    estimate is non-decreasing in horizon).  half_width is the 95% Wald
    value 1.96 sqrt(p(1-p)/n).
    """
    if not (dt > 0):
        raise SchemaError("dt must be positive")
    ox, oy = float(query.origin[0]), float(query.origin[1])
    _require_supported_at(field, ox, oy)
    n_steps = max(int(np.ceil(query.horizon / dt - 1e-12)), 1)
    args = field._kernel_args()
    children = np.random.SeedSequence(query.seed).spawn(query.n_samples)
    successes = 0
    for child in children:
        normals = np.random.default_rng(child).standard_normal((n_steps, 2))
        successes += cycle_outcome(ox, oy, query.epsilon1, query.epsilon2,
                                   dt, normals, *args)
    p = successes / query.n_samples
    half = 1.96 * np.sqrt(p * (1.0 - p) / query.n_samples)
    return CycleEstimate(float(p), float(half), int(successes),
                         query.n_samples)


# ---------------------------------------------------------------------------
# Helmholtz decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HelmholtzDecomposition:
    """Least-squares split F ~ -grad(phi) + perp-grad(psi), both potentials
    gauged to zero mean.  filled_nodes counts unsupported nodes that were
    filled from their nearest supported neighbor before solving."""

    scalar_potential: np.ndarray
    stream_function: np.ndarray
    residual_norm: float
    filled_nodes: int = 0


def _fill_unsupported(field: DriftDiffusionField) -> tuple[np.ndarray, int]:
    """Drift array with unsupported nodes copied from nearest support."""
    drift = field.drift.copy()
    supported = field.supported
    n_missing = int((~supported).sum())
    if n_missing == 0:
        return drift, 0
    if not supported.any():
        raise SchemaError("field has no supported nodes")
    xs, ys = field.grid.xs, field.grid.ys
    gx, gy = np.meshgrid(xs, ys)
    pts_sup = np.column_stack([gx[supported], gy[supported]])
    pts_mis = np.column_stack([gx[~supported], gy[~supported]])
    tree = scipy.spatial.cKDTree(pts_sup)
    _, nearest = tree.query(pts_mis)
    vals = drift[supported][nearest]
    drift[~supported] = vals
    logger.warning("helmholtz: filled %d unsupported node(s) from nearest "
                   "supported neighbors", n_missing)
    return drift, n_missing


def _operator_matrices(grid: GridSpec):
    """Sparse Dx, Dy matching _grad_x / _grad_y on flattened [iy, ix] order."""
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.spacing
    n = nx * ny

    def flat(iy, ix):
        return iy * nx + ix

    rows_x, cols_x, vals_x = [], [], []
    rows_y, cols_y, vals_y = [], [], []
    for iy in range(ny):
        for ix in range(nx):
            r = flat(iy, ix)
            if ix == 0:
                rows_x += [r, r]
                cols_x += [flat(iy, 1), flat(iy, 0)]
                vals_x += [1.0 / hx, -1.0 / hx]
            elif ix == nx - 1:
                rows_x += [r, r]
                cols_x += [flat(iy, nx - 1), flat(iy, nx - 2)]
                vals_x += [1.0 / hx, -1.0 / hx]
            else:
                rows_x += [r, r]
                cols_x += [flat(iy, ix + 1), flat(iy, ix - 1)]
                vals_x += [0.5 / hx, -0.5 / hx]
            if iy == 0:
                rows_y += [r, r]
                cols_y += [flat(1, ix), flat(0, ix)]
                vals_y += [1.0 / hy, -1.0 / hy]
            elif iy == ny - 1:
                rows_y += [r, r]
                cols_y += [flat(ny - 1, ix), flat(ny - 2, ix)]
                vals_y += [1.0 / hy, -1.0 / hy]
            else:
                rows_y += [r, r]
                cols_y += [flat(iy + 1, ix), flat(iy - 1, ix)]
                vals_y += [0.5 / hy, -0.5 / hy]
    dx = scipy.sparse.coo_matrix((vals_x, (rows_x, cols_x)), shape=(n, n)).tocsr()
    dy = scipy.sparse.coo_matrix((vals_y, (rows_y, cols_y)), shape=(n, n)).tocsr()
    return dx, dy


def helmholtz_decompose(field: DriftDiffusionField) -> HelmholtzDecomposition:
    """Split the drift into gradient and rotational parts by least squares.

    Minimizes ||F - (-grad phi + perp-grad psi)||^2 over all nodes using the
    same discrete operators as :func:`field_from_potentials` (central inside,
    one-sided at edges).  Unsupported nodes are filled from their nearest
    supported neighbor first and reported via ``filled_nodes``.

    The split is only unique up to a gauge: constants, and the conjugate
    pairs (phi += a x + b y, psi += a y - b x) which reconstruct exactly
    zero.  The returned potentials have zero mean and the stream function
    has zero centered-linear moments, so uniform translation flow is
    carried by the scalar potential.  Any remaining discrete null modes
    (odd-sized grids admit one extra conjugate pair) are suppressed by the
    minimum-norm property of the iterative solve.
    """
    grid = field.grid
    if grid.nx < 3 or grid.ny < 3:
        raise SchemaError("helmholtz needs a grid of at least 3x3 nodes")
    drift, n_filled = _fill_unsupported(field)
    n = grid.nx * grid.ny
    dx, dy = _operator_matrices(grid)
    # equations: [-Dx  Dy] [phi] = Fx ; [-Dy  -Dx] [psi] = Fy
    a = scipy.sparse.bmat([[-dx, dy], [-dy, -dx]], format="csr")
    b = np.concatenate([drift[:, :, 0].ravel(), drift[:, :, 1].ravel()])
    try:
        # lsmr iterates stay in range(A^T), so no null-space component
        # sneaks in; spsolve on the (singular) normal equations would not
        # have that guarantee
        result = scipy.sparse.linalg.lsmr(
            a, b, atol=1e-14, btol=1e-14, conlim=1e14, maxiter=50 * n)
        u = result[0]
    except Exception as exc:
        raise NumericalError(f"helmholtz least squares failed: {exc}")
    if not np.all(np.isfinite(u)):
        raise NumericalError("helmholtz solve produced non-finite potentials")
    phi = u[:n].reshape(grid.ny, grid.nx)
    psi = u[n:].reshape(grid.ny, grid.nx)
    # move along the conjugate null pairs until psi has zero linear moments
    xc = grid.xs - grid.xs.mean()
    yc = grid.ys - grid.ys.mean()
    xg, yg = np.meshgrid(xc, yc)
    alpha = -(psi * yg).sum() / ((yg * yg).sum())
    beta = (psi * xg).sum() / ((xg * xg).sum())
    phi = phi + alpha * xg + beta * yg
    psi = psi + alpha * yg - beta * xg
    phi = phi - phi.mean()
    psi = psi - psi.mean()
    u0 = np.concatenate([phi.ravel(), psi.ravel()])
    residual = float(np.linalg.norm(a @ u0 - b))
    baseline = float(np.linalg.norm(b))
    if residual > baseline * (1.0 + 1e-9) + 1e-12:
        raise NumericalError(
            f"helmholtz residual {residual:.3e} above zero-potential "
            f"baseline {baseline:.3e}")
    return HelmholtzDecomposition(phi, psi, residual, n_filled)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _nan_to_none(a: np.ndarray):
    flat = a.tolist()

    def conv(v):
        if isinstance(v, list):
            return [conv(x) for x in v]
        return None if (isinstance(v, float) and np.isnan(v)) else v

    return conv(flat)


def field_to_dict(field: DriftDiffusionField) -> dict:
    return {
        "grid": field.grid.to_dict(),
        "drift": _nan_to_none(field.drift),
        "diffusion": _nan_to_none(field.diffusion),
        "sample_counts": field.sample_counts.tolist(),
    }


def field_from_dict(data: dict) -> DriftDiffusionField:
    try:
        g = data["grid"]
        grid = GridSpec(float(g["x_min"]), float(g["x_max"]),
                        float(g["y_min"]), float(g["y_max"]),
                        int(g["nx"]), int(g["ny"]))
        drift = np.array(
            [[[np.nan if v is None else float(v) for v in node]
              for node in row] for row in data["drift"]])
        diffusion = np.array(
            [[np.nan if v is None else float(v) for v in row]
             for row in data["diffusion"]])
        counts = np.asarray(data["sample_counts"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed field object: {exc}")
    return DriftDiffusionField(grid, drift, diffusion, counts)
