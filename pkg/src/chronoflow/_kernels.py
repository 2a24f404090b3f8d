"""Hot numeric inner loops.

Each kernel is written as scalar-loop numpy code so the identical source runs
compiled under numba and interpreted as the fallback path.  Randomness is
always pre-drawn into arrays by the caller; the two paths therefore consume
the same stream and return bit-identical results, which the benchmark suite
and the kernel tests both rely on.

Array layout for field kernels: node grids are indexed ``[iy, ix]`` and a
position maps to fractional cell coordinates via the grid origin and spacing.
"""

import numpy as np

from ._accel import jit_kernel


@jit_kernel
def chain_path(cdf, start, uniforms):
    """Walk a finite-state chain using row-wise cumulative probabilities.

    Parameters
    ----------
    cdf : (S, S) float64 array, each row a cumulative distribution
    start : int, initial state
    uniforms : (n,) float64 array of U(0,1) draws, one per step

    Returns
    -------
    (n + 1,) int64 array of visited states, starting with ``start``.
    """
    n = uniforms.shape[0]
    size = cdf.shape[1]
    out = np.empty(n + 1, dtype=np.int64)
    out[0] = start
    s = start
    for i in range(n):
        u = uniforms[i]
        j = 0
        while j < size - 1 and u > cdf[s, j]:
            j += 1
        s = j
        out[i + 1] = s
    return out


@jit_kernel
def _interp_node_fields(x, y, xmin, ymin, hx, hy, nx, ny,
                        drift_x, drift_y, diffusion):
    """Bilinear interpolation of drift and diffusion at one position.

    Returns (ax, ay, d, ok) with ok = 0 when the position lies outside the
    grid or any participating node is unsupported (NaN entries).
    """
    fx = (x - xmin) / hx
    fy = (y - ymin) / hy
    if fx < 0.0 or fy < 0.0 or fx > nx - 1.0 or fy > ny - 1.0:
        return 0.0, 0.0, 0.0, 0
    ix = int(fx)
    iy = int(fy)
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    tx = fx - ix
    ty = fy - iy
    w00 = (1.0 - tx) * (1.0 - ty)
    w10 = tx * (1.0 - ty)
    w01 = (1.0 - tx) * ty
    w11 = tx * ty
    ax = (w00 * drift_x[iy, ix] + w10 * drift_x[iy, ix + 1]
          + w01 * drift_x[iy + 1, ix] + w11 * drift_x[iy + 1, ix + 1])
    ay = (w00 * drift_y[iy, ix] + w10 * drift_y[iy, ix + 1]
          + w01 * drift_y[iy + 1, ix] + w11 * drift_y[iy + 1, ix + 1])
    d = (w00 * diffusion[iy, ix] + w10 * diffusion[iy, ix + 1]
         + w01 * diffusion[iy + 1, ix] + w11 * diffusion[iy + 1, ix + 1])
    if ax != ax or ay != ay or d != d:  # NaN from an unsupported node
        return 0.0, 0.0, 0.0, 0
    return ax, ay, d, 1


@jit_kernel
def sde_path(x0, y0, dt, normals, xmin, ymin, hx, hy, nx, ny,
             drift_x, drift_y, diffusion):
    """Euler-Maruyama path on a bilinearly interpolated field.

    ``normals`` has shape (n, 2), one standard-normal pair per step.  The
    per-step noise amplitude is sqrt(diffusion * dt) on each axis.

    Returns (xs, ys, done, exited): position arrays of length n + 1 of which
    entries 0..done are valid, and exited = 1 when the walk left the grid or
    reached an unsupported node before taking all n steps.
    """
    n = normals.shape[0]
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    xs[0] = x0
    ys[0] = y0
    x = x0
    y = y0
    done = 0
    exited = 0
    for i in range(n):
        ax, ay, d, ok = _interp_node_fields(
            x, y, xmin, ymin, hx, hy, nx, ny, drift_x, drift_y, diffusion)
        if ok == 0:
            exited = 1
            break
        amp = np.sqrt(d * dt)
        x = x + ax * dt + amp * normals[i, 0]
        y = y + ay * dt + amp * normals[i, 1]
        done = i + 1
        xs[done] = x
        ys[done] = y
    return xs, ys, done, exited


@jit_kernel
def cycle_outcome(ox, oy, eps1, eps2, dt, normals, xmin, ymin, hx, hy, nx, ny,
                  drift_x, drift_y, diffusion):
    """Return 1 when a walk from (ox, oy) leaves the eps1-ball and later
    re-enters the eps2-ball within the supplied steps, else 0.

    A walk that exits the grid (or hits unsupported nodes) before re-entry
    counts as 0.
    """
    n = normals.shape[0]
    x = ox
    y = oy
    left = 0
    for i in range(n):
        ax, ay, d, ok = _interp_node_fields(
            x, y, xmin, ymin, hx, hy, nx, ny, drift_x, drift_y, diffusion)
        if ok == 0:
            return 0
        amp = np.sqrt(d * dt)
        x = x + ax * dt + amp * normals[i, 0]
        y = y + ay * dt + amp * normals[i, 1]
        ddx = x - ox
        ddy = y - oy
        r2 = ddx * ddx + ddy * ddy
        if left == 0:
            if r2 >= eps1 * eps1:
                left = 1
        elif r2 <= eps2 * eps2:
            return 1
    return 0


@jit_kernel
def dip_statistic_sorted(x):
    """Hartigan's dip statistic of a sorted 1-D sample.

    Port of the greatest-convex-minorant / least-concave-majorant algorithm
    (Hartigan & Hartigan 1985, as in Maechler's reference implementation),
    reduced to return only the statistic.  ``x`` must be sorted ascending.
    """
    n = x.shape[0]
    if n < 4 or x[0] == x[n - 1]:
        return 0.0
    low = 0
    high = n - 1
    dip_value = 0.0

    # mn[j]: leftmost index joined with j for the convex minorant fit
    mn = np.zeros(n, dtype=np.int64)
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            mnmnj = mn[mnj]
            if mnj == 0 or (x[j] - x[mnj]) * (mnj - mnmnj) < (x[mnj] - x[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj

    # mj[k]: rightmost index joined with k for the concave majorant fit
    mj = np.zeros(n, dtype=np.int64)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            mjmjk = mj[mjk]
            if mjk == n - 1 or (x[k] - x[mjk]) * (mjk - mjmjk) < (x[mjk] - x[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    gcm = np.zeros(n, dtype=np.int64)
    lcm = np.zeros(n, dtype=np.int64)
    while True:
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = i
        l_gcm = i
        ix = ig - 1

        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = i
        l_lcm = i
        iv = 1

        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    gcmil = gcm[ix + 1]
                    dx_ = (lcmiv - gcmil + 1) - (x[lcmiv] - x[gcmil]) * (gcmix - gcmil) / (x[gcmix] - x[gcmil])
                    iv += 1
                    if dx_ >= d:
                        d = dx_
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmivl = lcm[iv - 1]
                    dx_ = (x[gcmix] - x[lcmivl]) * (lcmiv - lcmivl) / (x[lcmiv] - x[lcmivl]) - (gcmix - lcmivl - 1)
                    ix -= 1
                    if dx_ >= d:
                        d = dx_
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break
        if d < dip_value:
            break

        # largest deviation inside the convex minorant
        dip_l = 0.0
        for j in range(ig, l_gcm):
            max_t = 1.0
            jb = gcm[j + 1]
            je = gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * c
                    if max_t < t:
                        max_t = t
            if dip_l < max_t:
                dip_l = max_t

        # largest deviation inside the concave majorant
        dip_u = 0.0
        for j in range(ih, l_lcm):
            max_t = 1.0
            jb = lcm[j]
            je = lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * c - (jj - jb - 1)
                    if max_t < t:
                        max_t = t
            if dip_u < max_t:
                dip_u = max_t

        dip_new = dip_u if dip_u > dip_l else dip_l
        if dip_value < dip_new:
            dip_value = dip_new
        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]

    # the unimodal fit can never be closer than half an observation weight
    if dip_value < 1.0:
        dip_value = 1.0
    return dip_value / (2.0 * n)


@jit_kernel
def dip_batch(samples):
    """Dip statistic of each row of ``samples`` (rows need not be sorted)."""
    b = samples.shape[0]
    out = np.empty(b)
    for i in range(b):
        row = np.sort(samples[i].copy())
        out[i] = dip_statistic_sorted(row)
    return out
