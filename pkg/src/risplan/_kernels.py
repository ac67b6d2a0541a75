"""Compiled raster kernels: exact grid-cell line-of-sight walk."""
import math

import numba
import numpy as np
from numba import njit, prange

# TBB on this platform is too old and only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_TIE_EPS = 1e-12


@njit(cache=True, inline="always")
def _blocks(heights, r, c, u0, v0, z0, du, dv, dz, l2):
    nr, nc = heights.shape
    if r < 0 or c < 0 or r >= nr or c >= nc:
        return False
    t = ((c + 0.5 - u0) * du + (r + 0.5 - v0) * dv) / l2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return heights[r, c] >= z0 + t * dz


@njit(cache=True)
def los_walk(heights, u0, v0, z0, u1, v1, z1):
    """
    True when no crossed cell reaches the 3-D sight line.

    Points are in continuous raster coordinates (u = column, v = row).
    The walk is canonicalized on the lexicographically smaller endpoint so
    the result is exactly symmetric. At exact corner crossings both
    side-adjacent cells are tested.
    """
    if (u1 < u0) or (u1 == u0 and v1 < v0):
        u0, v0, z0, u1, v1, z1 = u1, v1, z1, u0, v0, z0
    nr, nc = heights.shape
    du = u1 - u0
    dv = v1 - v0
    dz = z1 - z0
    l2 = du * du + dv * dv
    c = int(math.floor(u0))
    r = int(math.floor(v0))
    c = min(max(c, 0), nc - 1)
    r = min(max(r, 0), nr - 1)
    if l2 == 0.0:
        return heights[r, c] < min(z0, z1)
    ce = min(max(int(math.floor(u1)), 0), nc - 1)
    re = min(max(int(math.floor(v1)), 0), nr - 1)

    sc = 1 if du > 0 else (-1 if du < 0 else 0)
    sr = 1 if dv > 0 else (-1 if dv < 0 else 0)
    inf = np.inf
    if sc > 0:
        tmc = (c + 1 - u0) / du
        tdc = 1.0 / du
    elif sc < 0:
        tmc = (u0 - c) / -du
        tdc = -1.0 / du
    else:
        tmc = inf
        tdc = inf
    if sr > 0:
        tmr = (r + 1 - v0) / dv
        tdr = 1.0 / dv
    elif sr < 0:
        tmr = (v0 - r) / -dv
        tdr = -1.0 / dv
    else:
        tmr = inf
        tdr = inf

    for _ in range(nr + nc + 4):
        if _blocks(heights, r, c, u0, v0, z0, du, dv, dz, l2):
            return False
        if r == re and c == ce:
            break
        tnext = min(tmc, tmr)
        if tnext > 1.0:
            break
        if tmc < tmr - _TIE_EPS:
            c += sc
            tmc += tdc
        elif tmr < tmc - _TIE_EPS:
            r += sr
            tmr += tdr
        else:
            if _blocks(heights, r, c + sc, u0, v0, z0, du, dv, dz, l2):
                return False
            if _blocks(heights, r + sr, c, u0, v0, z0, du, dv, dz, l2):
                return False
            c += sc
            r += sr
            tmc += tdc
            tmr += tdr
    return True


@njit(cache=True, parallel=True)
def los_many(heights, u0, v0, z0, us, vs, z1):
    """LOS from one source to many targets (all at height ``z1``)."""
    n = us.shape[0]
    out = np.empty(n, dtype=np.bool_)
    for k in prange(n):
        out[k] = los_walk(heights, u0, v0, z0, us[k], vs[k], z1)
    return out


def set_threads(n):
    """Bound the kernel thread count; results never depend on it."""
    if n is None:
        return
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
