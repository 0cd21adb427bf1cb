"""Scalar math cores compiled with numba.

These functions are the single source of truth for intersection and optics
math: the public geometry API wraps them, and the render kernels inline
them. All math is double precision; no fastmath, so results are bit-stable
across call sites and thread counts.
"""

import math

import numpy as np
from numba import njit

DET_EPS = 1e-9
BARY_EPS = 1e-9

_JIT = dict(cache=True, fastmath=False)


@njit(inline="always", **_JIT)
def moller_trumbore(ox, oy, oz, dx, dy, dz, t_min, t_max,
                    ax, ay, az, bx, by, bz, cx, cy, cz):
    """Ray/triangle test. Returns (hit, t, u, v)."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    # p = d cross e2
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < DET_EPS:
        return False, 0.0, 0.0, 0.0
    inv_det = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv_det
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return False, 0.0, 0.0, 0.0
    # q = t cross e1
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv_det
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return False, 0.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
    if t < t_min or t > t_max:
        return False, 0.0, 0.0, 0.0
    return True, t, u, v


@njit(inline="always", **_JIT)
def slab_test(ox, oy, oz, idx, idy, idz, t_min, t_max,
              minx, miny, minz, maxx, maxy, maxz):
    """Ray/AABB slab test with precomputed inverse direction.

    Returns (hit, t_enter, t_exit) clipped to [t_min, t_max].
    """
    t0 = (minx - ox) * idx
    t1 = (maxx - ox) * idx
    if t0 > t1:
        t0, t1 = t1, t0
    lo = t0 if t0 > t_min else t_min
    hi = t1 if t1 < t_max else t_max
    if hi < lo:
        return False, 0.0, 0.0

    t0 = (miny - oy) * idy
    t1 = (maxy - oy) * idy
    if t0 > t1:
        t0, t1 = t1, t0
    if t0 > lo:
        lo = t0
    if t1 < hi:
        hi = t1
    if hi < lo:
        return False, 0.0, 0.0

    t0 = (minz - oz) * idz
    t1 = (maxz - oz) * idz
    if t0 > t1:
        t0, t1 = t1, t0
    if t0 > lo:
        lo = t0
    if t1 < hi:
        hi = t1
    if hi < lo:
        return False, 0.0, 0.0
    return True, lo, hi


@njit(inline="always", **_JIT)
def reflect_dir(dx, dy, dz, nx, ny, nz):
    k = 2.0 * (dx * nx + dy * ny + dz * nz)
    return dx - k * nx, dy - k * ny, dz - k * nz


@njit(inline="always", **_JIT)
def refract_dir(dx, dy, dz, nx, ny, nz, eta):
    """Snell refraction. Returns (ok, x, y, z); ok False on TIR."""
    cos_i = -(dx * nx + dy * ny + dz * nz)
    k = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
    if k < 0.0:
        return False, 0.0, 0.0, 0.0
    s = eta * cos_i - math.sqrt(k)
    tx = eta * dx + s * nx
    ty = eta * dy + s * ny
    tz = eta * dz + s * nz
    inv = 1.0 / math.sqrt(tx * tx + ty * ty + tz * tz)
    return True, tx * inv, ty * inv, tz * inv


@njit(inline="always", **_JIT)
def schlick_weight(cos_i, f0):
    if cos_i < 0.0:
        cos_i = 0.0
    elif cos_i > 1.0:
        cos_i = 1.0
    m = 1.0 - cos_i
    f = f0 + (1.0 - f0) * m * m * m * m * m
    if f < 0.0:
        return 0.0
    if f > 1.0:
        return 1.0
    return f


@njit(inline="always", **_JIT)
def fresnel_f0(refraction_index):
    """Normal-incidence reflectance. Index 0 marks an opaque reflector
    (full-strength reflection); indices >= 1 give dielectric Fresnel."""
    if refraction_index < 1.0:
        return 1.0
    r = (1.0 - refraction_index) / (1.0 + refraction_index)
    return r * r


@njit(inline="always", **_JIT)
def mix64(z):
    """SplitMix64 finalizer; the avalanche behind the per-pixel RNG."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(inline="always", **_JIT)
def pixel_rand(seed, x, y, sample, dim):
    """Counter-based uniform in [0, 1) keyed by (seed, x, y, sample, dim).

    Independent of evaluation order, so dispatch output does not depend on
    tiling or thread scheduling.
    """
    z = np.uint64(seed) ^ (np.uint64(x) * np.uint64(0x9E3779B97F4A7C15))
    z = mix64(z ^ (np.uint64(y) * np.uint64(0xC2B2AE3D27D4EB4F)))
    z = mix64(z ^ (np.uint64(sample) * np.uint64(0xD6E8FEB86659FD93)))
    z = mix64(z ^ np.uint64(dim))
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
