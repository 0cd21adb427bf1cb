"""Independent reference implementations used as test oracles.

These deliberately avoid the engine's code paths: plane/half-space tests
instead of Moller-Trumbore for single triangles, vectorized numpy linear
scans instead of BVH traversal, and dense convolution instead of separable
blurs.
"""

import numpy as np


def plane_halfspace_triangle(o, d, v0, v1, v2, t_min, t_max):
    """Ray/triangle via plane intersection + inside test. Returns t or None."""
    n = np.cross(v1 - v0, v2 - v0)
    denom = float(np.dot(d, n))
    area2 = float(np.linalg.norm(n))
    if area2 == 0.0:
        return None
    # mirror the engine's parallel-ray cutoff, which is |det| = |d . (e1 x e2)|
    if abs(denom) < 1e-9:
        return None
    t = float(np.dot(v0 - o, n)) / denom
    if t < t_min or t > t_max:
        return None
    p = o + t * d
    # inside iff p is on the same side of each edge as the opposite vertex
    eps = 1e-9 * area2
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        if float(np.dot(np.cross(b - a, p - a), n)) < -eps:
            return None
    return t


def mt_scan(o, d, v0, v1, v2, t_min, t_max):
    """Vectorized Moller-Trumbore over triangle arrays.

    Returns (ok, t, u, v) arrays; epsilon semantics match the engine so
    hit/miss identity is exact."""
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(d[None, :], e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) >= 1e-9
    safe = np.where(det == 0.0, 1.0, det)
    inv = np.where(ok, 1.0 / safe, 0.0)
    tv = o[None, :] - v0
    u = np.einsum("ij,ij->i", tv, p) * inv
    q = np.cross(tv, e1)
    v = np.einsum("ij,j->i", q, d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    ok &= (u >= -1e-9) & (u <= 1.0 + 1e-9)
    ok &= (v >= -1e-9) & (u + v <= 1.0 + 1e-9)
    ok &= (t >= t_min) & (t <= t_max)
    return ok, t, u, v


def linear_scan_nearest(instances, o, d, t_min=0.0, t_max=np.inf, mask=0xFF):
    """Brute-force nearest hit over a list of instance dicts.

    Each entry: {"inv": 4x4 world->object, "v0": (n,3), "v1", "v2",
    "instance_id", "mask"}. Returns (instance_id, tri_index, t) or None."""
    best = None
    for inst in instances:
        if inst.get("mask", 0xFF) & mask == 0:
            continue
        inv = inst["inv"]
        oo = inv[:3, :3] @ o + inv[:3, 3]
        od = inv[:3, :3] @ d
        ok, t, _, _ = mt_scan(oo, od, inst["v0"], inst["v1"], inst["v2"],
                              t_min, t_max)
        if not ok.any():
            continue
        ts = np.where(ok, t, np.inf)
        j = int(np.argmin(ts))
        if best is None or ts[j] < best[2]:
            best = (inst["instance_id"], j, float(ts[j]))
    return best


def dense_gaussian(image, sigma):
    """Full 2D Gaussian convolution with edge clamping (truncated at 3
    sigma, kernel normalized). image is (h, w) or (h, w, c) float."""
    r = int(np.ceil(3.0 * sigma))
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k1 = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    h, w = image.shape[:2]
    padded = np.pad(image, [(r, r), (r, r)] + [(0, 0)] * (image.ndim - 2),
                    mode="edge")
    out = np.zeros_like(image, dtype=np.float64)
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out += k2[dy, dx] * padded[dy:dy + h, dx:dx + w]
    return out


def sobel_gradient_mean(gray):
    """Mean Sobel gradient magnitude of a (h, w) float image."""
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
    ky = kx.T
    h, w = gray.shape
    padded = np.pad(gray, 1, mode="edge")
    gx = np.zeros_like(gray)
    gy = np.zeros_like(gray)
    for dy in range(3):
        for dx in range(3):
            win = padded[dy:dy + h, dx:dx + w]
            gx += kx[dy, dx] * win
            gy += ky[dy, dx] * win
    return float(np.mean(np.hypot(gx, gy)))


def random_unit(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_affine(rng, scale_range=(0.4, 2.5), shift=4.0):
    """Random invertible affine transform (rotation * scale + translation)."""
    import raylab.geometry as g
    axis = random_unit(rng)
    m = g.rotate(axis, float(rng.uniform(0.0, 360.0)))
    s = rng.uniform(*scale_range, size=3)
    m = g.compose(m, g.scale(*s))
    m[:3, 3] = rng.uniform(-shift, shift, size=3)
    return m
