"""Vectors, transforms, rays, bounding boxes, and optical direction math.

Vectors are numpy float64 arrays of shape (3,); transforms are 4x4 float64
arrays in row-major storage with column-vector convention (world = M @ p).
Everything here is pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _scalars
from .errors import SingularTransformError

SINGULAR_EPS = 1e-12


def vec3(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
    return v / n


def length(v: np.ndarray) -> float:
    return math.sqrt(float(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))


@dataclass
class Ray:
    """Parametric ray; direction must be unit length, 0 <= t_min < t_max.

    mask is intersected with each instance's visibility mask during
    traversal (zero intersection skips the instance).
    """

    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf
    mask: int = 0xFF


@dataclass
class Aabb:
    min: np.ndarray = field(default_factory=lambda: vec3(math.inf, math.inf, math.inf))
    max: np.ndarray = field(default_factory=lambda: vec3(-math.inf, -math.inf, -math.inf))

    def is_empty(self) -> bool:
        return bool(np.any(self.min > self.max))

    def expand_point(self, p: np.ndarray) -> None:
        np.minimum(self.min, p, out=self.min)
        np.maximum(self.max, p, out=self.max)

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    def surface_area(self) -> float:
        if self.is_empty():
            return 0.0
        d = self.max - self.min
        return float(2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0]))

    def contains_box(self, other: "Aabb", eps: float = 1e-12) -> bool:
        if other.is_empty():
            return True
        return bool(np.all(self.min <= other.min + eps) and np.all(self.max >= other.max - eps))


def ray_triangle(ray: Ray, v0, v1, v2):
    """Nearest parametric hit of ray against one triangle.

    Returns (t, u, v) or None. Rays parallel to the triangle plane
    (|det| < 1e-9) never hit; degenerate triangles behave the same way.
    """
    hit, t, u, v = _scalars.moller_trumbore(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max,
        v0[0], v0[1], v0[2], v1[0], v1[1], v1[2], v2[0], v2[1], v2[2])
    if not hit:
        return None
    return t, u, v


def ray_aabb(ray: Ray, box: Aabb):
    """Slab-test interval clipped to [t_min, t_max], or None.

    A ray starting inside the box reports t_enter == ray.t_min.
    """
    if box.is_empty():
        return None
    dx, dy, dz = ray.direction
    idx = 1.0 / dx if dx != 0.0 else math.inf
    idy = 1.0 / dy if dy != 0.0 else math.inf
    idz = 1.0 / dz if dz != 0.0 else math.inf
    hit, lo, hi = _scalars.slab_test(
        ray.origin[0], ray.origin[1], ray.origin[2], idx, idy, idz,
        ray.t_min, ray.t_max,
        box.min[0], box.min[1], box.min[2], box.max[0], box.max[1], box.max[2])
    if not hit:
        return None
    return lo, hi


def reflect(d: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror reflection of unit direction d about unit normal n."""
    x, y, z = _scalars.reflect_dir(d[0], d[1], d[2], n[0], n[1], n[2])
    return vec3(x, y, z)


def refract(d: np.ndarray, n: np.ndarray, eta_ratio: float):
    """Snell-law transmitted direction, or None on total internal reflection.

    eta_ratio is n_incident / n_transmitted; d must point into the surface
    (dot(d, n) < 0).
    """
    ok, x, y, z = _scalars.refract_dir(d[0], d[1], d[2], n[0], n[1], n[2], eta_ratio)
    if not ok:
        return None
    return vec3(x, y, z)


def schlick(cos_i: float, f0: float) -> float:
    """Fresnel reflectance approximation, clamped to [0, 1]."""
    return _scalars.schlick_weight(cos_i, f0)


def fresnel_f0(refraction_index: float) -> float:
    return _scalars.fresnel_f0(refraction_index)


# -- transforms --------------------------------------------------------------

def identity() -> np.ndarray:
    return np.eye(4, dtype=np.float64)


def translate(x, y, z) -> np.ndarray:
    m = identity()
    m[0, 3] = x
    m[1, 3] = y
    m[2, 3] = z
    return m


def scale(x, y=None, z=None) -> np.ndarray:
    if y is None:
        y = z = x
    m = identity()
    m[0, 0] = x
    m[1, 1] = y
    m[2, 2] = z
    return m


def rotate(axis: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotation about an arbitrary axis (Rodrigues), angle in degrees."""
    a = normalize(np.asarray(axis, dtype=np.float64))
    th = math.radians(angle_deg)
    c, s = math.cos(th), math.sin(th)
    x, y, z = a
    r = np.array([
        [c + x * x * (1 - c), x * y * (1 - c) - z * s, x * z * (1 - c) + y * s],
        [y * x * (1 - c) + z * s, c + y * y * (1 - c), y * z * (1 - c) - x * s],
        [z * x * (1 - c) - y * s, z * y * (1 - c) + x * s, c + z * z * (1 - c)],
    ], dtype=np.float64)
    m = identity()
    m[:3, :3] = r
    return m


def compose(parent: np.ndarray, child: np.ndarray) -> np.ndarray:
    """Affine composition: apply child first, then parent."""
    return parent @ child


def apply_point(m: np.ndarray, p: np.ndarray) -> np.ndarray:
    return m[:3, :3] @ p + m[:3, 3]


def apply_dir(m: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Transform a direction; translation is ignored."""
    return m[:3, :3] @ d


def determinant(m: np.ndarray) -> float:
    return float(np.linalg.det(m[:3, :3]))


def invert(m: np.ndarray) -> np.ndarray:
    if abs(determinant(m)) <= SINGULAR_EPS:
        raise SingularTransformError("transform is singular (|det| <= 1e-12)")
    return np.linalg.inv(m)


def is_affine(m: np.ndarray, eps: float = 1e-12) -> bool:
    return bool(np.all(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])) <= eps))


def normal_matrix(m: np.ndarray) -> np.ndarray:
    """Inverse-transpose of the upper 3x3, for transforming normals."""
    return np.linalg.inv(m[:3, :3]).T
