"""Procedural mesh generators for fixtures and UI geometry.

All generators are deterministic. Boxes and quads carry no vertex normals
(face normals suffice); spheres get exact smooth normals.
"""

from __future__ import annotations

import math

import numpy as np

from .accel import Mesh


def quad(width: float = 1.0, height: float = 1.0) -> Mesh:
    """Rectangle in the XY plane, centered, facing +z (CCW winding)."""
    hw, hh = width * 0.5, height * 0.5
    positions = np.array([[-hw, -hh, 0], [hw, -hh, 0], [hw, hh, 0], [-hw, hh, 0]],
                         dtype=np.float32)
    indices = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return Mesh(positions, indices)


def box(sx: float = 1.0, sy: float = 1.0, sz: float = 1.0) -> Mesh:
    """Axis-aligned box centered at the origin, outward CCW winding."""
    hx, hy, hz = sx * 0.5, sy * 0.5, sz * 0.5
    p = np.array([
        [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
        [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
    ], dtype=np.float32)
    faces = [
        (4, 5, 6, 7),   # +z
        (1, 0, 3, 2),   # -z
        (5, 1, 2, 6),   # +x
        (0, 4, 7, 3),   # -x
        (7, 6, 2, 3),   # +y
        (0, 1, 5, 4),   # -y
    ]
    tris = []
    for a, b, c, d in faces:
        tris.append([a, b, c])
        tris.append([a, c, d])
    return Mesh(p, np.array(tris, dtype=np.int32))


def uv_sphere(radius: float = 1.0, stacks: int = 24, slices: int = 48) -> Mesh:
    """Latitude/longitude sphere with exact unit normals."""
    positions = []
    normals = []
    for i in range(stacks + 1):
        theta = math.pi * i / stacks
        st, ct = math.sin(theta), math.cos(theta)
        for j in range(slices + 1):
            phi = 2.0 * math.pi * j / slices
            nx = st * math.cos(phi)
            ny = ct
            nz = st * math.sin(phi)
            normals.append([nx, ny, nz])
            positions.append([radius * nx, radius * ny, radius * nz])
    tris = []
    cols = slices + 1
    for i in range(stacks):
        for j in range(slices):
            a = i * cols + j
            b = a + cols
            if i > 0:
                tris.append([a, b, a + 1])
            if i < stacks - 1:
                tris.append([a + 1, b, b + 1])
    return Mesh(np.array(positions, dtype=np.float32),
                np.array(tris, dtype=np.int32),
                normals=np.array(normals, dtype=np.float32))
