"""Pinhole camera. Engine space is right-handed, Y-up.

ray_for mirrors the compiled render kernel operation for operation so both
backends cast bit-identical primary rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry


@dataclass
class CameraParams:
    position: np.ndarray
    look_at: np.ndarray
    fov_degrees: float = 60.0


@dataclass
class CameraFrame:
    origin: np.ndarray
    right: np.ndarray
    up: np.ndarray
    forward: np.ndarray
    tan_half: float
    aspect: float
    width: int
    height: int

    @classmethod
    def from_params(cls, params: CameraParams, width: int, height: int):
        pos = np.asarray(params.position, dtype=np.float64)
        fwd = geometry.normalize(np.asarray(params.look_at, float) - pos)
        world_up = geometry.vec3(0.0, 1.0, 0.0)
        if abs(float(np.dot(fwd, world_up))) > 0.999:
            world_up = geometry.vec3(0.0, 0.0, 1.0)
        right = geometry.normalize(np.cross(fwd, world_up))
        up = np.cross(right, fwd)
        return cls(pos, right, up, fwd,
                   math.tan(math.radians(params.fov_degrees) * 0.5),
                   width / height, width, height)

    def ray_for(self, x: int, y: int, jx: float, jy: float):
        """Primary ray through pixel (x, y) with sub-pixel jitter in [0,1)."""
        ndc_x = ((x + jx) / self.width) * 2.0 - 1.0
        ndc_y = 1.0 - ((y + jy) / self.height) * 2.0
        sx = ndc_x * self.tan_half * self.aspect
        sy = ndc_y * self.tan_half
        ddx = self.forward[0] + sx * self.right[0] + sy * self.up[0]
        ddy = self.forward[1] + sx * self.right[1] + sy * self.up[1]
        ddz = self.forward[2] + sx * self.right[2] + sy * self.up[2]
        inv = 1.0 / math.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
        return self.origin, geometry.vec3(ddx * inv, ddy * inv, ddz * inv)
