"""Built-in program set: Lambertian direct lighting with shadow rays,
mirror reflection, refraction with Schlick Fresnel weighting, emissive
surfaces, and a constant-background miss program.

The color model, per hit:

    color = emission
          + (1 - reflectivity - transparency) * direct
          + reflectivity * F * traced_reflection
          + transparency * (1 - F) * traced_refraction

with F = schlick(cos_i, f0(refraction_index)). Total internal reflection
converts the refraction branch into a reflection. A refraction_index of 0
marks an opaque reflector (f0 = 1); values >= 1 are dielectrics.

The compiled kernel in _kernels.shade_whitted implements this same model;
tests assert the two agree.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import accel, geometry
from .errors import FieldRangeError, MaterialConstraintError
from .pipeline import HitGroup, Payload, ProgramTable

INV_PI = 1.0 / math.pi
SHADOW_EPS = 1e-4

# engine-wide material defaults applied below unset fields
DEFAULTS = {
    "albedo": (0.8, 0.8, 0.8),
    "roughness": 0.0,
    "reflectivity": 0.0,
    "transparency": 0.0,
    "refraction_index": 1.0,
    "emission": (0.0, 0.0, 0.0),
}

HIT_GROUP_OPAQUE = 0
HIT_GROUP_TRANSPARENT = 1


@dataclass
class ResolvedMaterial:
    """Fully populated material; every field present after inheritance."""

    name: str
    albedo: tuple = DEFAULTS["albedo"]
    roughness: float = DEFAULTS["roughness"]
    reflectivity: float = DEFAULTS["reflectivity"]
    transparency: float = DEFAULTS["transparency"]
    refraction_index: float = DEFAULTS["refraction_index"]
    emission: tuple = DEFAULTS["emission"]

    def validate(self):
        for fname in ("roughness", "reflectivity", "transparency"):
            v = getattr(self, fname)
            if not 0.0 <= v <= 1.0:
                raise FieldRangeError(fname, f"{v} outside [0, 1]")
        if not (self.refraction_index == 0.0 or self.refraction_index >= 1.0):
            raise FieldRangeError("refraction_index",
                                  f"{self.refraction_index} must be 0 or >= 1")
        for fname, lo, hi in (("albedo", 0.0, 1.0), ("emission", 0.0, math.inf)):
            vals = getattr(self, fname)
            if len(vals) != 3 or any(not (lo <= c <= hi) for c in vals):
                raise FieldRangeError(fname, f"{vals} outside [{lo}, {hi}]^3")
        if self.reflectivity + self.transparency > 1.0 + 1e-12:
            raise MaterialConstraintError(
                f"material {self.name!r}: reflectivity + transparency "
                f"= {self.reflectivity + self.transparency} > 1")

    @property
    def hit_group_id(self) -> int:
        return HIT_GROUP_TRANSPARENT if self.transparency > 0.0 else HIT_GROUP_OPAQUE

    def as_dict(self) -> dict:
        return {"albedo": list(self.albedo), "roughness": self.roughness,
                "reflectivity": self.reflectivity,
                "transparency": self.transparency,
                "refraction_index": self.refraction_index,
                "emission": list(self.emission)}


@dataclass
class PointLight:
    position: np.ndarray
    intensity: np.ndarray
    radius: float = 0.05


@dataclass
class SceneBindings:
    """Read-only state shared by the built-in programs during a dispatch."""

    camera: object
    materials: list          # ResolvedMaterial per TLAS instance index
    lights: list
    background: np.ndarray
    shadow_eps: float = SHADOW_EPS
    shadow_skip: np.ndarray = None

    def __post_init__(self):
        if self.shadow_skip is None:
            self.shadow_skip = np.array(
                [m.transparency >= 1.0 for m in self.materials], dtype=np.uint8)


# -- payload codec -----------------------------------------------------------

_COLOR_FMT = "<3dq"  # rgb doubles + depth, 32 bytes of the 48-byte contract


def encode_color(color, depth: int) -> bytes:
    return struct.pack(_COLOR_FMT, float(color[0]), float(color[1]),
                       float(color[2]), depth)


def decode_color(payload: Payload):
    r, g, b, depth = struct.unpack(_COLOR_FMT, payload.data)
    return np.array([r, g, b]), depth


# -- programs ----------------------------------------------------------------

def raygen_primary(ctx, x, y, sample):
    cam = ctx.bindings.camera
    origin, direction = cam.ray_for(x, y, ctx.rand(0), ctx.rand(1))
    ray = geometry.Ray(origin, direction, 0.0, math.inf, mask=accel.ALL_BITS)
    out = ctx.trace_ray(ray, Payload(encode_color((0.0, 0.0, 0.0), 0), 0), 0)
    color, _ = decode_color(out)
    return color


def miss_background(ctx, payload: Payload) -> Payload:
    return Payload(encode_color(ctx.bindings.background, payload.depth),
                   payload.depth)


def any_hit_transparent(ctx, hit, payload) -> bool:
    """Shadow rays pass through fully transparent surfaces; every other
    traversal accepts the hit (the closest-hit program refracts)."""
    if ctx.in_occlusion_query:
        return ctx.material_of(hit).transparency < 1.0
    return True


def shadow_query(ctx, from_pos, to_pos) -> bool:
    """True iff the open segment between the points is occluded.

    Both ends are pulled in by the shadow epsilon; UI instances are
    excluded via the ray mask."""
    delta = np.asarray(to_pos, float) - np.asarray(from_pos, float)
    dist = geometry.length(delta)
    eps = ctx.bindings.shadow_eps
    if dist - eps <= eps:
        return False
    ray = geometry.Ray(np.asarray(from_pos, float), delta / dist,
                       eps, dist - eps, mask=accel.SHADOW_MASK)
    return ctx.trace_any(ray)


def shade_direct(ctx, hit, lights, normal=None) -> np.ndarray:
    """Direct lighting: albedo/pi * max(0, n.l) * intensity * falloff * vis.

    falloff is inverse-square clamped at the light radius."""
    mat = ctx.material_of(hit)
    n = hit.normal if normal is None else normal
    p = hit.position
    out = np.zeros(3)
    for light in lights:
        lv = np.asarray(light.position, float) - p
        dist = geometry.length(lv)
        if dist <= 0.0:
            continue
        ldir = lv / dist
        ndotl = float(n[0] * ldir[0] + n[1] * ldir[1] + n[2] * ldir[2])
        if ndotl <= 0.0:
            continue
        if shadow_query(ctx, p, light.position):
            continue
        d2 = dist * dist
        r2 = light.radius * light.radius
        falloff = 1.0 / (d2 if d2 > r2 else r2)
        s = ndotl * falloff * INV_PI
        out[0] += mat.albedo[0] * light.intensity[0] * s
        out[1] += mat.albedo[1] * light.intensity[1] * s
        out[2] += mat.albedo[2] * light.intensity[2] * s
    return out


def closest_hit_default(ctx, hit, payload: Payload) -> Payload:
    mat = ctx.material_of(hit)
    ray = ctx.current_ray
    d = ray.direction
    n = hit.normal
    entering = float(d[0] * n[0] + d[1] * n[1] + d[2] * n[2]) < 0.0
    if not entering:
        n = -n

    if payload.depth == 0:
        ctx.write_aux(mat.roughness, hit.t)

    refl = mat.reflectivity
    trans = mat.transparency
    w_d = 1.0 - refl - trans
    direct = shade_direct(ctx, hit, ctx.bindings.lights, normal=n) \
        if w_d > 0.0 else np.zeros(3)

    cos_i = -(d[0] * n[0] + d[1] * n[1] + d[2] * n[2])
    f = geometry.schlick(cos_i, geometry.fresnel_f0(mat.refraction_index))
    eps = ctx.bindings.shadow_eps

    refr_color = np.zeros(3)
    w_t = trans * (1.0 - f)
    if w_t > 0.0:
        if mat.refraction_index < 1.0:
            td = None
        else:
            eta = 1.0 / mat.refraction_index if entering else mat.refraction_index
            td = geometry.refract(d, n, eta)
        if td is None:
            td = geometry.reflect(d, n)  # total internal reflection
        child = ctx.trace_ray(
            geometry.Ray(hit.position, td, eps, math.inf, mask=accel.ALL_BITS),
            Payload(payload.data, payload.depth + 1), 0)
        refr_color, _ = decode_color(child)

    refl_color = np.zeros(3)
    w_r = refl * f
    if w_r > 0.0:
        rd = geometry.reflect(d, n)
        child = ctx.trace_ray(
            geometry.Ray(hit.position, rd, eps, math.inf, mask=accel.ALL_BITS),
            Payload(payload.data, payload.depth + 1), 0)
        refl_color, _ = decode_color(child)

    color = np.array(mat.emission, dtype=np.float64) + w_d * direct \
        + w_r * refl_color + w_t * refr_color
    return Payload(encode_color(color, payload.depth), payload.depth)


def make_program_table() -> ProgramTable:
    """Hit group 0: opaque surfaces; hit group 1: transparent surfaces with
    the shadow pass-through filter."""
    return ProgramTable(
        raygen=raygen_primary,
        miss=[miss_background],
        hit_groups=[HitGroup(closest_hit_default),
                    HitGroup(closest_hit_default, any_hit_transparent)])
