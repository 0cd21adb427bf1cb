"""Image-space passes: roughness-guided reflection blur (HDR), sRGB
tonemapping, and FXAA (display-encoded). The frame pipeline applies them in
exactly that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFinitePixelError
from .pipeline import Framebuffer

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
SIGMA_MAX = 4.0


@dataclass
class LdrImage:
    """8-bit RGB pixels, display-encoded."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class FxaaParams:
    contrast_threshold: float = 0.0312
    relative_threshold: float = 0.125
    subpixel_blend: float = 0.75


def _gauss_kernel(sigma: float) -> np.ndarray:
    r = int(math.ceil(3.0 * sigma))
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def _axis_blur(plane: np.ndarray, sigma_plane: np.ndarray, axis: int) -> np.ndarray:
    """Per-pixel Gaussian along one axis, kernel chosen by the destination
    pixel's sigma; edge-clamped. Pixels with sigma 0 are copied exactly."""
    out = plane.copy()
    for sigma in np.unique(sigma_plane):
        if sigma <= 0.0:
            continue
        sel = sigma_plane == sigma
        k = _gauss_kernel(float(sigma))
        r = len(k) // 2
        pad = [(0, 0)] * plane.ndim
        pad[axis] = (r, r)
        padded = np.pad(plane, pad, mode="edge")
        blurred = np.zeros_like(plane)
        for j, w in enumerate(k):
            sl = [slice(None)] * plane.ndim
            sl[axis] = slice(j, j + plane.shape[axis])
            blurred += w * padded[tuple(sl)]
        out[sel] = blurred[sel]
    return out


def roughness_blur(fb: Framebuffer) -> Framebuffer:
    """Separable Gaussian on the HDR color plane with per-pixel
    sigma = roughness * 4 px; roughness-0 pixels are bit-identical."""
    sigma = fb.roughness * SIGMA_MAX
    h = _axis_blur(fb.color, sigma, axis=1)
    v = _axis_blur(h, sigma, axis=0)
    return Framebuffer(v, fb.roughness.copy(), fb.depth.copy())


def tonemap_srgb(fb: Framebuffer) -> LdrImage:
    """Clamp to [0,1], apply the standard sRGB transfer curve, round
    half-up to 8 bits. Non-finite pixels abort with their coordinates."""
    color = fb.color
    bad = ~np.isfinite(color)
    if bad.any():
        y, x = np.argwhere(bad.any(axis=2))[0]
        raise NonFinitePixelError(int(x), int(y))
    c = np.clip(color, 0.0, 1.0)
    encoded = np.where(c <= 0.0031308, 12.92 * c,
                       1.055 * np.power(c, 1.0 / 2.4) - 0.055)
    return LdrImage(np.floor(encoded * 255.0 + 0.5).astype(np.uint8))


def _shift(plane: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Neighbor fetch with edge clamping."""
    h, w = plane.shape[:2]
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return plane[np.ix_(ys, xs)]


def fxaa(image: LdrImage, params: FxaaParams | None = None) -> LdrImage:
    """Luma-based edge smoothing on the display-encoded image.

    Pixels whose 3x3 neighborhood luma range falls below
    max(contrast_threshold, relative_threshold * max_luma) are copied
    unchanged; edge pixels are blended toward the across-edge neighbor with
    the larger gradient, scaled by the subpixel factor.
    """
    params = params or FxaaParams()
    rgb = image.pixels.astype(np.float64) / 255.0
    luma = rgb @ LUMA_WEIGHTS

    m = luma
    nw, n_, ne = _shift(luma, -1, -1), _shift(luma, -1, 0), _shift(luma, -1, 1)
    w_, e_ = _shift(luma, 0, -1), _shift(luma, 0, 1)
    sw, s_, se = _shift(luma, 1, -1), _shift(luma, 1, 0), _shift(luma, 1, 1)

    stack = np.stack([nw, n_, ne, w_, m, e_, sw, s_, se])
    max_l = stack.max(axis=0)
    rng = max_l - stack.min(axis=0)
    threshold = np.maximum(params.contrast_threshold,
                           params.relative_threshold * max_l)
    edge = rng >= threshold

    # edge orientation from second differences (FXAA-style)
    horz = np.abs(nw + ne - 2 * n_) + 2 * np.abs(w_ + e_ - 2 * m) \
        + np.abs(sw + se - 2 * s_)
    vert = np.abs(nw + sw - 2 * w_) + 2 * np.abs(n_ + s_ - 2 * m) \
        + np.abs(ne + se - 2 * e_)
    is_horz = horz >= vert  # a horizontal edge blends vertically

    grad_n = np.abs(n_ - m)
    grad_s = np.abs(s_ - m)
    grad_w = np.abs(w_ - m)
    grad_e = np.abs(e_ - m)
    pick_n = grad_n >= grad_s
    pick_w = grad_w >= grad_e

    rgb_n, rgb_s = _shift(rgb, -1, 0), _shift(rgb, 1, 0)
    rgb_w, rgb_e = _shift(rgb, 0, -1), _shift(rgb, 0, 1)
    partner = np.where(is_horz[..., None],
                       np.where(pick_n[..., None], rgb_n, rgb_s),
                       np.where(pick_w[..., None], rgb_w, rgb_e))

    lowpass = (2.0 * (n_ + s_ + w_ + e_) + nw + ne + sw + se) / 12.0
    with np.errstate(invalid="ignore", divide="ignore"):
        amount = np.clip(np.abs(lowpass - m) / np.where(rng > 0, rng, 1.0), 0.0, 1.0)
    amount = amount * amount * (3.0 - 2.0 * amount)  # smoothstep
    blend = (amount * amount) * params.subpixel_blend

    out = image.pixels.copy()
    mixed = rgb + blend[..., None] * (partner - rgb)
    quantized = np.floor(mixed * 255.0 + 0.5).astype(np.uint8)
    out[edge] = quantized[edge]
    return LdrImage(out)


def apply_post_chain(fb: Framebuffer, use_blur: bool = True,
                     use_fxaa: bool = True, profiler=None,
                     fxaa_params: FxaaParams | None = None) -> LdrImage:
    """Fixed pass order: roughness_blur (HDR) -> tonemap_srgb -> fxaa."""
    from .profiler import Profiler
    profiler = profiler if profiler is not None else Profiler()
    if use_blur:
        with profiler.measure("roughness_blur"):
            fb = roughness_blur(fb)
    with profiler.measure("tonemap"):
        ldr = tonemap_srgb(fb)
    if use_fxaa:
        with profiler.measure("fxaa") as t:
            t.invocations = ldr.width * ldr.height
            ldr = fxaa(ldr, fxaa_params)
    return ldr
