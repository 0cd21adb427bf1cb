"""Programmable ray pipeline: dispatch of a ray-generation program over an
image grid, hit-group program selection, payload passing, recursion
limiting, and a pre-dispatch validation layer.

Programs are plain callables:
    raygen(ctx, x, y, sample) -> (r, g, b)
    closest_hit(ctx, hit, payload) -> Payload
    any_hit(ctx, hit, payload) -> bool   (False skips the hit, traversal
                                          continues)
    miss(ctx, payload) -> Payload

Every pixel/sample is computed independently, so dispatch output is
byte-identical for any tile size or worker count. Program-visible
randomness must come from ctx.rand, which is keyed by (seed, x, y,
sample), never from shared state.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _scalars, accel, geometry
from .errors import PayloadOverflowError, PipelineValidationError
from .profiler import Profiler

MAX_PAYLOAD_BUDGET = 1024
MAX_DEPTH_LIMIT = 31


@dataclass
class Payload:
    """Size-budgeted user data block carried between shader-stage programs;
    depth is the recursion counter enforced by trace_ray."""

    data: bytes = b""
    depth: int = 0


@dataclass
class HitGroup:
    closest_hit: object
    any_hit: object = None


@dataclass
class ProgramTable:
    raygen: object
    miss: list
    hit_groups: list


@dataclass
class DispatchConfig:
    width: int
    height: int
    samples_per_pixel: int = 1
    max_depth: int = 8
    payload_budget: int = 128
    seed: int = 0
    tile_size: int = 16
    threads: int = 1


@dataclass
class Framebuffer:
    """HDR color plane plus roughness/hit-depth aux planes."""

    color: np.ndarray
    roughness: np.ndarray
    depth: np.ndarray

    @classmethod
    def zeros(cls, width: int, height: int) -> "Framebuffer":
        return cls(np.zeros((height, width, 3)), np.zeros((height, width)),
                   np.zeros((height, width)))

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]


@dataclass
class Diagnostic:
    code: str
    message: str
    object_name: str = ""

    def __str__(self):
        where = f" [{self.object_name}]" if self.object_name else ""
        return f"{self.code}: {self.message}{where}"


def validate(tlas, programs: ProgramTable, config: DispatchConfig) -> list:
    """Structural checks run before dispatch; an empty list means go."""
    diags = []
    if programs.raygen is None:
        diags.append(Diagnostic("missing-raygen", "no ray generation program bound"))
    if not programs.miss:
        diags.append(Diagnostic("no-miss-program", "at least one miss program is required"))
    n_groups = len(programs.hit_groups)
    for inst in tlas.instances:
        if not 0 <= inst.hit_group_id < n_groups:
            diags.append(Diagnostic(
                "unresolved-hit-group",
                f"hit_group_id {inst.hit_group_id} outside table of {n_groups}",
                inst.debug_name or str(inst.instance_id)))
        if abs(geometry.determinant(np.asarray(inst.transform, float))) <= 1e-12:
            diags.append(Diagnostic(
                "singular-transform", "instance transform is singular",
                inst.debug_name or str(inst.instance_id)))
    if config.payload_budget > MAX_PAYLOAD_BUDGET:
        diags.append(Diagnostic(
            "payload-budget", f"payload_budget {config.payload_budget} exceeds "
            f"{MAX_PAYLOAD_BUDGET}"))
    if config.max_depth > MAX_DEPTH_LIMIT:
        diags.append(Diagnostic(
            "max-depth", f"max_depth {config.max_depth} exceeds {MAX_DEPTH_LIMIT}"))
    return diags


class TraceContext:
    """Per-tile execution context handed to programs.

    Holds read-only scene state plus the current pixel/sample cursor;
    programs must not mutate anything reachable from it except through
    write_aux.
    """

    def __init__(self, tlas, programs, config, bindings, fb_sums, counters):
        self.tlas = tlas
        self.programs = programs
        self.config = config
        self.bindings = bindings
        self._sums = fb_sums
        self._counters = counters
        self._has_any_hit = any(g.any_hit is not None for g in programs.hit_groups)
        self.cur_x = 0
        self.cur_y = 0
        self.cur_sample = 0
        self.current_ray = None
        self.in_occlusion_query = False

    # -- per-pixel helpers ---------------------------------------------------

    def rand(self, dim: int) -> float:
        """Deterministic uniform in [0,1) for the current pixel/sample."""
        return _scalars.pixel_rand(self.config.seed, self.cur_x, self.cur_y,
                                   self.cur_sample, dim)

    def write_aux(self, roughness: float, hit_t: float) -> None:
        """Accumulate aux-plane values at the dispatch pixel (mean over spp)."""
        self._sums[1][self.cur_y, self.cur_x] += roughness
        self._sums[2][self.cur_y, self.cur_x] += hit_t

    # -- tracing -------------------------------------------------------------

    def trace_ray(self, ray: geometry.Ray, payload: Payload,
                  miss_index: int = 0) -> Payload:
        """Trace with any-hit filtering, then run closest-hit or miss.

        At depth == max_depth the miss program answers without traversal."""
        cfg = self.config
        if len(payload.data) > cfg.payload_budget:
            raise PayloadOverflowError(
                f"payload of {len(payload.data)} bytes exceeds budget "
                f"{cfg.payload_budget}")
        if not 0 <= miss_index < len(self.programs.miss):
            raise PipelineValidationError([Diagnostic(
                "miss-index", f"miss_index {miss_index} out of range")])
        assert payload.depth <= cfg.max_depth
        self._counters["trace"] += 1
        if payload.depth >= cfg.max_depth:
            return self.programs.miss[miss_index](self, payload)

        hit = self._find_hit(ray, payload)
        prev_ray = self.current_ray
        self.current_ray = ray
        try:
            if hit is None:
                return self.programs.miss[miss_index](self, payload)
            group = self.programs.hit_groups[hit.hit_group_id]
            return group.closest_hit(self, hit, payload)
        finally:
            self.current_ray = prev_ray

    def _find_hit(self, ray, payload):
        if not self._has_any_hit:
            return accel.trace_nearest(self.tlas, ray)
        # run any-hit filters front to back; the first accepted hit wins
        for h in accel.trace_all_hits(self.tlas, ray):
            group = self.programs.hit_groups[h.hit_group_id]
            if group.any_hit is None or group.any_hit(self, h, payload):
                return h
        return None

    def trace_any(self, ray: geometry.Ray, payload: Payload | None = None) -> bool:
        """Occlusion query: True iff a filter-accepted hit exists."""
        payload = payload if payload is not None else Payload(b"", 0)
        if not self._has_any_hit:
            return accel.trace_any(self.tlas, ray)
        self.in_occlusion_query = True
        try:
            return self._find_hit(ray, payload) is not None
        finally:
            self.in_occlusion_query = False

    def material_of(self, hit) -> object:
        return self.bindings.materials[hit.instance_index]


def _tiles(width, height, tile):
    for y0 in range(0, height, tile):
        for x0 in range(0, width, tile):
            yield x0, y0, min(x0 + tile, width), min(y0 + tile, height)


def dispatch(tlas, programs: ProgramTable, config: DispatchConfig,
             scene_bindings=None, profiler: Profiler | None = None) -> Framebuffer:
    """Run the ray-generation program for every (pixel, sample).

    Deterministic for a fixed seed; output does not depend on tile_size or
    thread count. Validation always runs first (skipped under python -O,
    mirroring a release build) and aborts on any diagnostic.
    """
    if __debug__:
        diags = validate(tlas, programs, config)
        if diags:
            raise PipelineValidationError(diags)

    w, h, spp = config.width, config.height, config.samples_per_pixel
    sums = (np.zeros((h, w, 3)), np.zeros((h, w)), np.zeros((h, w)))
    counters_per_tile = []

    def run_tile(rect):
        x0, y0, x1, y1 = rect
        counters = {"raygen": 0, "trace": 0}
        ctx = TraceContext(tlas, programs, config, scene_bindings, sums, counters)
        color = sums[0]
        for y in range(y0, y1):
            for x in range(x0, x1):
                acc = np.zeros(3)
                for s in range(spp):
                    ctx.cur_x = x
                    ctx.cur_y = y
                    ctx.cur_sample = s
                    counters["raygen"] += 1
                    acc += np.asarray(programs.raygen(ctx, x, y, s), dtype=np.float64)
                color[y, x] = acc / spp
        return counters

    profiler = profiler if profiler is not None else Profiler()
    threads = max(1, int(config.threads or 1))
    rects = list(_tiles(w, h, config.tile_size))
    with profiler.measure("trace") as timer:
        if threads == 1:
            counters_per_tile = [run_tile(r) for r in rects]
        else:
            with ThreadPoolExecutor(threads) as pool:
                counters_per_tile = list(pool.map(run_tile, rects))
        timer.invocations = sum(c["raygen"] for c in counters_per_tile)

    assert timer.invocations == w * h * spp
    return Framebuffer(sums[0], sums[1] / spp, sums[2] / spp)


def profile_report(profiler: Profiler) -> list:
    """One entry per named pass in execution order."""
    return profiler.report()


def default_thread_count() -> int:
    env = os.environ.get("ENGINE_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)
