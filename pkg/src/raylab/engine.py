"""Frame orchestration: compile a scene document into kernel-ready arrays,
render through the compiled kernel (default) or the programmable pipeline
(reference backend), then run the post-process chain.

Both backends cast identical primary rays and implement the same shading
model; the kernel backend exists for speed and scales across threads with
byte-identical output for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from . import _kernels, accel, pipeline, postfx, shading, uigen
from .assets import SceneDoc
from .camera import CameraFrame
from .profiler import Profiler
from .scene import DEFAULT_MATERIAL
from .shading import ResolvedMaterial, SceneBindings

ROW_CHUNK = 8  # rows per worker task; fixed so chunking never affects output


@dataclass
class RenderSettings:
    width: int = 256
    height: int = 256
    samples_per_pixel: int = 1
    max_depth: int = 8
    seed: int = 0
    threads: int = 1
    backend: str = "kernel"  # or "programs"
    fxaa: bool = True
    roughness_blur: bool = True
    tile_size: int = 16


@dataclass
class CompiledScene:
    doc: SceneDoc
    tlas: accel.Tlas
    materials: list            # ResolvedMaterial per instance index
    mat_pack: tuple
    light_pack: tuple
    background: np.ndarray
    blas_store: dict = field(repr=False, default_factory=dict)


def full_material_map(doc: SceneDoc) -> dict:
    """Scene materials over the engine defaults and the UI material set."""
    out = {DEFAULT_MATERIAL: ResolvedMaterial(DEFAULT_MATERIAL)}
    out.update(uigen.ui_materials())
    out.update(doc.materials)
    return out


def compile_scene(doc: SceneDoc, blas_cache: dict | None = None) -> CompiledScene:
    """Flatten the entity tree into a TLAS plus kernel-ready arrays."""
    materials_map = full_material_map(doc)
    instances = doc.scene.collect_instances(materials_map)

    store = doc.scene.mesh_store()
    blas_cache = blas_cache if blas_cache is not None else {}
    blas_store = {}
    for key, mesh in store.items():
        if key not in blas_cache:
            blas_cache[key] = accel.build_blas(mesh)
        blas_store[key] = blas_cache[key]

    tlas = accel.build_tlas(instances, blas_store)
    materials = [doc.scene.material_for_instance(inst, materials_map)
                 for inst in instances]

    k = len(materials)
    albedo = np.zeros((k, 3))
    rough = np.zeros(k)
    refl = np.zeros(k)
    trans = np.zeros(k)
    ior = np.zeros(k)
    emission = np.zeros((k, 3))
    skip = np.zeros(k, dtype=np.uint8)
    for i, m in enumerate(materials):
        albedo[i] = m.albedo
        rough[i] = m.roughness
        refl[i] = m.reflectivity
        trans[i] = m.transparency
        ior[i] = m.refraction_index
        emission[i] = m.emission
        skip[i] = m.transparency >= 1.0
    mat_pack = (albedo, rough, refl, trans, ior, emission, skip)

    lights = doc.lights
    lpos = np.array([l.position for l in lights], dtype=np.float64).reshape(-1, 3)
    lint = np.array([l.intensity for l in lights], dtype=np.float64).reshape(-1, 3)
    lrad = np.array([l.radius for l in lights], dtype=np.float64)
    light_pack = (lpos, lint, lrad)

    return CompiledScene(doc, tlas, materials, mat_pack, light_pack,
                         np.asarray(doc.background, dtype=np.float64),
                         blas_store)


def render_hdr(compiled: CompiledScene, settings: RenderSettings,
               profiler: Profiler | None = None) -> pipeline.Framebuffer:
    """One dispatch: HDR color + roughness/depth aux planes, no postfx."""
    cam = CameraFrame.from_params(compiled.doc.camera, settings.width,
                                  settings.height)
    if settings.backend == "programs":
        return _render_programs(compiled, cam, settings, profiler)
    return _render_kernel(compiled, cam, settings, profiler)


def _render_kernel(compiled, cam, settings, profiler):
    w, h = settings.width, settings.height
    out_color = np.zeros((h, w, 3))
    out_rough = np.zeros((h, w))
    out_depth = np.zeros((h, w))
    args = (w, h, settings.samples_per_pixel, settings.max_depth,
            settings.seed, cam.origin, cam.right, cam.up, cam.forward,
            cam.tan_half, cam.aspect,
            compiled.tlas.tlas_pack, compiled.tlas.inst_pack,
            compiled.tlas.blas_pack, compiled.mat_pack, compiled.light_pack,
            compiled.background, shading.SHADOW_EPS, accel.SHADOW_MASK,
            out_color, out_rough, out_depth)
    chunks = [(y0, min(y0 + ROW_CHUNK, h)) for y0 in range(0, h, ROW_CHUNK)]
    profiler = profiler if profiler is not None else Profiler()
    threads = max(1, settings.threads)
    with profiler.measure("trace") as t:
        t.invocations = w * h * settings.samples_per_pixel
        if threads == 1:
            for y0, y1 in chunks:
                _kernels.render_rows(y0, y1, *args)
        else:
            with ThreadPoolExecutor(threads) as pool:
                list(pool.map(lambda c: _kernels.render_rows(c[0], c[1], *args),
                              chunks))
    return pipeline.Framebuffer(out_color, out_rough, out_depth)


def _render_programs(compiled, cam, settings, profiler):
    bindings = SceneBindings(camera=cam, materials=compiled.materials,
                             lights=compiled.doc.lights,
                             background=compiled.background)
    config = pipeline.DispatchConfig(
        width=settings.width, height=settings.height,
        samples_per_pixel=settings.samples_per_pixel,
        max_depth=settings.max_depth, seed=settings.seed,
        tile_size=settings.tile_size, threads=settings.threads)
    return pipeline.dispatch(compiled.tlas, shading.make_program_table(),
                             config, bindings, profiler)


def render_frame(compiled: CompiledScene, settings: RenderSettings,
                 profiler: Profiler | None = None):
    """Full frame: dispatch + fixed post chain. Returns (hdr, ldr)."""
    profiler = profiler if profiler is not None else Profiler()
    fb = render_hdr(compiled, settings, profiler)
    ldr = postfx.apply_post_chain(fb, use_blur=settings.roughness_blur,
                                  use_fxaa=settings.fxaa, profiler=profiler)
    return fb, ldr


def render_accumulated(compiled: CompiledScene, settings: RenderSettings,
                       passes: int, profiler: Profiler | None = None):
    """Progressive accumulation: pass p renders with seed settings.seed + p
    and frames are the running mean of the per-pass HDR planes.

    Yields (pass_number, mean Framebuffer, LdrImage); pass_number starts
    at 1. The service streams exactly these frames."""
    sums = None
    for p in range(passes):
        fb = render_hdr(compiled, replace(settings, seed=settings.seed + p),
                        profiler)
        if sums is None:
            sums = [fb.color.copy(), fb.roughness.copy(), fb.depth.copy()]
        else:
            sums[0] += fb.color
            sums[1] += fb.roughness
            sums[2] += fb.depth
        n = p + 1
        mean = pipeline.Framebuffer(sums[0] / n, sums[1] / n, sums[2] / n)
        ldr = postfx.apply_post_chain(mean, use_blur=settings.roughness_blur,
                                      use_fxaa=settings.fxaa,
                                      profiler=profiler)
        yield p + 1, mean, ldr


def save_png(ldr: postfx.LdrImage, path: str) -> None:
    Image.fromarray(ldr.pixels, "RGB").save(path, format="PNG")


def png_bytes(ldr: postfx.LdrImage) -> bytes:
    import io
    buf = io.BytesIO()
    Image.fromarray(ldr.pixels, "RGB").save(buf, format="PNG")
    return buf.getvalue()
