"""UI generator: labels, buttons and sliders composed programmatically,
auto-arranged in a vertical stack, and emitted as ray-traced 3D entities.

Every emitted entity carries ui_flag=True so it lands on the UI visibility
mask: UI never casts shadows on the world and world geometry never blocks
picking. Text is flat quads from the built-in 16-segment vector font; no
textures anywhere. Widget frames put the origin at the top-left of the
widget's row, which makes slider hit coordinates directly comparable to
track geometry.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import _font16, accel, geometry
from .errors import DuplicateIdError, UnknownWidgetError
from .scene import Entity, MeshRef, Scene
from .shading import ResolvedMaterial

TRACK_PAD = 0.2
TRACK_THICKNESS = 0.06
KNOB_WIDTH = 0.12
KNOB_HEIGHT = 0.24
GLYPH_FILL = 0.6          # glyph height as a fraction of the row height
GLYPH_ASPECT = 0.55       # glyph width / glyph height
GLYPH_ADVANCE = 0.7       # advance / glyph height
SEG_THICKNESS = 0.09      # segment quad thickness / glyph height


@dataclass
class WidgetSpec:
    kind: str               # "label" | "button" | "slider"
    id: str
    text: str = ""
    min: float = 0.0
    max: float = 1.0
    value: float = 0.0


@dataclass
class UiLayout:
    width: float = 4.0
    button_height: float = 0.5
    slider_height: float = 0.3
    label_height: float = 0.4
    spacing: float = 0.1
    panel_depth: float = 0.05

    def height_of(self, spec: WidgetSpec) -> float:
        return {"label": self.label_height, "button": self.button_height,
                "slider": self.slider_height}[spec.kind]


def ui_materials() -> dict:
    """Material set bound by generated widgets; emissive so UI legibility
    does not depend on scene lighting."""
    mats = {
        "ui/panel": ResolvedMaterial("ui/panel", albedo=(0.12, 0.13, 0.16),
                                     emission=(0.05, 0.055, 0.07)),
        "ui/text": ResolvedMaterial("ui/text", albedo=(0.0, 0.0, 0.0),
                                    emission=(1.0, 1.0, 1.0)),
        "ui/track": ResolvedMaterial("ui/track", albedo=(0.2, 0.2, 0.2),
                                     emission=(0.12, 0.12, 0.14)),
        "ui/knob": ResolvedMaterial("ui/knob", albedo=(0.1, 0.1, 0.1),
                                    emission=(0.4, 0.55, 0.9)),
    }
    for m in mats.values():
        m.validate()
    return mats


def stack_height(specs: list, layout: UiLayout) -> float:
    if not specs:
        return 0.0
    return (sum(layout.height_of(s) for s in specs)
            + (len(specs) - 1) * layout.spacing)


def _text_mesh(text: str, glyph_height: float) -> accel.Mesh:
    """All lit segments of the string merged into one quad mesh (XY plane,
    facing +z, left-aligned at x=0, vertically spanning [0, glyph_height])."""
    gh = glyph_height
    gw = gh * GLYPH_ASPECT
    adv = gh * GLYPH_ADVANCE
    th = gh * SEG_THICKNESS
    positions = []
    tris = []
    for ci, ch in enumerate(text):
        x_base = ci * adv
        for (x0, y0, x1, y1) in _font16.glyph_segments(ch):
            ax, ay = x_base + x0 * gw, y0 * gh
            bx, by = x_base + x1 * gw, y1 * gh
            dx, dy = bx - ax, by - ay
            n = math.hypot(dx, dy)
            px, py = -dy / n * th * 0.5, dx / n * th * 0.5
            base = len(positions)
            positions += [[ax - px, ay - py, 0.0], [bx - px, by - py, 0.0],
                          [bx + px, by + py, 0.0], [ax + px, ay + py, 0.0]]
            tris += [[base, base + 1, base + 2], [base, base + 2, base + 3]]
    if not positions:
        # an all-blank string still needs valid (degenerate-free) geometry
        positions = [[0, 0, 0], [1e-5, 0, 0], [0, 1e-5, 0]]
        tris = [[0, 1, 2]]
    return accel.Mesh(np.array(positions, np.float32), np.array(tris, np.int32))


def text_width(text: str, glyph_height: float) -> float:
    if not text:
        return 0.0
    return (len(text) - 1) * glyph_height * GLYPH_ADVANCE \
        + glyph_height * GLYPH_ASPECT


def _mesh_ref(kind: str, mesh: accel.Mesh, *key_parts) -> MeshRef:
    digest = hashlib.sha1(repr(key_parts).encode()).hexdigest()[:10]
    return MeshRef(f"ui:{kind}:{digest}", mesh)


def _box_entity(name, material, size, center) -> Entity:
    from . import meshes
    sx, sy, sz = size
    ent = Entity(name, geometry.translate(*center),
                 mesh=_mesh_ref("box", meshes.box(sx, sy, sz), "box", *size),
                 material_name=material, ui_flag=True)
    return ent


def _quad_entity(name, material, w, h, center) -> Entity:
    from . import meshes
    ent = Entity(name, geometry.translate(*center),
                 mesh=_mesh_ref("quad", meshes.quad(w, h), "quad", w, h),
                 material_name=material, ui_flag=True)
    return ent


def _text_entity(text: str, glyph_height: float, x: float, y_center: float,
                 z: float) -> Entity:
    mesh = _text_mesh(text, glyph_height)
    ref = _mesh_ref("text", mesh, "text", text, glyph_height)
    return Entity("text", geometry.translate(x, y_center - glyph_height * 0.5, z),
                  mesh=ref, material_name="ui/text", ui_flag=True)


def _build_widget_children(spec: WidgetSpec, layout: UiLayout) -> list:
    """Child entities of one widget, in the widget's top-left frame."""
    h = layout.height_of(spec)
    w = layout.width
    d = layout.panel_depth
    children = []
    if spec.kind == "label":
        gh = h * GLYPH_FILL
        tw = text_width(spec.text, gh)
        children.append(_text_entity(spec.text, gh, (w - tw) * 0.5, -h * 0.5, 0.01))
    elif spec.kind == "button":
        children.append(_box_entity("panel", "ui/panel", (w, h, d),
                                    (w * 0.5, -h * 0.5, -d * 0.5)))
        gh = h * GLYPH_FILL
        tw = text_width(spec.text, gh)
        children.append(_text_entity(spec.text, gh, (w - tw) * 0.5, -h * 0.5, 0.01))
    elif spec.kind == "slider":
        track_len = w - 2.0 * TRACK_PAD
        children.append(_quad_entity("track", "ui/track", track_len,
                                     TRACK_THICKNESS,
                                     (TRACK_PAD + track_len * 0.5, -h * 0.5, 0.0)))
        frac = (spec.value - spec.min) / (spec.max - spec.min)
        knob_x = TRACK_PAD + frac * track_len
        children.append(_box_entity("knob", "ui/knob",
                                    (KNOB_WIDTH, KNOB_HEIGHT, TRACK_THICKNESS),
                                    (knob_x, -h * 0.5, 0.02)))
    else:
        raise ValueError(f"unknown widget kind {spec.kind!r}")
    return children


def _validate_specs(specs: list) -> None:
    seen = set()
    for spec in specs:
        if spec.id in seen:
            raise DuplicateIdError(f"duplicate widget id {spec.id!r}")
        seen.add(spec.id)
        if spec.kind == "slider":
            if not spec.min < spec.max:
                raise ValueError(f"slider {spec.id!r}: min must be < max")
            if not spec.min <= spec.value <= spec.max:
                raise ValueError(f"slider {spec.id!r}: value outside range")


def build_ui(specs: list, layout: UiLayout | None = None,
             root_name: str = "ui") -> Entity:
    """Vertical stack: widget k's top edge sits at
    y = -sum_{j<k}(height_j + spacing). Returns a detached entity subtree."""
    layout = layout or UiLayout()
    _validate_specs(specs)
    root = Entity(root_name)
    y = 0.0
    for spec in specs:
        widget = Entity(spec.id, geometry.translate(0.0, y, 0.0), ui_flag=True)
        widget.widget_spec = spec
        widget.widget_layout = layout
        widget.children = _build_widget_children(spec, layout)
        root.children.append(widget)
        y -= layout.height_of(spec) + layout.spacing
    return root


@dataclass
class PickResult:
    widget_id: str
    local: np.ndarray
    entity_path: str
    t: float


def _widget_ancestor(sc: Scene, entity_id: int, ui_root_id: int):
    ent = sc.entity(entity_id)
    while ent.parent_id is not None:
        if ent.parent_id == ui_root_id:
            return ent
        ent = sc.entity(ent.parent_id)
    return None


def _ui_instances(sc: Scene, ui_root_id: int):
    """TLAS instances for every meshed entity under the UI root."""
    instances = []
    store = {}
    stack = [sc.entity(ui_root_id)]
    while stack:
        ent = stack.pop()
        stack.extend(reversed(ent.children))
        if ent.mesh is None or not ent.ui_flag:
            continue
        if ent.mesh.key not in store:
            store[ent.mesh.key] = accel.build_blas(ent.mesh.mesh)
        instances.append(accel.Instance(
            blas_id=ent.mesh.key,
            transform=sc.world_transform(ent.entity_id),
            instance_id=ent.entity_id,
            hit_group_id=0,
            mask=accel.UI_BIT,
            debug_name=sc.entity_path(ent.entity_id)))
    return instances, store


def pick(sc: Scene, ui_root_id: int, ray: geometry.Ray) -> PickResult | None:
    """Nearest UI hit's owning widget; world rays (no UI mask bit) never
    return widgets. The hit point is reported in the widget's local frame."""
    if not (ray.mask & accel.UI_BIT):
        return None
    instances, store = _ui_instances(sc, ui_root_id)
    if not instances:
        return None
    tlas = accel.build_tlas(instances, store)
    hit = accel.trace_nearest(tlas, geometry.Ray(
        ray.origin, ray.direction, ray.t_min, ray.t_max, mask=accel.UI_BIT))
    if hit is None:
        return None
    widget = _widget_ancestor(sc, hit.instance_id, ui_root_id)
    if widget is None:
        return None
    local = geometry.apply_point(
        geometry.invert(sc.world_transform(widget.entity_id)), hit.position)
    return PickResult(widget.name, local, sc.entity_path(hit.instance_id), hit.t)


def slider_from_hit(spec: WidgetSpec, local_x: float,
                    layout: UiLayout | None = None) -> float:
    """Map a track-local x coordinate to a slider value, clamped to the
    slider's range at both ends."""
    layout = layout or UiLayout()
    track_len = layout.width - 2.0 * TRACK_PAD
    frac = (local_x - TRACK_PAD) / track_len
    frac = min(1.0, max(0.0, frac))
    return spec.min + frac * (spec.max - spec.min)


def update_widget(sc: Scene, ui_root_id: int, widget_id: str, *,
                  text: str | None = None, value: float | None = None) -> None:
    """Regenerate only the widget's entities; sibling layout positions are
    untouched."""
    root = sc.entity(ui_root_id)
    widget = next((c for c in root.children if c.name == widget_id), None)
    if widget is None:
        raise UnknownWidgetError(f"unknown widget id {widget_id!r}")
    spec: WidgetSpec = widget.widget_spec
    if text is not None:
        spec.text = text
    if value is not None:
        spec.value = min(spec.max, max(spec.min, value))
    for child in widget.children:
        _forget_subtree(sc, child)
    widget.children = _build_widget_children(spec, widget.widget_layout)
    for child in widget.children:
        sc._register(child, widget.entity_id)


def _forget_subtree(sc: Scene, ent: Entity) -> None:
    for child in ent.children:
        _forget_subtree(sc, child)
    if ent.entity_id is not None:
        sc._entities.pop(ent.entity_id, None)
