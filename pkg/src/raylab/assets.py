"""Asset pipeline: JSON material documents with single-parent inheritance,
COLLADA-subset import, the native scene JSON format, and a caching,
poll-based hot-reloading resource manager.

Engine space is right-handed Y-up; COLLADA up-axis is converted on import.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from . import geometry, meshes
from .accel import Mesh
from .camera import CameraParams
from .errors import (AssetParseError, DuplicateDefinitionError,
                     FieldRangeError, InheritanceCycleError,
                     ResourceNotFoundError, UnknownParentError,
                     UnknownReferenceError, UnsupportedFeatureError)
from .scene import Entity, MeshRef, Scene
from .shading import DEFAULTS, PointLight, ResolvedMaterial

MATERIAL_FIELDS = ("albedo", "roughness", "reflectivity", "refraction_index",
                   "transparency", "emission")


# -- material documents -------------------------------------------------------

@dataclass
class MaterialDoc:
    """Sparse material definition; unset fields resolve through the parent
    chain and finally the engine defaults."""

    name: str
    extends: str | None = None
    props: dict = field(default_factory=dict)


def _check_scalar(name, value, lo, hi):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise FieldRangeError(name, f"expected a number, got {value!r}")
    if not (lo <= float(value) <= hi):
        raise FieldRangeError(name, f"{value} outside [{lo}, {hi}]")
    return float(value)


def _check_rgb(name, value, lo, hi):
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or any(isinstance(c, bool) or not isinstance(c, (int, float))
                   for c in value)):
        raise FieldRangeError(name, f"expected [r, g, b], got {value!r}")
    out = tuple(float(c) for c in value)
    if any(not (lo <= c <= hi) for c in out):
        raise FieldRangeError(name, f"{value} outside [{lo}, {hi}]^3")
    return out


def _validate_props(name, raw):
    props = {}
    for key, value in raw.items():
        if key == "extends":
            continue
        if key not in MATERIAL_FIELDS:
            raise AssetParseError(f"material {name!r}: unknown key {key!r}")
        if key == "albedo":
            props[key] = _check_rgb(key, value, 0.0, 1.0)
        elif key == "emission":
            props[key] = _check_rgb(key, value, 0.0, math.inf)
        elif key == "refraction_index":
            v = _check_scalar(key, value, 0.0, math.inf)
            if not (v == 0.0 or v >= 1.0):
                raise FieldRangeError(key, f"{v} must be 0 or >= 1")
            props[key] = v
        else:
            props[key] = _check_scalar(key, value, 0.0, 1.0)
    return props


def _no_duplicate_keys(pairs):
    seen = set()
    for k, _ in pairs:
        if k in seen:
            raise DuplicateDefinitionError(f"duplicate definition of {k!r}")
        seen.add(k)
    return dict(pairs)


def parse_material_doc(text: str) -> list[MaterialDoc]:
    """Parse one material JSON document: {name: {extends?, fields...}}."""
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as e:
        raise AssetParseError(f"material JSON: {e.msg}", line=e.lineno) from None
    if not isinstance(data, dict):
        raise AssetParseError("material document must be a JSON object")
    docs = []
    for name, body in data.items():
        if not name:
            raise AssetParseError("material name must be non-empty")
        if not isinstance(body, dict):
            raise AssetParseError(f"material {name!r} must map to an object")
        extends = body.get("extends")
        if extends is not None and not isinstance(extends, str):
            raise AssetParseError(f"material {name!r}: extends must be a string")
        if extends == name:
            raise InheritanceCycleError([name, name])
        docs.append(MaterialDoc(name, extends, _validate_props(name, body)))
    return docs


def resolve_materials(docs: list[MaterialDoc]) -> dict[str, ResolvedMaterial]:
    """Resolve inheritance: child values win, chains resolve transitively,
    unset fields fall back to engine defaults. Order-independent."""
    by_name = {}
    for doc in docs:
        if doc.name in by_name:
            raise DuplicateDefinitionError(f"duplicate definition of {doc.name!r}")
        by_name[doc.name] = doc

    resolved_props: dict[str, dict] = {}

    def resolve(name, trail):
        if name in resolved_props:
            return resolved_props[name]
        if name in trail:
            cycle = trail[trail.index(name):] + [name]
            raise InheritanceCycleError(cycle)
        doc = by_name[name]
        if doc.extends is None:
            merged = dict(DEFAULTS)
        else:
            if doc.extends not in by_name:
                raise UnknownParentError(
                    f"material {name!r} extends unknown parent {doc.extends!r}")
            merged = dict(resolve(doc.extends, trail + [name]))
        merged.update(doc.props)
        resolved_props[name] = merged
        return merged

    out = {}
    for name in by_name:
        props = resolve(name, [])
        mat = ResolvedMaterial(name=name, **props)
        mat.validate()
        out[name] = mat
    return out


def serialize_material_docs(docs: list[MaterialDoc]) -> str:
    """Raw (inheritance-preserving) serialization back to the JSON schema."""
    body = {}
    for doc in docs:
        entry = {}
        if doc.extends is not None:
            entry["extends"] = doc.extends
        for key in MATERIAL_FIELDS:
            if key in doc.props:
                v = doc.props[key]
                entry[key] = list(v) if isinstance(v, tuple) else v
        body[doc.name] = entry
    return json.dumps(body, indent=2)


# -- resource manager ----------------------------------------------------------

@dataclass(frozen=True)
class ResourceKey:
    path: str
    kind: str

    @classmethod
    def make(cls, path: str, kind: str) -> "ResourceKey":
        return cls(os.path.normpath(os.path.abspath(path)), kind)


@dataclass
class ReloadReport:
    changed: list
    errors: list


class _CacheEntry:
    def __init__(self, value, fingerprint, mtime):
        self.value = value
        self.fingerprint = fingerprint
        self.mtime = mtime


class ResourceManager:
    """Caches parsed resources by normalized path + kind.

    Hot reload is poll-based: reload_if_changed re-fingerprints tracked
    files and re-parses the changed ones, retaining the previous value when
    the new content fails to parse. Callers must not reload concurrently
    with a dispatch.
    """

    def __init__(self):
        self._cache: dict[ResourceKey, _CacheEntry] = {}
        self._lock = threading.RLock()
        self.parse_count = 0
        self._parsers = {
            "materials": lambda data, path: parse_material_doc(data.decode("utf-8")),
            "collada": lambda data, path: parse_collada(data),
            "scene": lambda data, path: parse_scene_json(
                data.decode("utf-8"), self, os.path.dirname(path)),
        }

    def register_parser(self, kind: str, fn) -> None:
        self._parsers[kind] = fn

    def _parse(self, key: ResourceKey, data: bytes):
        self.parse_count += 1
        return self._parsers[key.kind](data, key.path)

    def load(self, path: str, kind: str):
        """Parse on first use, then serve the cached handle."""
        key = ResourceKey.make(path, kind)
        with self._lock:
            entry = self._cache.get(key)
            if entry is not None:
                return entry.value
            try:
                with open(key.path, "rb") as f:
                    data = f.read()
            except FileNotFoundError:
                raise ResourceNotFoundError(f"no such file: {path}") from None
            value = self._parse(key, data)
            self._cache[key] = _CacheEntry(value, hashlib.sha256(data).hexdigest(),
                                           os.path.getmtime(key.path))
            return value

    def get(self, key: ResourceKey):
        with self._lock:
            return self._cache[key].value

    def tracked_keys(self) -> list[ResourceKey]:
        with self._lock:
            return list(self._cache)

    def reload_if_changed(self) -> ReloadReport:
        """Re-fingerprint tracked files; re-parse changed ones.

        A changed file that fails to parse keeps its previous value and is
        reported in errors. Call only between dispatches."""
        changed = []
        errors = []
        with self._lock:
            for key, entry in self._cache.items():
                try:
                    with open(key.path, "rb") as f:
                        data = f.read()
                except OSError as e:
                    errors.append((key, f"unreadable: {e}"))
                    continue
                fingerprint = hashlib.sha256(data).hexdigest()
                if fingerprint == entry.fingerprint:
                    continue
                try:
                    value = self._parse(key, data)
                except Exception as e:  # keep serving the previous version
                    errors.append((key, str(e)))
                    entry.fingerprint = fingerprint
                    continue
                entry.value = value
                entry.fingerprint = fingerprint
                entry.mtime = os.path.getmtime(key.path)
                changed.append(key)
        return ReloadReport(changed, errors)


# -- COLLADA subset -----------------------------------------------------------

@dataclass
class AssetNode:
    name: str
    transform: np.ndarray
    mesh: str | None = None
    material: str | None = None
    children: list = field(default_factory=list)


@dataclass
class SceneAsset:
    meshes: dict[str, Mesh]
    nodes: list[AssetNode]
    up_axis: str = "Y_UP"


_Z_TO_Y = np.array([[1.0, 0.0, 0.0, 0.0],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, -1.0, 0.0, 0.0],
                    [0.0, 0.0, 0.0, 1.0]])

_UNSUPPORTED_PRIMS = ("polylist", "polygons", "lines", "linestrips",
                      "tristrips", "trifans")


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _floats(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split()], dtype=np.float64)


def _find(elem, name):
    for child in elem:
        if _local(child.tag) == name:
            return child
    return None


def _find_all(elem, name):
    return [c for c in elem if _local(c.tag) == name]


def _parse_sources(mesh_el):
    sources = {}
    for src in _find_all(mesh_el, "source"):
        arr = _find(src, "float_array")
        if arr is not None:
            sources[src.get("id")] = _floats(arr.text or "").reshape(-1, 3)
    vertices = {}
    for v in _find_all(mesh_el, "vertices"):
        for inp in _find_all(v, "input"):
            if inp.get("semantic") == "POSITION":
                vertices[v.get("id")] = inp.get("source", "").lstrip("#")
    return sources, vertices


def _parse_triangles(tri_el, sources, vertices):
    """De-index POSITION/NORMAL inputs to unified triangle index triples."""
    inputs = _find_all(tri_el, "input")
    pos_source = None
    nrm_source = None
    pos_off = 0
    nrm_off = None
    stride = 1
    for inp in inputs:
        off = int(inp.get("offset", 0))
        stride = max(stride, off + 1)
        sem = inp.get("semantic")
        ref = inp.get("source", "").lstrip("#")
        if sem == "VERTEX":
            pos_source = sources[vertices[ref]]
            pos_off = off
        elif sem == "NORMAL":
            nrm_source = sources[ref]
            nrm_off = off
    if pos_source is None:
        raise AssetParseError("triangles element lacks a VERTEX input")
    p_el = _find(tri_el, "p")
    idx = np.array([int(t) for t in (p_el.text or "").split()], dtype=np.int64)
    if idx.size % (3 * stride):
        raise AssetParseError("triangle index stream length mismatch")
    corners = idx.reshape(-1, stride)

    remap: dict = {}
    positions = []
    normals = [] if nrm_source is not None else None
    tri_indices = []
    for corner in corners:
        key = (int(corner[pos_off]),
               int(corner[nrm_off]) if nrm_off is not None else -1)
        vid = remap.get(key)
        if vid is None:
            vid = len(positions)
            remap[key] = vid
            positions.append(pos_source[key[0]])
            if normals is not None:
                normals.append(nrm_source[key[1]])
        tri_indices.append(vid)
    return (np.array(positions),
            np.array(normals) if normals is not None else None,
            np.array(tri_indices, dtype=np.int32).reshape(-1, 3))


def _node_transform(node_el) -> np.ndarray:
    """Compose matrix / translate / rotate / scale in document order."""
    m = geometry.identity()
    for child in node_el:
        tag = _local(child.tag)
        if tag == "matrix":
            vals = _floats(child.text or "")
            m = geometry.compose(m, vals.reshape(4, 4))
        elif tag == "translate":
            v = _floats(child.text or "")
            m = geometry.compose(m, geometry.translate(*v))
        elif tag == "rotate":
            v = _floats(child.text or "")
            m = geometry.compose(m, geometry.rotate(v[:3], v[3]))
        elif tag == "scale":
            v = _floats(child.text or "")
            m = geometry.compose(m, geometry.scale(*v))
    return m


def _parse_node(node_el, mesh_ids):
    name = node_el.get("name") or node_el.get("id") or "node"
    node = AssetNode(name, _node_transform(node_el))
    for child in node_el:
        tag = _local(child.tag)
        if tag == "instance_geometry":
            url = (child.get("url") or "").lstrip("#")
            if url not in mesh_ids:
                raise UnknownReferenceError(
                    f"instance_geometry references unknown geometry #{url}")
            node.mesh = url
            bind = _find(child, "bind_material")
            if bind is not None:
                tech = _find(bind, "technique_common")
                if tech is not None:
                    im = _find(tech, "instance_material")
                    if im is not None:
                        node.material = (im.get("target") or "").lstrip("#") or None
        elif tag == "node":
            node.children.append(_parse_node(child, mesh_ids))
    return node


def parse_collada(data: bytes | str) -> SceneAsset:
    """COLLADA subset: triangles with POSITION and optional NORMAL inputs,
    node hierarchies with matrix/translate/rotate/scale, instance_geometry
    with material binding. Z_UP assets are converted to Y-up."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise AssetParseError(f"malformed XML: {e.msg.split(':')[0]}",
                              line=e.position[0]) from None
    if _local(root.tag) != "COLLADA":
        raise AssetParseError("not a COLLADA document")

    up_axis = "Y_UP"
    asset_el = _find(root, "asset")
    if asset_el is not None:
        up_el = _find(asset_el, "up_axis")
        if up_el is not None and up_el.text:
            up_axis = up_el.text.strip()
    if up_axis not in ("Y_UP", "Z_UP"):
        raise UnsupportedFeatureError(f"up_axis {up_axis} not supported")
    convert = up_axis == "Z_UP"
    c3 = _Z_TO_Y[:3, :3]

    mesh_map: dict[str, Mesh] = {}
    lib_geo = _find(root, "library_geometries")
    if lib_geo is not None:
        for geo in _find_all(lib_geo, "geometry"):
            mesh_el = _find(geo, "mesh")
            if mesh_el is None:
                continue
            for bad in _UNSUPPORTED_PRIMS:
                if _find(mesh_el, bad) is not None:
                    raise UnsupportedFeatureError(
                        f"unsupported primitive element <{bad}> in geometry "
                        f"{geo.get('id')!r}")
            sources, vertices = _parse_sources(mesh_el)
            tri_el = _find(mesh_el, "triangles")
            if tri_el is None:
                continue
            pos, nrm, idx = _parse_triangles(tri_el, sources, vertices)
            if convert:
                pos = pos @ c3.T
                if nrm is not None:
                    nrm = nrm @ c3.T
            mesh_map[geo.get("id")] = Mesh(pos.astype(np.float32), idx,
                                           normals=None if nrm is None
                                           else nrm.astype(np.float32))

    nodes = []
    lib_vs = _find(root, "library_visual_scenes")
    if lib_vs is not None:
        for vs in _find_all(lib_vs, "visual_scene"):
            for node_el in _find_all(vs, "node"):
                nodes.append(_parse_node(node_el, mesh_map))

    if convert:
        inv = np.linalg.inv(_Z_TO_Y)
        for node in nodes:
            _convert_axis(node, inv)
    return SceneAsset(mesh_map, nodes, up_axis="Y_UP")


def _convert_axis(node: AssetNode, inv: np.ndarray):
    node.transform = _Z_TO_Y @ node.transform @ inv
    for child in node.children:
        _convert_axis(child, inv)


# -- native scene JSON ---------------------------------------------------------

@dataclass
class SceneDoc:
    """A loaded native scene: entity tree + camera/lights/materials."""

    scene: Scene
    camera: CameraParams
    background: np.ndarray
    lights: list
    material_docs: list
    materials: dict
    materials_path: str | None = None
    manager: ResourceManager | None = None

    def refresh_materials(self) -> None:
        """Re-resolve the material map from the current raw docs."""
        self.materials = resolve_materials(self.material_docs)


def _node_matrix(spec: dict) -> np.ndarray:
    if "matrix" in spec:
        vals = np.asarray(spec["matrix"], dtype=np.float64)
        if vals.size != 16:
            raise AssetParseError("node matrix must have 16 entries")
        return vals.reshape(4, 4)
    m = geometry.identity()
    if "translate" in spec:
        m = geometry.compose(m, geometry.translate(*spec["translate"]))
    if "rotate_deg" in spec:
        r = spec["rotate_deg"]
        m = geometry.compose(m, geometry.rotate(np.asarray(r["axis"], float),
                                                float(r["angle"])))
    if "scale" in spec:
        s = spec["scale"]
        s = [s, s, s] if isinstance(s, (int, float)) else s
        m = geometry.compose(m, geometry.scale(*s))
    return m


def _mesh_from_spec(spec, base_dir: str, manager: ResourceManager):
    """Mesh reference: either a path ("model.dae" or "model.dae#geom") or an
    inline primitive object ({"primitive": "sphere", ...})."""
    if isinstance(spec, str):
        path, _, frag = spec.partition("#")
        full = os.path.join(base_dir, path) if base_dir else path
        asset = manager.load(full, "collada")
        if frag:
            if frag not in asset.meshes:
                raise UnknownReferenceError(f"{path} has no geometry {frag!r}")
            name = frag
        elif len(asset.meshes) == 1:
            name = next(iter(asset.meshes))
        else:
            raise UnknownReferenceError(
                f"{path} holds {len(asset.meshes)} meshes; use path#name")
        return MeshRef(f"{ResourceKey.make(full, 'collada').path}#{name}",
                       asset.meshes[name])
    kind = spec.get("primitive")
    if kind == "box":
        size = spec.get("size", [1, 1, 1])
        key = f"primitive:box:{size[0]}:{size[1]}:{size[2]}"
        return MeshRef(key, meshes.box(*[float(s) for s in size]))
    if kind == "quad":
        w = float(spec.get("width", 1.0))
        h = float(spec.get("height", 1.0))
        return MeshRef(f"primitive:quad:{w}:{h}", meshes.quad(w, h))
    if kind == "sphere":
        r = float(spec.get("radius", 1.0))
        stacks = int(spec.get("stacks", 24))
        slices = int(spec.get("slices", 48))
        return MeshRef(f"primitive:sphere:{r}:{stacks}:{slices}",
                       meshes.uv_sphere(r, stacks, slices))
    raise AssetParseError(f"unknown mesh spec {spec!r}")


def _build_entity(spec: dict, base_dir: str, manager: ResourceManager) -> Entity:
    ent = Entity(
        name=spec.get("name", "node"),
        local_transform=_node_matrix(spec),
        material_name=spec.get("material"),
        ui_flag=bool(spec.get("ui", False)))
    if "mesh" in spec:
        ent.mesh = _mesh_from_spec(spec["mesh"], base_dir, manager)
    for child in spec.get("children", []):
        ent.children.append(_build_entity(child, base_dir, manager))
    return ent


def parse_scene_json(text: str, manager: ResourceManager | None = None,
                     base_dir: str = "") -> SceneDoc:
    manager = manager or ResourceManager()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise AssetParseError(f"scene JSON: {e.msg}", line=e.lineno) from None

    cam = data.get("camera", {})
    camera = CameraParams(
        position=np.asarray(cam.get("position", [0, 1, 3]), dtype=np.float64),
        look_at=np.asarray(cam.get("look_at", [0, 0, 0]), dtype=np.float64),
        fov_degrees=float(cam.get("fov_degrees", 60.0)))
    background = np.asarray(data.get("background", [0, 0, 0]), dtype=np.float64)

    lights = [PointLight(position=np.asarray(l["position"], dtype=np.float64),
                         intensity=np.asarray(l["intensity"], dtype=np.float64),
                         radius=float(l.get("radius", 0.05)))
              for l in data.get("lights", [])]

    material_docs = []
    materials_path = data.get("materials")
    if materials_path:
        full = os.path.join(base_dir, materials_path) if base_dir else materials_path
        material_docs = manager.load(full, "materials")

    sc = Scene()
    for spec in data.get("nodes", []):
        sc.add_child(0, _build_entity(spec, base_dir, manager))

    return SceneDoc(scene=sc, camera=camera, background=background,
                    lights=lights, material_docs=list(material_docs),
                    materials=resolve_materials(material_docs),
                    materials_path=materials_path, manager=manager)


def load_scene(path: str, manager: ResourceManager | None = None) -> SceneDoc:
    manager = manager or ResourceManager()
    doc = manager.load(path, "scene")
    return doc


def serialize_scene(doc: SceneDoc) -> str:
    """Serialize back to the native scene JSON (matrices at full precision,
    mesh references by key)."""
    def node_spec(ent: Entity) -> dict:
        spec = {"name": ent.name,
                "matrix": [float(v) for v in ent.local_transform.reshape(-1)]}
        if ent.mesh is not None:
            key = ent.mesh.key
            if key.startswith("primitive:"):
                parts = key.split(":")
                if parts[1] == "box":
                    spec["mesh"] = {"primitive": "box",
                                    "size": [float(p) for p in parts[2:5]]}
                elif parts[1] == "quad":
                    spec["mesh"] = {"primitive": "quad",
                                    "width": float(parts[2]),
                                    "height": float(parts[3])}
                else:
                    spec["mesh"] = {"primitive": "sphere",
                                    "radius": float(parts[2]),
                                    "stacks": int(parts[3]),
                                    "slices": int(parts[4])}
            else:
                spec["mesh"] = key
        if ent.material_name:
            spec["material"] = ent.material_name
        if ent.ui_flag:
            spec["ui"] = True
        if ent.children:
            spec["children"] = [node_spec(c) for c in ent.children]
        return spec

    body = {
        "camera": {"position": [float(v) for v in doc.camera.position],
                   "look_at": [float(v) for v in doc.camera.look_at],
                   "fov_degrees": doc.camera.fov_degrees},
        "background": [float(v) for v in doc.background],
        "lights": [{"position": [float(v) for v in l.position],
                    "intensity": [float(v) for v in l.intensity],
                    "radius": l.radius} for l in doc.lights],
        "nodes": [node_spec(c) for c in doc.scene.root.children],
    }
    if doc.materials_path:
        body["materials"] = doc.materials_path
    return json.dumps(body, indent=2)


def scene_from_asset(asset: SceneAsset, source: str = "asset") -> Scene:
    """Materialize a parsed COLLADA node tree as scene entities."""
    sc = Scene()

    def build(node: AssetNode) -> Entity:
        ent = Entity(name=node.name, local_transform=node.transform.copy(),
                     material_name=node.material)
        if node.mesh is not None:
            ent.mesh = MeshRef(f"{source}#{node.mesh}", asset.meshes[node.mesh])
        for child in node.children:
            ent.children.append(build(child))
        return ent

    for node in asset.nodes:
        sc.add_child(0, build(node))
    return sc
