"""Two-level acceleration structures: per-mesh triangle BVH (BLAS) and an
instance-level BVH (TLAS) over transformed BLAS references.

Builds use a binned surface-area heuristic and are fully deterministic:
identical input produces byte-identical node arrays. Built structures are
immutable; refits return a new TLAS sharing the immutable parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, geometry
from .errors import (DuplicateIdError, EmptyGeometryError,
                     SingularTransformError, UnknownReferenceError)

# visibility mask bits: world geometry vs UI geometry
WORLD_BIT = 0x01
UI_BIT = 0x02
ALL_BITS = 0xFF
SHADOW_MASK = ALL_BITS & ~UI_BIT


@dataclass
class Mesh:
    """Triangle mesh; float32 storage, float64 math everywhere downstream."""

    positions: np.ndarray
    indices: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float32)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int32).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.ascontiguousarray(self.normals, dtype=np.float32)

    def validate(self):
        if self.indices.size and (self.indices.min() < 0
                                  or self.indices.max() >= len(self.positions)):
            raise UnknownReferenceError("mesh indices out of range")
        if self.normals is not None and len(self.normals) != len(self.positions):
            raise UnknownReferenceError("normal count does not match position count")

    @property
    def triangle_count(self) -> int:
        return len(self.indices)


@dataclass
class BuildConfig:
    bins: int = 16
    max_leaf_size: int = 4
    traversal_cost: float = 1.0
    intersect_cost: float = 1.5


def _box_area(bmin, bmax):
    d = bmax - bmin
    return 2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0])


def _build_bvh(pmin: np.ndarray, pmax: np.ndarray, config: BuildConfig):
    """Binned-SAH BVH over primitive bounds.

    Returns (nmin, nmax, a, b, leaf, order): for inner nodes a/b are child
    node indices; for leaves they are the [start, end) range into order.
    """
    n = len(pmin)
    centroids = (pmin + pmax) * 0.5
    order = np.arange(n, dtype=np.int32)

    nmin: list = []
    nmax: list = []
    na: list = []
    nb: list = []
    nleaf: list = []

    def alloc():
        nmin.append(None)
        nmax.append(None)
        na.append(0)
        nb.append(0)
        nleaf.append(0)
        return len(na) - 1

    stack = [(0, n, alloc())]
    while stack:
        lo, hi, ni = stack.pop()
        idxs = order[lo:hi]
        bmin = pmin[idxs].min(axis=0)
        bmax = pmax[idxs].max(axis=0)
        nmin[ni] = bmin
        nmax[ni] = bmax
        count = hi - lo

        mid = None
        if count > 1:
            mid = _choose_split(idxs, centroids, pmin, pmax, bmin, bmax, config)
            if mid is not None:
                part, nleft = mid
                order[lo:hi] = part
                mid = lo + nleft
        if mid is None and count > config.max_leaf_size:
            # unsplittable cluster (identical centroids): halve by index
            mid = lo + count // 2

        if mid is None:
            na[ni] = lo
            nb[ni] = hi
            nleaf[ni] = 1
        else:
            li = alloc()
            ri = alloc()
            na[ni] = li
            nb[ni] = ri
            stack.append((mid, hi, ri))
            stack.append((lo, mid, li))

    return (np.ascontiguousarray(np.stack(nmin), dtype=np.float64),
            np.ascontiguousarray(np.stack(nmax), dtype=np.float64),
            np.array(na, dtype=np.int32),
            np.array(nb, dtype=np.int32),
            np.array(nleaf, dtype=np.uint8),
            order)


def _choose_split(idxs, centroids, pmin, pmax, bmin, bmax, config):
    """Best binned-SAH split of one node, or None to make a leaf.

    Returns (partitioned index array, left count)."""
    count = len(idxs)
    c = centroids[idxs]
    cb_min = c.min(axis=0)
    cb_max = c.max(axis=0)
    ext = cb_max - cb_min
    axis = int(np.argmax(ext))
    if ext[axis] < 1e-12:
        return None

    nb = config.bins
    rel = (c[:, axis] - cb_min[axis]) / ext[axis]
    bin_of = np.minimum((rel * nb).astype(np.int32), nb - 1)

    bin_count = np.zeros(nb, dtype=np.int64)
    bin_min = np.full((nb, 3), np.inf)
    bin_max = np.full((nb, 3), -np.inf)
    np.add.at(bin_count, bin_of, 1)
    for k in range(3):
        np.minimum.at(bin_min[:, k], bin_of, pmin[idxs, k])
        np.maximum.at(bin_max[:, k], bin_of, pmax[idxs, k])

    # prefix/suffix sweeps of counts and grown bounds
    best_cost = math.inf
    best_split = -1
    lmin = np.full(3, np.inf)
    lmax = np.full(3, -np.inf)
    lcount = 0
    lareas = np.zeros(nb)
    lcounts = np.zeros(nb, dtype=np.int64)
    for s in range(nb - 1):
        if bin_count[s]:
            lmin = np.minimum(lmin, bin_min[s])
            lmax = np.maximum(lmax, bin_max[s])
            lcount += int(bin_count[s])
        lareas[s] = _box_area(lmin, lmax) if lcount else 0.0
        lcounts[s] = lcount
    rmin = np.full(3, np.inf)
    rmax = np.full(3, -np.inf)
    rcount = 0
    parent_area = _box_area(bmin, bmax)
    if parent_area <= 0.0:
        parent_area = 1.0
    for s in range(nb - 1, 0, -1):
        if bin_count[s]:
            rmin = np.minimum(rmin, bin_min[s])
            rmax = np.maximum(rmax, bin_max[s])
            rcount += int(bin_count[s])
        nl = lcounts[s - 1]
        nr = rcount
        if nl == 0 or nr == 0:
            continue
        rarea = _box_area(rmin, rmax)
        cost = config.traversal_cost + (
            lareas[s - 1] * nl + rarea * nr) / parent_area * config.intersect_cost
        if cost < best_cost:
            best_cost = cost
            best_split = s

    if best_split < 0:
        return None
    if count <= config.max_leaf_size and best_cost >= count * config.intersect_cost:
        return None

    mask = bin_of < best_split
    part = np.concatenate([idxs[mask], idxs[~mask]])
    return part, int(mask.sum())


@dataclass
class Blas:
    """Flat-array triangle BVH for one mesh (object space)."""

    nmin: np.ndarray
    nmax: np.ndarray
    a: np.ndarray
    b: np.ndarray
    leaf: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    has_normals: bool
    prim_index: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.a)

    @property
    def triangle_count(self) -> int:
        return len(self.v0)

    def root_bounds(self) -> geometry.Aabb:
        return geometry.Aabb(self.nmin[0].copy(), self.nmax[0].copy())

    def debug_tree(self, node: int = 0) -> dict:
        """JSON-serializable node tree (bounds + ranges) for inspection."""
        d = {"bounds": [self.nmin[node].tolist(), self.nmax[node].tolist()]}
        if self.leaf[node]:
            d["triangles"] = [int(self.a[node]), int(self.b[node])]
        else:
            d["children"] = [self.debug_tree(int(self.a[node])),
                             self.debug_tree(int(self.b[node]))]
        return d


def build_blas(mesh: Mesh, config: BuildConfig | None = None) -> Blas:
    """Binned-SAH BVH over a mesh's triangles; deterministic."""
    config = config or BuildConfig()
    mesh.validate()
    if mesh.triangle_count == 0:
        raise EmptyGeometryError("cannot build a BVH over an empty mesh")

    pos = mesh.positions.astype(np.float64)
    tri = mesh.indices
    c0 = pos[tri[:, 0]]
    c1 = pos[tri[:, 1]]
    c2 = pos[tri[:, 2]]
    pmin = np.minimum(np.minimum(c0, c1), c2)
    pmax = np.maximum(np.maximum(c0, c1), c2)

    nmin, nmax, a, b, leaf, order = _build_bvh(pmin, pmax, config)

    if mesh.normals is not None:
        nrm = mesh.normals.astype(np.float64)
        n0 = np.ascontiguousarray(nrm[tri[order, 0]])
        n1 = np.ascontiguousarray(nrm[tri[order, 1]])
        n2 = np.ascontiguousarray(nrm[tri[order, 2]])
        has_normals = True
    else:
        n0 = n1 = n2 = np.zeros((len(order), 3), dtype=np.float64)
        has_normals = False

    return Blas(nmin, nmax, a, b, leaf,
                np.ascontiguousarray(c0[order]),
                np.ascontiguousarray(c1[order]),
                np.ascontiguousarray(c2[order]),
                n0, n1, n2, has_normals, order.copy())


@dataclass
class Instance:
    """Placement of a BLAS in the scene with per-instance render data."""

    blas_id: object
    transform: np.ndarray
    instance_id: int
    hit_group_id: int = 0
    mask: int = ALL_BITS
    debug_name: str = ""


@dataclass
class HitRecord:
    t: float
    instance_id: int
    triangle_index: int
    u: float
    v: float
    position: np.ndarray
    normal: np.ndarray
    hit_group_id: int
    instance_index: int = -1


@dataclass
class Tlas:
    """Instance-level BVH plus kernel-ready flattened arrays."""

    instances: list
    nmin: np.ndarray
    nmax: np.ndarray
    a: np.ndarray
    b: np.ndarray
    leaf: np.ndarray
    order: np.ndarray
    blas_list: list = field(repr=False, default_factory=list)
    inst_pack: tuple = field(repr=False, default=())
    blas_pack: tuple = field(repr=False, default=())
    world_bounds: np.ndarray = field(repr=False, default=None)

    @property
    def tlas_pack(self) -> tuple:
        return (self.nmin, self.nmax, self.a, self.b, self.leaf, self.order)

    def instance_count(self) -> int:
        return len(self.instances)

    def debug_tree(self, node: int = 0) -> dict:
        if len(self.a) == 0:
            return {"empty": True}
        d = {"bounds": [self.nmin[node].tolist(), self.nmax[node].tolist()]}
        if self.leaf[node]:
            d["instances"] = [int(self.order[s])
                              for s in range(self.a[node], self.b[node])]
        else:
            d["children"] = [self.debug_tree(int(self.a[node])),
                             self.debug_tree(int(self.b[node]))]
        return d


def _instance_bounds(blas: Blas, transform: np.ndarray):
    """World-space AABB of a transformed BLAS root box."""
    lo = blas.nmin[0]
    hi = blas.nmax[0]
    pts = np.empty((8, 3))
    for i in range(8):
        p = np.array([lo[0] if i & 1 == 0 else hi[0],
                      lo[1] if i & 2 == 0 else hi[1],
                      lo[2] if i & 4 == 0 else hi[2]])
        pts[i] = geometry.apply_point(transform, p)
    return pts.min(axis=0), pts.max(axis=0)


def _flatten_blases(instances, blas_store):
    """Assign compact BLAS indices in first-reference order; concatenate."""
    blas_index: dict = {}
    blas_list: list = []
    for inst in instances:
        if inst.blas_id not in blas_store:
            raise UnknownReferenceError(f"instance {inst.instance_id!r} "
                                        f"references unknown blas {inst.blas_id!r}")
        if inst.blas_id not in blas_index:
            blas_index[inst.blas_id] = len(blas_list)
            blas_list.append(blas_store[inst.blas_id])

    node_off = np.zeros(len(blas_list) + 1, dtype=np.int32)
    tri_off = np.zeros(len(blas_list) + 1, dtype=np.int32)
    for i, bl in enumerate(blas_list):
        node_off[i + 1] = node_off[i] + bl.node_count
        tri_off[i + 1] = tri_off[i] + bl.triangle_count

    def cat(attr, shape_tail, dtype):
        if blas_list:
            return np.ascontiguousarray(
                np.concatenate([getattr(bl, attr) for bl in blas_list]), dtype=dtype)
        return np.zeros((0,) + shape_tail, dtype=dtype)

    blas_pack = (node_off, tri_off,
                 cat("nmin", (3,), np.float64), cat("nmax", (3,), np.float64),
                 cat("a", (), np.int32), cat("b", (), np.int32),
                 cat("leaf", (), np.uint8),
                 cat("v0", (3,), np.float64), cat("v1", (3,), np.float64),
                 cat("v2", (3,), np.float64),
                 cat("n0", (3,), np.float64), cat("n1", (3,), np.float64),
                 cat("n2", (3,), np.float64),
                 np.array([bl.has_normals for bl in blas_list], dtype=np.uint8))
    return blas_index, blas_list, blas_pack


def _instance_arrays(instances, blas_index, blas_list):
    k = len(instances)
    inv34 = np.zeros((k, 3, 4), dtype=np.float64)
    m34 = np.zeros((k, 3, 4), dtype=np.float64)
    nrm33 = np.zeros((k, 3, 3), dtype=np.float64)
    blas_idx = np.zeros(k, dtype=np.int32)
    masks = np.zeros(k, dtype=np.uint8)
    bounds = np.zeros((k, 2, 3), dtype=np.float64)

    for i, inst in enumerate(instances):
        m = np.asarray(inst.transform, dtype=np.float64)
        if not geometry.is_affine(m):
            raise SingularTransformError(
                f"instance {inst.debug_name or inst.instance_id} transform is not affine")
        try:
            inv = geometry.invert(m)
        except SingularTransformError:
            raise SingularTransformError(
                f"instance {inst.debug_name or inst.instance_id} transform is singular")
        inv34[i] = inv[:3, :]
        m34[i] = m[:3, :]
        nrm33[i] = geometry.normal_matrix(m)
        blas_idx[i] = blas_index[inst.blas_id]
        masks[i] = inst.mask & 0xFF
        lo, hi = _instance_bounds(blas_list[blas_idx[i]], m)
        bounds[i, 0] = lo
        bounds[i, 1] = hi
    return inv34, m34, nrm33, blas_idx, masks, bounds


def build_tlas(instances: list, blas_store: dict,
               config: BuildConfig | None = None) -> Tlas:
    """BVH over world-space instance bounds; deterministic."""
    config = config or BuildConfig()
    seen = set()
    for inst in instances:
        if inst.instance_id in seen:
            raise DuplicateIdError(f"duplicate instance_id {inst.instance_id}")
        seen.add(inst.instance_id)

    blas_index, blas_list, blas_pack = _flatten_blases(instances, blas_store)
    inv34, m34, nrm33, blas_idx, masks, bounds = _instance_arrays(
        instances, blas_index, blas_list)

    if instances:
        nmin, nmax, a, b, leaf, order = _build_bvh(bounds[:, 0], bounds[:, 1], config)
    else:
        nmin = np.zeros((0, 3))
        nmax = np.zeros((0, 3))
        a = np.zeros(0, dtype=np.int32)
        b = np.zeros(0, dtype=np.int32)
        leaf = np.zeros(0, dtype=np.uint8)
        order = np.zeros(0, dtype=np.int32)

    return Tlas(list(instances), nmin, nmax, a, b, leaf, order,
                blas_list=blas_list,
                inst_pack=(inv34, m34, nrm33, blas_idx, masks),
                blas_pack=blas_pack,
                world_bounds=bounds)


def refit_tlas(tlas: Tlas, updated_transforms: dict) -> Tlas:
    """Re-expand node bounds for new instance transforms, keeping topology.

    updated_transforms maps instance_id -> new 4x4 transform and may cover
    any subset of instances."""
    known = {inst.instance_id for inst in tlas.instances}
    for iid in updated_transforms:
        if iid not in known:
            raise UnknownReferenceError(f"unknown instance_id {iid} in refit")

    instances = []
    for inst in tlas.instances:
        if inst.instance_id in updated_transforms:
            inst = Instance(inst.blas_id, np.asarray(
                updated_transforms[inst.instance_id], dtype=np.float64),
                inst.instance_id, inst.hit_group_id, inst.mask, inst.debug_name)
        instances.append(inst)

    blas_index = {}
    for inst in instances:
        if inst.blas_id not in blas_index:
            blas_index[inst.blas_id] = len(blas_index)
    inv34, m34, nrm33, blas_idx, masks, bounds = _instance_arrays(
        instances, blas_index, tlas.blas_list)

    nmin = tlas.nmin.copy()
    nmax = tlas.nmax.copy()
    # children have larger indices than parents, so one reverse sweep refits
    for n in range(len(tlas.a) - 1, -1, -1):
        if tlas.leaf[n]:
            idxs = tlas.order[tlas.a[n]:tlas.b[n]]
            nmin[n] = bounds[idxs, 0].min(axis=0)
            nmax[n] = bounds[idxs, 1].max(axis=0)
        else:
            nmin[n] = np.minimum(nmin[tlas.a[n]], nmin[tlas.b[n]])
            nmax[n] = np.maximum(nmax[tlas.a[n]], nmax[tlas.b[n]])

    return Tlas(instances, nmin, nmax, tlas.a, tlas.b, tlas.leaf, tlas.order,
                blas_list=tlas.blas_list,
                inst_pack=(inv34, m34, nrm33, blas_idx, masks),
                blas_pack=tlas.blas_pack,
                world_bounds=bounds)


def _stacks():
    return (np.empty(_kernels.STACK_SIZE, np.int32),
            np.empty(_kernels.STACK_SIZE, np.int32))


def trace_nearest(tlas: Tlas, ray: geometry.Ray) -> HitRecord | None:
    """Globally nearest hit across instances whose mask intersects the
    ray's; position and normal are returned in world space."""
    tstack, bstack = _stacks()
    inst, tri, t, u, v, _ = _kernels.trace_nearest_impl(
        tlas.tlas_pack, tlas.inst_pack, tlas.blas_pack,
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, ray.mask, tstack, bstack)
    if inst < 0:
        return None
    return _make_hit(tlas, ray, inst, tri, t, u, v)


def _make_hit(tlas: Tlas, ray: geometry.Ray, inst: int, tri: int,
              t: float, u: float, v: float) -> HitRecord:
    nx, ny, nz = _kernels.hit_normal_impl(tlas.inst_pack, tlas.blas_pack,
                                          inst, tri, u, v)
    instance = tlas.instances[inst]
    tri_off = tlas.blas_pack[1]
    local_tri = tri - int(tri_off[tlas.inst_pack[3][inst]])
    blas = tlas.blas_list[int(tlas.inst_pack[3][inst])]
    return HitRecord(
        t=float(t),
        instance_id=instance.instance_id,
        triangle_index=int(blas.prim_index[local_tri]),
        u=float(u), v=float(v),
        position=ray.origin + t * ray.direction,
        normal=geometry.vec3(nx, ny, nz),
        hit_group_id=instance.hit_group_id,
        instance_index=int(inst))


def trace_any(tlas: Tlas, ray: geometry.Ray,
              skip: np.ndarray | None = None) -> bool:
    """True iff any intersection exists in [t_min, t_max]; terminates early.

    skip is an optional per-instance uint8 array marking pass-through
    instances (used for fully transparent shadow occluders)."""
    if skip is None:
        skip = np.zeros(len(tlas.instances), dtype=np.uint8)
    tstack, bstack = _stacks()
    return bool(_kernels.trace_any_impl(
        tlas.tlas_pack, tlas.inst_pack, tlas.blas_pack, skip,
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, ray.mask, tstack, bstack))


def trace_all_hits(tlas: Tlas, ray: geometry.Ray, cap: int = 256):
    """Every hit along the ray sorted by ascending t.

    Returns a list of HitRecords; the programmable pipeline uses this to
    run any-hit filters in a deterministic front-to-back order."""
    tstack, bstack = _stacks()
    out_inst = np.empty(cap, np.int32)
    out_tri = np.empty(cap, np.int32)
    out_t = np.empty(cap, np.float64)
    out_u = np.empty(cap, np.float64)
    out_v = np.empty(cap, np.float64)
    n = _kernels.collect_hits_impl(
        tlas.tlas_pack, tlas.inst_pack, tlas.blas_pack,
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, ray.mask,
        out_inst, out_tri, out_t, out_u, out_v, tstack, bstack)
    hits = [_make_hit(tlas, ray, int(out_inst[i]), int(out_tri[i]),
                      float(out_t[i]), float(out_u[i]), float(out_v[i]))
            for i in range(n)]
    hits.sort(key=lambda h: (h.t, h.instance_index, h.triangle_index))
    return hits


def trace_nearest_batch(tlas: Tlas, origins: np.ndarray, dirs: np.ndarray,
                        t_min: float = 0.0, t_max: float = math.inf,
                        mask: int = ALL_BITS):
    """Vector form of trace_nearest for oracle-scale ray sets.

    Returns (instance_id, triangle_index, t) arrays; instance_id and
    triangle_index are -1 where the ray misses."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    n = len(origins)
    out_inst = np.empty(n, np.int32)
    out_tri = np.empty(n, np.int32)
    out_t = np.empty(n, np.float64)
    out_u = np.empty(n, np.float64)
    out_v = np.empty(n, np.float64)
    _kernels.trace_batch(tlas.tlas_pack, tlas.inst_pack, tlas.blas_pack,
                         origins, dirs, t_min, t_max, mask,
                         out_inst, out_tri, out_t, out_u, out_v)
    hit = out_inst >= 0
    inst_ids = np.full(n, -1, dtype=np.int64)
    tri_ids = np.full(n, -1, dtype=np.int64)
    if hit.any():
        id_by_index = np.array([i.instance_id for i in tlas.instances], dtype=np.int64)
        inst_ids[hit] = id_by_index[out_inst[hit]]
        # rebase global triangle indices to the original mesh numbering
        prim_concat = np.concatenate([bl.prim_index for bl in tlas.blas_list])
        tri_ids[hit] = prim_concat[out_tri[hit]]
    out_t[~hit] = np.inf
    return inst_ids, tri_ids, out_t


def trace_stats(tlas: Tlas, ray: geometry.Ray):
    """(hit or None, node visit count) for traversal cost measurements."""
    tstack, bstack = _stacks()
    inst, tri, t, u, v, visits = _kernels.trace_nearest_impl(
        tlas.tlas_pack, tlas.inst_pack, tlas.blas_pack,
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, ray.mask, tstack, bstack)
    hit = None if inst < 0 else _make_hit(tlas, ray, inst, tri, t, u, v)
    return hit, int(visits)
