import math

import numpy as np
import pytest

from raylab import accel, geometry as g
from raylab.errors import (DuplicateIdError, EmptyGeometryError,
                           SingularTransformError, UnknownReferenceError)

from oracles import linear_scan_nearest, random_affine, random_unit


def soup_mesh(rng, n_tris, spread=4.0, size=0.6):
    base = rng.uniform(-spread, spread, (n_tris, 1, 3))
    tris = base + rng.uniform(-size, size, (n_tris, 3, 3))
    positions = tris.reshape(-1, 3).astype(np.float32)
    indices = np.arange(n_tris * 3, dtype=np.int32).reshape(-1, 3)
    return accel.Mesh(positions=positions, indices=indices)


def oracle_entry(mesh, transform, instance_id, mask=0xFF):
    pos = mesh.positions.astype(np.float64)
    tri = mesh.indices
    return {"inv": g.invert(np.asarray(transform, float)),
            "v0": pos[tri[:, 0]], "v1": pos[tri[:, 1]], "v2": pos[tri[:, 2]],
            "instance_id": instance_id, "mask": mask}


def walk_containment(nmin, nmax, a, b, leaf):
    for n in range(len(a)):
        if not leaf[n]:
            for c in (a[n], b[n]):
                assert np.all(nmin[n] <= nmin[c] + 1e-12)
                assert np.all(nmax[n] >= nmax[c] - 1e-12)


class TestBlasBuild:
    def test_single_triangle_single_leaf(self):
        mesh = accel.Mesh(np.array([[-1, -1, 0], [1, -1, 0], [0, 1, 0]], np.float32),
                          np.array([[0, 1, 2]], np.int32))
        blas = accel.build_blas(mesh)
        assert blas.node_count == 1
        assert blas.leaf[0]
        assert np.allclose(blas.nmin[0], [-1, -1, 0])
        assert np.allclose(blas.nmax[0], [1, 1, 0])

    def test_two_distant_triangles(self):
        mesh = accel.Mesh(
            np.array([[-1, -1, 0], [1, -1, 0], [0, 1, 0],
                      [99, -1, 0], [101, -1, 0], [100, 1, 0]], np.float32),
            np.array([[0, 1, 2], [3, 4, 5]], np.int32))
        blas = accel.build_blas(mesh)
        assert blas.node_count == 3
        assert not blas.leaf[0]
        l, r = int(blas.a[0]), int(blas.b[0])
        assert blas.leaf[l] and blas.leaf[r]
        # child bounds disjoint on x
        assert blas.nmax[l][0] < blas.nmin[r][0] or blas.nmax[r][0] < blas.nmin[l][0]

    def test_empty_mesh_rejected(self):
        mesh = accel.Mesh(np.zeros((0, 3), np.float32), np.zeros((0, 3), np.int32))
        with pytest.raises(EmptyGeometryError):
            accel.build_blas(mesh)

    def test_leaf_size_and_node_count_invariants(self):
        rng = np.random.default_rng(2)
        mesh = soup_mesh(rng, 300)
        blas = accel.build_blas(mesh)
        assert blas.node_count <= 2 * mesh.triangle_count - 1
        for n in range(blas.node_count):
            if blas.leaf[n]:
                count = int(blas.b[n]) - int(blas.a[n])
                assert 1 <= count <= accel.BuildConfig().max_leaf_size

    def test_containment_walk(self):
        rng = np.random.default_rng(3)
        blas = accel.build_blas(soup_mesh(rng, 257))
        walk_containment(blas.nmin, blas.nmax, blas.a, blas.b, blas.leaf)
        # every node's bounds must contain its triangles
        for n in range(blas.node_count):
            if blas.leaf[n]:
                for k in range(int(blas.a[n]), int(blas.b[n])):
                    for vs in (blas.v0[k], blas.v1[k], blas.v2[k]):
                        assert np.all(vs >= blas.nmin[n] - 1e-12)
                        assert np.all(vs <= blas.nmax[n] + 1e-12)

    def test_build_determinism(self):
        rng = np.random.default_rng(4)
        mesh = soup_mesh(rng, 400)
        b1 = accel.build_blas(mesh)
        b2 = accel.build_blas(mesh)
        for attr in ("nmin", "nmax", "a", "b", "leaf", "prim_index"):
            assert getattr(b1, attr).tobytes() == getattr(b2, attr).tobytes()

    def test_debug_tree_roundtrips_bounds(self):
        rng = np.random.default_rng(5)
        blas = accel.build_blas(soup_mesh(rng, 37))
        tree = blas.debug_tree()
        assert tree["bounds"][0] == blas.nmin[0].tolist()

        def walk(node):
            lo, hi = node["bounds"]
            for child in node.get("children", []):
                clo, chi = child["bounds"]
                assert all(l <= c + 1e-12 for l, c in zip(lo, clo))
                assert all(h >= c - 1e-12 for h, c in zip(hi, chi))
                walk(child)
        walk(tree)


class TestBlasTraversal:
    def test_soup_matches_linear_scan(self):
        rng = np.random.default_rng(6)
        mesh = soup_mesh(rng, 500)
        blas = accel.build_blas(mesh)
        tlas = accel.build_tlas(
            [accel.Instance("m", g.identity(), 0)], {"m": blas})
        entries = [oracle_entry(mesh, g.identity(), 0)]
        for _ in range(10_000):
            o = rng.uniform(-6, 6, 3)
            d = random_unit(rng)
            got = accel.trace_nearest(tlas, g.Ray(o, d))
            want = linear_scan_nearest(entries, o, d)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert got.triangle_index == want[1]
                assert abs(got.t - want[2]) < 1e-6


class TestTlas:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.rng = rng
        self.meshes = {f"m{i}": soup_mesh(rng, 40, spread=1.0) for i in range(3)}
        self.store = {k: accel.build_blas(m) for k, m in self.meshes.items()}

    def test_empty_tlas_misses(self):
        tlas = accel.build_tlas([], self.store)
        ray = g.Ray(g.vec3(0, 0, -5), g.vec3(0, 0, 1))
        assert accel.trace_nearest(tlas, ray) is None
        assert accel.trace_any(tlas, ray) is False

    def test_identity_instance_equals_blas(self):
        tlas = accel.build_tlas([accel.Instance("m0", g.identity(), 0)], self.store)
        entries = [oracle_entry(self.meshes["m0"], g.identity(), 0)]
        rng = np.random.default_rng(10)
        for _ in range(500):
            o = rng.uniform(-3, 3, 3)
            d = random_unit(rng)
            got = accel.trace_nearest(tlas, g.Ray(o, d))
            want = linear_scan_nearest(entries, o, d)
            assert (got is None) == (want is None)
            if got:
                assert (got.instance_id, got.triangle_index) == (want[0], want[1])
                assert abs(got.t - want[2]) < 1e-6

    def test_fifty_instances_match_object_space_oracle(self):
        rng = np.random.default_rng(12)
        instances, entries = [], []
        for i in range(50):
            key = f"m{i % 3}"
            m = random_affine(rng)
            instances.append(accel.Instance(key, m, i, debug_name=f"i{i}"))
            entries.append(oracle_entry(self.meshes[key], m, i))
        tlas = accel.build_tlas(instances, self.store)
        for _ in range(10_000):
            o = rng.uniform(-8, 8, 3)
            d = random_unit(rng)
            got = accel.trace_nearest(tlas, g.Ray(o, d))
            want = linear_scan_nearest(entries, o, d)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert (got.instance_id, got.triangle_index) == (want[0], want[1])
                assert abs(got.t - want[2]) < 1e-6

    def test_nearer_of_two_instances_wins(self):
        tri = accel.Mesh(np.array([[-1, -1, 0], [1, -1, 0], [0, 1, 0]], np.float32),
                         np.array([[0, 1, 2]], np.int32))
        store = {"tri": accel.build_blas(tri)}
        tlas = accel.build_tlas(
            [accel.Instance("tri", g.translate(0, 0, 5), 7),
             accel.Instance("tri", g.translate(0, 0, 2), 8)], store)
        hit = accel.trace_nearest(tlas, g.Ray(g.vec3(0, 0, 0), g.vec3(0, 0, 1)))
        assert hit.instance_id == 8
        assert hit.t == pytest.approx(2.0)

    def test_dangling_blas_id(self):
        with pytest.raises(UnknownReferenceError):
            accel.build_tlas([accel.Instance("nope", g.identity(), 0)], self.store)

    def test_duplicate_instance_id(self):
        with pytest.raises(DuplicateIdError):
            accel.build_tlas([accel.Instance("m0", g.identity(), 1),
                              accel.Instance("m1", g.identity(), 1)], self.store)

    def test_singular_transform_rejected(self):
        with pytest.raises(SingularTransformError):
            accel.build_tlas([accel.Instance("m0", g.scale(1, 0, 1), 0)], self.store)

    def test_mask_filters_instances(self):
        tri = accel.Mesh(np.array([[-1, -1, 0], [1, -1, 0], [0, 1, 0]], np.float32),
                         np.array([[0, 1, 2]], np.int32))
        store = {"tri": accel.build_blas(tri)}
        tlas = accel.build_tlas(
            [accel.Instance("tri", g.identity(), 0, mask=accel.UI_BIT)], store)
        ray_world = g.Ray(g.vec3(0, 0, -2), g.vec3(0, 0, 1), mask=accel.SHADOW_MASK)
        ray_ui = g.Ray(g.vec3(0, 0, -2), g.vec3(0, 0, 1), mask=accel.UI_BIT)
        assert accel.trace_nearest(tlas, ray_world) is None
        assert accel.trace_nearest(tlas, ray_ui) is not None

    def test_trace_any_agrees_with_nearest(self):
        rng = np.random.default_rng(14)
        instances = [accel.Instance(f"m{i % 3}", random_affine(rng), i)
                     for i in range(20)]
        tlas = accel.build_tlas(instances, self.store)
        for _ in range(10_000):
            o = rng.uniform(-6, 6, 3)
            d = random_unit(rng)
            ray = g.Ray(o, d)
            assert accel.trace_any(tlas, ray) == (accel.trace_nearest(tlas, ray) is not None)

    def test_normals_transform_by_inverse_transpose(self):
        # a floor quad scaled non-uniformly must keep a unit +y normal
        quad = accel.Mesh(
            np.array([[-1, 0, -1], [1, 0, -1], [1, 0, 1], [-1, 0, 1]], np.float32),
            np.array([[0, 2, 1], [0, 3, 2]], np.int32))
        store = {"q": accel.build_blas(quad)}
        m = g.scale(3.0, 1.0, 0.25)
        tlas = accel.build_tlas([accel.Instance("q", m, 0)], store)
        hit = accel.trace_nearest(tlas, g.Ray(g.vec3(0.5, 2, 0.1), g.vec3(0, -1, 0)))
        assert hit is not None
        assert np.allclose(np.abs(hit.normal), [0, 1, 0], atol=1e-12)
        assert np.linalg.norm(hit.normal) == pytest.approx(1.0)


class TestRefit:
    def build(self):
        rng = np.random.default_rng(21)
        mesh = soup_mesh(rng, 60, spread=1.0)
        store = {"m": accel.build_blas(mesh)}
        instances = [accel.Instance("m", random_affine(rng), i) for i in range(12)]
        return rng, mesh, store, instances, accel.build_tlas(instances, store)

    def test_refit_identity_keeps_bounds(self):
        _, _, _, instances, tlas = self.build()
        same = {i.instance_id: i.transform for i in instances}
        refit = accel.refit_tlas(tlas, same)
        assert np.allclose(refit.nmin, tlas.nmin)
        assert np.allclose(refit.nmax, tlas.nmax)

    def test_translate_one_grows_root(self):
        _, _, _, instances, tlas = self.build()
        moved = g.compose(g.translate(10, 0, 0), instances[0].transform)
        refit = accel.refit_tlas(tlas, {instances[0].instance_id: moved})
        assert refit.nmax[0][0] > tlas.nmax[0][0]
        assert np.all(refit.nmax[0] >= refit.world_bounds[0, 1] - 1e-12)
        assert np.all(refit.nmin[0] <= refit.world_bounds[0, 0] + 1e-12)

    def test_unknown_instance_id(self):
        _, _, _, _, tlas = self.build()
        with pytest.raises(UnknownReferenceError):
            accel.refit_tlas(tlas, {999: g.identity()})

    def test_refit_matches_rebuild(self):
        rng, mesh, store, instances, tlas = self.build()
        jittered = []
        updates = {}
        for inst in instances:
            m = g.compose(g.translate(*rng.uniform(-0.5, 0.5, 3)), inst.transform)
            updates[inst.instance_id] = m
            jittered.append(accel.Instance(inst.blas_id, m, inst.instance_id))
        refit = accel.refit_tlas(tlas, updates)
        walk_containment(refit.nmin, refit.nmax, refit.a, refit.b, refit.leaf)
        rebuilt = accel.build_tlas(jittered, store)
        for _ in range(2000):
            o = rng.uniform(-6, 6, 3)
            d = random_unit(rng)
            ray = g.Ray(o, d)
            h1 = accel.trace_nearest(refit, ray)
            h2 = accel.trace_nearest(rebuilt, ray)
            assert (h1 is None) == (h2 is None)
            if h1:
                assert (h1.instance_id, h1.triangle_index) == (h2.instance_id, h2.triangle_index)
                assert abs(h1.t - h2.t) < 1e-9


class TestSahQuality:
    def test_mean_node_visits_bounded(self):
        rng = np.random.default_rng(30)
        mesh = soup_mesh(rng, 1200, spread=5.0, size=0.25)
        tlas = accel.build_tlas(
            [accel.Instance("m", g.identity(), 0)], {"m": accel.build_blas(mesh)})
        total = 0
        n_rays = 10_000
        for _ in range(n_rays):
            o = rng.uniform(-7, 7, 3)
            d = random_unit(rng)
            _, visits = accel.trace_stats(tlas, g.Ray(o, d))
            total += visits
        mean = total / n_rays
        assert mean < 0.2 * mesh.triangle_count
