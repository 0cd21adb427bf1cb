import math

import numpy as np
import pytest

from raylab import geometry as g
from raylab.errors import SingularTransformError

from oracles import plane_halfspace_triangle, random_unit


def make_ray(o, d, t_min=0.0, t_max=math.inf):
    return g.Ray(np.asarray(o, float), g.normalize(np.asarray(d, float)),
                 t_min, t_max)


class TestRayTriangle:
    tri = (g.vec3(-1, -1, 0), g.vec3(1, -1, 0), g.vec3(0, 1, 0))

    def test_head_on(self):
        hit = g.ray_triangle(make_ray((0, 0, -1), (0, 0, 1)), *self.tri)
        assert hit is not None
        assert hit[0] == pytest.approx(1.0, abs=1e-12)

    def test_points_away(self):
        assert g.ray_triangle(make_ray((0, 0, -1), (0, 0, -1)), *self.tri) is None

    def test_parallel_ray_misses(self):
        assert g.ray_triangle(make_ray((0, 0, -1), (1, 0, 0)), *self.tri) is None

    def test_degenerate_triangle_never_hits(self):
        a = g.vec3(0, 0, 0)
        b = g.vec3(1, 1, 1)
        assert g.ray_triangle(make_ray((0.5, 0.5, -1), (0, 0, 1)), a, b, b) is None

    def test_t_range_clips(self):
        assert g.ray_triangle(make_ray((0, 0, -1), (0, 0, 1), t_max=0.5), *self.tri) is None
        assert g.ray_triangle(make_ray((0, 0, -1), (0, 0, 1), t_min=2.0), *self.tri) is None

    def test_matches_plane_halfspace_oracle(self):
        rng = np.random.default_rng(7)
        hits = 0
        for _ in range(10_000):
            o = rng.uniform(-2, 2, 3)
            d = random_unit(rng)
            v0, v1, v2 = rng.uniform(-1.5, 1.5, (3, 3))
            ray = g.Ray(o, d, 0.0, math.inf)
            got = g.ray_triangle(ray, v0, v1, v2)
            want = plane_halfspace_triangle(o, d, v0, v1, v2, 0.0, math.inf)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert abs(got[0] - want) < 1e-6
                hits += 1
        assert hits > 100  # sanity: the sample exercised real hits

    def test_pure(self):
        ray = make_ray((0.1, -0.2, -1), (0.02, 0.03, 1))
        a = g.ray_triangle(ray, *self.tri)
        b = g.ray_triangle(ray, *self.tri)
        assert a == b


class TestRayAabb:
    box = g.Aabb(g.vec3(0, 0, 0), g.vec3(1, 1, 1))

    def test_enter_from_outside(self):
        res = g.ray_aabb(make_ray((-1, 0.5, 0.5), (1, 0, 0)), self.box)
        assert res is not None
        assert res[0] == pytest.approx(1.0)
        assert res[1] == pytest.approx(2.0)

    def test_origin_inside_returns_t_min(self):
        ray = make_ray((0.5, 0.5, 0.5), (1, 0, 0), t_min=0.001)
        res = g.ray_aabb(ray, self.box)
        assert res is not None
        assert res[0] == ray.t_min

    def test_empty_box(self):
        assert g.ray_aabb(make_ray((0, 0, 0), (1, 0, 0)), g.Aabb()) is None

    def test_axis_parallel_miss(self):
        assert g.ray_aabb(make_ray((-1, 2, 0.5), (1, 0, 0)), self.box) is None

    def test_matches_sampling_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            o = rng.uniform(-3, 3, 3)
            d = random_unit(rng)
            lo = rng.uniform(-2, 1, 3)
            hi = lo + rng.uniform(0.2, 2.0, 3)
            box = g.Aabb(lo, hi)
            res = g.ray_aabb(g.Ray(o, d, 0.0, 20.0), box)
            ts = np.linspace(0.0, 20.0, 4001)
            pts = o[None, :] + ts[:, None] * d[None, :]
            inside = np.all((pts > lo + 1e-9) & (pts < hi - 1e-9), axis=1)
            if res is None:
                assert not inside.any()
            else:
                t0, t1 = res
                if t1 - t0 > 1e-2:
                    assert inside.any()
                hit_ts = ts[inside]
                if hit_ts.size:
                    assert t0 <= hit_ts.min() + 1e-6
                    assert t1 >= hit_ts.max() - 1e-6


class TestOptics:
    def test_reflect_mirror_symmetry(self):
        d = g.vec3(1, -1, 0) / math.sqrt(2)
        n = g.vec3(0, 1, 0)
        assert np.allclose(g.reflect(d, n), g.vec3(1, 1, 0) / math.sqrt(2))

    def test_reflect_normal_incidence(self):
        assert np.allclose(g.reflect(g.vec3(0, 0, -1), g.vec3(0, 0, 1)),
                           g.vec3(0, 0, 1))

    def test_reflect_angle_equality_and_involution(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            n = random_unit(rng)
            d = random_unit(rng)
            if np.dot(d, n) >= -1e-6:
                d = -d
            if np.dot(d, n) >= -1e-6:
                continue
            r = g.reflect(d, n)
            assert abs(np.linalg.norm(r) - 1.0) < 1e-6
            cos_in = float(np.dot(d, -n))
            cos_out = float(np.dot(r, n))
            assert abs(cos_in - cos_out) < 1e-9
            assert np.allclose(g.reflect(r, n), d, atol=1e-9)

    def test_refract_normal_incidence_is_identity(self):
        d = g.vec3(0, 0, -1)
        n = g.vec3(0, 0, 1)
        for eta in (0.5, 1.0, 1.5):
            out = g.refract(d, n, eta)
            assert out is not None
            assert np.allclose(out, d, atol=1e-12)

    def test_total_internal_reflection_at_critical_angle(self):
        # exiting glass (eta_ratio = 1.5): critical angle asin(1/1.5)
        critical = math.degrees(math.asin(1.0 / 1.5))
        assert critical == pytest.approx(41.81, abs=0.01)
        n = g.vec3(0, 1, 0)
        for deg, expect_tir in ((60.0, True), (41.0, False), (42.0, True)):
            th = math.radians(deg)
            d = g.vec3(math.sin(th), -math.cos(th), 0)
            out = g.refract(d, n, 1.5)
            assert (out is None) == expect_tir

    def test_snell_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            n = random_unit(rng)
            d = random_unit(rng)
            if np.dot(d, n) >= -1e-3:
                d = -d
            if np.dot(d, n) >= -1e-3:
                continue
            eta = float(rng.uniform(0.4, 2.2))
            out = g.refract(d, n, eta)
            sin_i = math.sqrt(max(0.0, 1.0 - float(np.dot(d, n)) ** 2))
            if out is None:
                assert eta * sin_i > 1.0 - 1e-9
            else:
                sin_t = math.sqrt(max(0.0, 1.0 - float(np.dot(out, n)) ** 2))
                assert abs(sin_t - eta * sin_i) < 1e-6
                assert abs(np.linalg.norm(out) - 1.0) < 1e-6

    def test_refract_reciprocity(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            n = random_unit(rng)
            d = random_unit(rng)
            if np.dot(d, n) >= -1e-3:
                d = -d
            if np.dot(d, n) >= -1e-3:
                continue
            eta = float(rng.uniform(0.5, 2.0))
            out = g.refract(d, n, eta)
            if out is None:
                continue
            # exiting a parallel slab: same normal, reciprocal ratio
            back = g.refract(out, n, 1.0 / eta)
            assert back is not None
            assert np.allclose(back, d, atol=1e-5)

    def test_schlick_endpoints(self):
        assert g.schlick(1.0, 0.04) == pytest.approx(0.04)
        assert g.schlick(0.0, 0.04) == pytest.approx(1.0)
        assert g.fresnel_f0(1.5) == pytest.approx(0.04)
        assert g.fresnel_f0(0.0) == 1.0


class TestTransforms:
    def test_identity_compose(self):
        t = g.translate(1, 2, 3)
        assert np.array_equal(g.compose(g.identity(), t), t)

    def test_translation_chain(self):
        m = g.compose(g.translate(1, 0, 0), g.translate(0, 1, 0))
        assert np.allclose(g.apply_point(m, g.vec3(0, 0, 0)), g.vec3(1, 1, 0))

    def test_apply_dir_ignores_translation(self):
        m = g.translate(5, 5, 5)
        assert np.allclose(g.apply_dir(m, g.vec3(0, 0, 1)), g.vec3(0, 0, 1))

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            from oracles import random_affine
            m = random_affine(rng)
            assert np.allclose(g.compose(m, g.invert(m)), g.identity(), atol=1e-9)

    def test_inverse_of_composition(self):
        rng = np.random.default_rng(17)
        from oracles import random_affine
        a = random_affine(rng)
        b = random_affine(rng)
        lhs = g.invert(g.compose(a, b))
        rhs = g.compose(g.invert(b), g.invert(a))
        assert np.allclose(lhs, rhs, atol=1e-9)

    def test_singular_raises(self):
        with pytest.raises(SingularTransformError):
            g.invert(g.scale(1, 1, 0))
