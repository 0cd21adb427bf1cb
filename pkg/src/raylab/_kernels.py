"""Compiled traversal and shading kernels.

All kernels are numba njit with nogil so row-chunk workers scale across
threads; every pixel is a pure function of (scene arrays, seed, x, y,
sample), which makes output bytes independent of tiling and worker count.

Array packs (tuples of ndarrays) keep signatures manageable:
  tlas_pack = (tnmin, tnmax, ta, tb, tleaf, torder)
  inst_pack = (inv34, m34, nrm33, blas_idx, masks)
  blas_pack = (node_off, tri_off, bnmin, bnmax, ba, bb, bleaf,
               tv0, tv1, tv2, tn0, tn1, tn2, has_norm)
  mat_pack  = (albedo, roughness, reflectivity, transparency, ior,
               emission, shadow_skip)
BLAS child/leaf indices are local to their BLAS; node_off/tri_off rebase.
"""

import math

import numpy as np
from numba import njit

from ._scalars import (fresnel_f0, moller_trumbore, pixel_rand, reflect_dir,
                       refract_dir, schlick_weight, slab_test)

_JIT = dict(cache=True, fastmath=False)

STACK_SIZE = 128
SHADE_STACK = 80
INV_PI = 1.0 / math.pi


@njit(inline="always", **_JIT)
def _inv_component(d):
    return 1.0 / d if d != 0.0 else math.inf


@njit(**_JIT)
def _blas_nearest(blas_pack, b, ox, oy, oz, dx, dy, dz, t_min, t_max,
                  bstack):
    """Nearest triangle of one BLAS in object space.

    Returns (local_tri, t, u, v, visits); local_tri -1 on miss.
    """
    node_off, tri_off, bnmin, bnmax, ba, bb, bleaf, tv0, tv1, tv2 = blas_pack[:10]
    base = node_off[b]
    tbase = tri_off[b]
    idx = _inv_component(dx)
    idy = _inv_component(dy)
    idz = _inv_component(dz)

    best_tri = -1
    best_t = t_max
    best_u = 0.0
    best_v = 0.0
    visits = 0

    top = 0
    bstack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        n = base + bstack[top]
        visits += 1
        hit, _, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, best_t,
                              bnmin[n, 0], bnmin[n, 1], bnmin[n, 2],
                              bnmax[n, 0], bnmax[n, 1], bnmax[n, 2])
        if not hit:
            continue
        if bleaf[n]:
            for k in range(tbase + ba[n], tbase + bb[n]):
                ok, t, u, v = moller_trumbore(
                    ox, oy, oz, dx, dy, dz, t_min, best_t,
                    tv0[k, 0], tv0[k, 1], tv0[k, 2],
                    tv1[k, 0], tv1[k, 1], tv1[k, 2],
                    tv2[k, 0], tv2[k, 1], tv2[k, 2])
                if ok and t < best_t:
                    best_t = t
                    best_tri = k
                    best_u = u
                    best_v = v
        else:
            # order children front-to-back by entry distance
            cl = base + ba[n]
            cr = base + bb[n]
            hl, tl, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, best_t,
                                  bnmin[cl, 0], bnmin[cl, 1], bnmin[cl, 2],
                                  bnmax[cl, 0], bnmax[cl, 1], bnmax[cl, 2])
            hr, tr, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, best_t,
                                  bnmin[cr, 0], bnmin[cr, 1], bnmin[cr, 2],
                                  bnmax[cr, 0], bnmax[cr, 1], bnmax[cr, 2])
            if hl and hr:
                if tl <= tr:
                    bstack[top] = bb[n]
                    top += 1
                    bstack[top] = ba[n]
                    top += 1
                else:
                    bstack[top] = ba[n]
                    top += 1
                    bstack[top] = bb[n]
                    top += 1
            elif hl:
                bstack[top] = ba[n]
                top += 1
            elif hr:
                bstack[top] = bb[n]
                top += 1
    return best_tri, best_t, best_u, best_v, visits


@njit(**_JIT)
def _blas_any(blas_pack, b, ox, oy, oz, dx, dy, dz, t_min, t_max, bstack):
    node_off, tri_off, bnmin, bnmax, ba, bb, bleaf, tv0, tv1, tv2 = blas_pack[:10]
    base = node_off[b]
    tbase = tri_off[b]
    idx = _inv_component(dx)
    idy = _inv_component(dy)
    idz = _inv_component(dz)
    top = 0
    bstack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        n = base + bstack[top]
        hit, _, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, t_max,
                              bnmin[n, 0], bnmin[n, 1], bnmin[n, 2],
                              bnmax[n, 0], bnmax[n, 1], bnmax[n, 2])
        if not hit:
            continue
        if bleaf[n]:
            for k in range(tbase + ba[n], tbase + bb[n]):
                ok, _, _, _ = moller_trumbore(
                    ox, oy, oz, dx, dy, dz, t_min, t_max,
                    tv0[k, 0], tv0[k, 1], tv0[k, 2],
                    tv1[k, 0], tv1[k, 1], tv1[k, 2],
                    tv2[k, 0], tv2[k, 1], tv2[k, 2])
                if ok:
                    return True
        else:
            bstack[top] = ba[n]
            top += 1
            bstack[top] = bb[n]
            top += 1
    return False


@njit(inline="always", **_JIT)
def _to_object(inv34, i, ox, oy, oz, dx, dy, dz):
    """Transform a world ray into instance i's object space.

    The direction is not renormalized, so the t parameter is preserved."""
    nox = inv34[i, 0, 0] * ox + inv34[i, 0, 1] * oy + inv34[i, 0, 2] * oz + inv34[i, 0, 3]
    noy = inv34[i, 1, 0] * ox + inv34[i, 1, 1] * oy + inv34[i, 1, 2] * oz + inv34[i, 1, 3]
    noz = inv34[i, 2, 0] * ox + inv34[i, 2, 1] * oy + inv34[i, 2, 2] * oz + inv34[i, 2, 3]
    ndx = inv34[i, 0, 0] * dx + inv34[i, 0, 1] * dy + inv34[i, 0, 2] * dz
    ndy = inv34[i, 1, 0] * dx + inv34[i, 1, 1] * dy + inv34[i, 1, 2] * dz
    ndz = inv34[i, 2, 0] * dx + inv34[i, 2, 1] * dy + inv34[i, 2, 2] * dz
    return nox, noy, noz, ndx, ndy, ndz


@njit(**_JIT)
def trace_nearest_impl(tlas_pack, inst_pack, blas_pack,
                       ox, oy, oz, dx, dy, dz, t_min, t_max, mask,
                       tstack, bstack):
    """Globally nearest hit. Returns (inst, global_tri, t, u, v, visits)."""
    tnmin, tnmax, ta, tb, tleaf, torder = tlas_pack
    inv34 = inst_pack[0]
    blas_idx = inst_pack[3]
    masks = inst_pack[4]
    tri_off = blas_pack[1]

    best_inst = -1
    best_tri = -1
    best_t = t_max
    best_u = 0.0
    best_v = 0.0
    visits = 0

    if torder.shape[0] == 0:
        return best_inst, best_tri, best_t, best_u, best_v, visits

    idx = _inv_component(dx)
    idy = _inv_component(dy)
    idz = _inv_component(dz)

    top = 0
    tstack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        n = tstack[top]
        visits += 1
        hit, _, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, best_t,
                              tnmin[n, 0], tnmin[n, 1], tnmin[n, 2],
                              tnmax[n, 0], tnmax[n, 1], tnmax[n, 2])
        if not hit:
            continue
        if tleaf[n]:
            for s in range(ta[n], tb[n]):
                i = torder[s]
                if masks[i] & mask == 0:
                    continue
                iox, ioy, ioz, idxv, idyv, idzv = _to_object(
                    inv34, i, ox, oy, oz, dx, dy, dz)
                b = blas_idx[i]
                tri, t, u, v, bv = _blas_nearest(
                    blas_pack, b, iox, ioy, ioz, idxv, idyv, idzv,
                    t_min, best_t, bstack)
                visits += bv
                if tri >= 0 and t < best_t:
                    best_t = t
                    best_inst = i
                    best_tri = tri
                    best_u = u
                    best_v = v
        else:
            cl = ta[n]
            cr = tb[n]
            hl, tl, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, best_t,
                                  tnmin[cl, 0], tnmin[cl, 1], tnmin[cl, 2],
                                  tnmax[cl, 0], tnmax[cl, 1], tnmax[cl, 2])
            hr, tr, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, best_t,
                                  tnmin[cr, 0], tnmin[cr, 1], tnmin[cr, 2],
                                  tnmax[cr, 0], tnmax[cr, 1], tnmax[cr, 2])
            if hl and hr:
                if tl <= tr:
                    tstack[top] = cr
                    top += 1
                    tstack[top] = cl
                    top += 1
                else:
                    tstack[top] = cl
                    top += 1
                    tstack[top] = cr
                    top += 1
            elif hl:
                tstack[top] = cl
                top += 1
            elif hr:
                tstack[top] = cr
                top += 1
    return best_inst, best_tri, best_t, best_u, best_v, visits


@njit(**_JIT)
def trace_any_impl(tlas_pack, inst_pack, blas_pack, skip,
                   ox, oy, oz, dx, dy, dz, t_min, t_max, mask,
                   tstack, bstack):
    """True iff any intersection exists in [t_min, t_max].

    Instances flagged in skip are treated as fully pass-through."""
    tnmin, tnmax, ta, tb, tleaf, torder = tlas_pack
    inv34 = inst_pack[0]
    blas_idx = inst_pack[3]
    masks = inst_pack[4]

    if torder.shape[0] == 0:
        return False

    idx = _inv_component(dx)
    idy = _inv_component(dy)
    idz = _inv_component(dz)

    top = 0
    tstack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        n = tstack[top]
        hit, _, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, t_max,
                              tnmin[n, 0], tnmin[n, 1], tnmin[n, 2],
                              tnmax[n, 0], tnmax[n, 1], tnmax[n, 2])
        if not hit:
            continue
        if tleaf[n]:
            for s in range(ta[n], tb[n]):
                i = torder[s]
                if masks[i] & mask == 0 or skip[i]:
                    continue
                iox, ioy, ioz, idxv, idyv, idzv = _to_object(
                    inv34, i, ox, oy, oz, dx, dy, dz)
                if _blas_any(blas_pack, blas_idx[i], iox, ioy, ioz,
                             idxv, idyv, idzv, t_min, t_max, bstack):
                    return True
        else:
            tstack[top] = ta[n]
            top += 1
            tstack[top] = tb[n]
            top += 1
    return False


@njit(**_JIT)
def collect_hits_impl(tlas_pack, inst_pack, blas_pack,
                      ox, oy, oz, dx, dy, dz, t_min, t_max, mask,
                      out_inst, out_tri, out_t, out_u, out_v,
                      tstack, bstack):
    """Collect every hit along the ray (unordered). Returns the count.

    Used by the programmable pipeline to run any-hit filters in Python."""
    tnmin, tnmax, ta, tb, tleaf, torder = tlas_pack
    inv34 = inst_pack[0]
    blas_idx = inst_pack[3]
    masks = inst_pack[4]
    node_off = blas_pack[0]
    tri_off = blas_pack[1]
    bnmin = blas_pack[2]
    bnmax = blas_pack[3]
    ba = blas_pack[4]
    bb = blas_pack[5]
    bleaf = blas_pack[6]
    tv0 = blas_pack[7]
    tv1 = blas_pack[8]
    tv2 = blas_pack[9]

    count = 0
    cap = out_t.shape[0]
    if torder.shape[0] == 0:
        return count

    idx = _inv_component(dx)
    idy = _inv_component(dy)
    idz = _inv_component(dz)

    top = 0
    tstack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        n = tstack[top]
        hit, _, _ = slab_test(ox, oy, oz, idx, idy, idz, t_min, t_max,
                              tnmin[n, 0], tnmin[n, 1], tnmin[n, 2],
                              tnmax[n, 0], tnmax[n, 1], tnmax[n, 2])
        if not hit:
            continue
        if tleaf[n]:
            for s in range(ta[n], tb[n]):
                i = torder[s]
                if masks[i] & mask == 0:
                    continue
                iox, ioy, ioz, idxv, idyv, idzv = _to_object(
                    inv34, i, ox, oy, oz, dx, dy, dz)
                b = blas_idx[i]
                base = node_off[b]
                tbase = tri_off[b]
                oidx = _inv_component(idxv)
                oidy = _inv_component(idyv)
                oidz = _inv_component(idzv)
                btop = 0
                bstack[btop] = 0
                btop += 1
                while btop > 0:
                    btop -= 1
                    bn = base + bstack[btop]
                    bh, _, _ = slab_test(iox, ioy, ioz, oidx, oidy, oidz,
                                         t_min, t_max,
                                         bnmin[bn, 0], bnmin[bn, 1], bnmin[bn, 2],
                                         bnmax[bn, 0], bnmax[bn, 1], bnmax[bn, 2])
                    if not bh:
                        continue
                    if bleaf[bn]:
                        for k in range(tbase + ba[bn], tbase + bb[bn]):
                            ok, t, u, v = moller_trumbore(
                                iox, ioy, ioz, idxv, idyv, idzv, t_min, t_max,
                                tv0[k, 0], tv0[k, 1], tv0[k, 2],
                                tv1[k, 0], tv1[k, 1], tv1[k, 2],
                                tv2[k, 0], tv2[k, 1], tv2[k, 2])
                            if ok and count < cap:
                                out_inst[count] = i
                                out_tri[count] = k
                                out_t[count] = t
                                out_u[count] = u
                                out_v[count] = v
                                count += 1
                    else:
                        bstack[btop] = ba[bn]
                        btop += 1
                        bstack[btop] = bb[bn]
                        btop += 1
        else:
            tstack[top] = ta[n]
            top += 1
            tstack[top] = tb[n]
            top += 1
    return count


@njit(**_JIT)
def hit_normal_impl(inst_pack, blas_pack, inst, tri, u, v):
    """World-space shading normal at a hit (inverse-transpose, renormalized).

    Interpolates vertex normals when the mesh carries them, else uses the
    geometric face normal."""
    nrm33 = inst_pack[2]
    blas_idx = inst_pack[3]
    tv0 = blas_pack[7]
    tv1 = blas_pack[8]
    tv2 = blas_pack[9]
    tn0 = blas_pack[10]
    tn1 = blas_pack[11]
    tn2 = blas_pack[12]
    has_norm = blas_pack[13]

    if has_norm[blas_idx[inst]]:
        w = 1.0 - u - v
        nx = w * tn0[tri, 0] + u * tn1[tri, 0] + v * tn2[tri, 0]
        ny = w * tn0[tri, 1] + u * tn1[tri, 1] + v * tn2[tri, 1]
        nz = w * tn0[tri, 2] + u * tn1[tri, 2] + v * tn2[tri, 2]
    else:
        e1x = tv1[tri, 0] - tv0[tri, 0]
        e1y = tv1[tri, 1] - tv0[tri, 1]
        e1z = tv1[tri, 2] - tv0[tri, 2]
        e2x = tv2[tri, 0] - tv0[tri, 0]
        e2y = tv2[tri, 1] - tv0[tri, 1]
        e2z = tv2[tri, 2] - tv0[tri, 2]
        nx = e1y * e2z - e1z * e2y
        ny = e1z * e2x - e1x * e2z
        nz = e1x * e2y - e1y * e2x
    wx = nrm33[inst, 0, 0] * nx + nrm33[inst, 0, 1] * ny + nrm33[inst, 0, 2] * nz
    wy = nrm33[inst, 1, 0] * nx + nrm33[inst, 1, 1] * ny + nrm33[inst, 1, 2] * nz
    wz = nrm33[inst, 2, 0] * nx + nrm33[inst, 2, 1] * ny + nrm33[inst, 2, 2] * nz
    inv = 1.0 / math.sqrt(wx * wx + wy * wy + wz * wz)
    return wx * inv, wy * inv, wz * inv


@njit(**_JIT)
def shade_whitted(tlas_pack, inst_pack, blas_pack, mat_pack, light_pack,
                  bgr, bgg, bgb, ox, oy, oz, dx, dy, dz,
                  prim_t_min, max_depth, sec_eps, shadow_mask,
                  tstack, bstack, stk_f, stk_depth):
    """Whitted shading of one primary ray with an explicit ray stack.

    Returns (r, g, b, primary_rough, primary_t); the aux values come from
    the depth-0 hit (0 on miss)."""
    albedo, roughness, reflectivity, transparency, ior, emission, shadow_skip = mat_pack
    lpos, lint, lrad = light_pack

    cr = 0.0
    cg = 0.0
    cb = 0.0
    prim_rough = 0.0
    prim_t = 0.0

    # stack rows: ox oy oz dx dy dz t_min wr wg wb
    top = 0
    stk_f[top, 0] = ox
    stk_f[top, 1] = oy
    stk_f[top, 2] = oz
    stk_f[top, 3] = dx
    stk_f[top, 4] = dy
    stk_f[top, 5] = dz
    stk_f[top, 6] = prim_t_min
    stk_f[top, 7] = 1.0
    stk_f[top, 8] = 1.0
    stk_f[top, 9] = 1.0
    stk_depth[top] = 0
    top += 1

    while top > 0:
        top -= 1
        rox = stk_f[top, 0]
        roy = stk_f[top, 1]
        roz = stk_f[top, 2]
        rdx = stk_f[top, 3]
        rdy = stk_f[top, 4]
        rdz = stk_f[top, 5]
        rtmin = stk_f[top, 6]
        wr = stk_f[top, 7]
        wg = stk_f[top, 8]
        wb = stk_f[top, 9]
        depth = stk_depth[top]

        if depth >= max_depth:
            cr += wr * bgr
            cg += wg * bgg
            cb += wb * bgb
            continue

        inst, tri, t, u, v, _ = trace_nearest_impl(
            tlas_pack, inst_pack, blas_pack,
            rox, roy, roz, rdx, rdy, rdz, rtmin, math.inf, 0xFF,
            tstack, bstack)
        if inst < 0:
            cr += wr * bgr
            cg += wg * bgg
            cb += wb * bgb
            continue

        px = rox + t * rdx
        py = roy + t * rdy
        pz = roz + t * rdz
        nx, ny, nz = hit_normal_impl(inst_pack, blas_pack, inst, tri, u, v)
        entering = rdx * nx + rdy * ny + rdz * nz < 0.0
        if not entering:
            nx = -nx
            ny = -ny
            nz = -nz

        if depth == 0:
            prim_rough = roughness[inst]
            prim_t = t

        refl = reflectivity[inst]
        trans = transparency[inst]
        w_d = 1.0 - refl - trans

        dr = 0.0
        dg = 0.0
        db = 0.0
        if w_d > 0.0:
            for li in range(lpos.shape[0]):
                lvx = lpos[li, 0] - px
                lvy = lpos[li, 1] - py
                lvz = lpos[li, 2] - pz
                dist = math.sqrt(lvx * lvx + lvy * lvy + lvz * lvz)
                if dist <= 0.0:
                    continue
                ldx = lvx / dist
                ldy = lvy / dist
                ldz = lvz / dist
                ndotl = nx * ldx + ny * ldy + nz * ldz
                if ndotl <= 0.0:
                    continue
                if dist - sec_eps <= sec_eps:
                    occ = False
                else:
                    occ = trace_any_impl(
                        tlas_pack, inst_pack, blas_pack, shadow_skip,
                        px, py, pz, ldx, ldy, ldz, sec_eps, dist - sec_eps,
                        shadow_mask, tstack, bstack)
                if occ:
                    continue
                rad = lrad[li]
                d2 = dist * dist
                r2 = rad * rad
                falloff = 1.0 / (d2 if d2 > r2 else r2)
                s = ndotl * falloff * INV_PI
                dr += albedo[inst, 0] * lint[li, 0] * s
                dg += albedo[inst, 1] * lint[li, 1] * s
                db += albedo[inst, 2] * lint[li, 2] * s

        cr += wr * (emission[inst, 0] + w_d * dr)
        cg += wg * (emission[inst, 1] + w_d * dg)
        cb += wb * (emission[inst, 2] + w_d * db)

        cos_i = -(rdx * nx + rdy * ny + rdz * nz)
        f = schlick_weight(cos_i, fresnel_f0(ior[inst]))

        w_t = trans * (1.0 - f)
        if w_t > 0.0 and top < stk_f.shape[0]:
            eta = 1.0 / ior[inst] if entering else ior[inst]
            if ior[inst] < 1.0:
                ok = False
                tdx = tdy = tdz = 0.0
            else:
                ok, tdx, tdy, tdz = refract_dir(rdx, rdy, rdz, nx, ny, nz, eta)
            if not ok:
                # total internal reflection folds into the reflection branch
                tdx, tdy, tdz = reflect_dir(rdx, rdy, rdz, nx, ny, nz)
            stk_f[top, 0] = px
            stk_f[top, 1] = py
            stk_f[top, 2] = pz
            stk_f[top, 3] = tdx
            stk_f[top, 4] = tdy
            stk_f[top, 5] = tdz
            stk_f[top, 6] = sec_eps
            stk_f[top, 7] = wr * w_t
            stk_f[top, 8] = wg * w_t
            stk_f[top, 9] = wb * w_t
            stk_depth[top] = depth + 1
            top += 1

        w_r = refl * f
        if w_r > 0.0 and top < stk_f.shape[0]:
            rrx, rry, rrz = reflect_dir(rdx, rdy, rdz, nx, ny, nz)
            stk_f[top, 0] = px
            stk_f[top, 1] = py
            stk_f[top, 2] = pz
            stk_f[top, 3] = rrx
            stk_f[top, 4] = rry
            stk_f[top, 5] = rrz
            stk_f[top, 6] = sec_eps
            stk_f[top, 7] = wr * w_r
            stk_f[top, 8] = wg * w_r
            stk_f[top, 9] = wb * w_r
            stk_depth[top] = depth + 1
            top += 1

    return cr, cg, cb, prim_rough, prim_t


@njit(nogil=True, **_JIT)
def trace_batch(tlas_pack, inst_pack, blas_pack, origins, dirs,
                t_min, t_max, mask,
                out_inst, out_tri, out_t, out_u, out_v):
    """Nearest-hit trace for an array of rays (one stack pair reused)."""
    tstack = np.empty(STACK_SIZE, np.int32)
    bstack = np.empty(STACK_SIZE, np.int32)
    for r in range(origins.shape[0]):
        inst, tri, t, u, v, _ = trace_nearest_impl(
            tlas_pack, inst_pack, blas_pack,
            origins[r, 0], origins[r, 1], origins[r, 2],
            dirs[r, 0], dirs[r, 1], dirs[r, 2],
            t_min, t_max, mask, tstack, bstack)
        out_inst[r] = inst
        out_tri[r] = tri
        out_t[r] = t
        out_u[r] = u
        out_v[r] = v


@njit(nogil=True, **_JIT)
def render_rows(y0, y1, width, height, spp, max_depth, seed,
                cam_o, cam_right, cam_up, cam_fwd, tan_half, aspect,
                tlas_pack, inst_pack, blas_pack, mat_pack, light_pack,
                background, sec_eps, shadow_mask,
                out_color, out_rough, out_depth):
    """Render rows [y0, y1) of the frame into the output planes."""
    tstack = np.empty(STACK_SIZE, np.int32)
    bstack = np.empty(STACK_SIZE, np.int32)
    stk_f = np.empty((SHADE_STACK, 10), np.float64)
    stk_depth = np.empty(SHADE_STACK, np.int32)

    bgr = background[0]
    bgg = background[1]
    bgb = background[2]

    for y in range(y0, y1):
        for x in range(width):
            csr = 0.0
            csg = 0.0
            csb = 0.0
            rsum = 0.0
            dsum = 0.0
            for s in range(spp):
                jx = pixel_rand(seed, x, y, s, 0)
                jy = pixel_rand(seed, x, y, s, 1)
                ndc_x = ((x + jx) / width) * 2.0 - 1.0
                ndc_y = 1.0 - ((y + jy) / height) * 2.0
                sx = ndc_x * tan_half * aspect
                sy = ndc_y * tan_half
                ddx = cam_fwd[0] + sx * cam_right[0] + sy * cam_up[0]
                ddy = cam_fwd[1] + sx * cam_right[1] + sy * cam_up[1]
                ddz = cam_fwd[2] + sx * cam_right[2] + sy * cam_up[2]
                inv = 1.0 / math.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
                ddx *= inv
                ddy *= inv
                ddz *= inv
                r, g, b, pr, pt = shade_whitted(
                    tlas_pack, inst_pack, blas_pack, mat_pack, light_pack,
                    bgr, bgg, bgb,
                    cam_o[0], cam_o[1], cam_o[2], ddx, ddy, ddz,
                    0.0, max_depth, sec_eps, shadow_mask,
                    tstack, bstack, stk_f, stk_depth)
                csr += r
                csg += g
                csb += b
                rsum += pr
                dsum += pt
            out_color[y, x, 0] = csr / spp
            out_color[y, x, 1] = csg / spp
            out_color[y, x, 2] = csb / spp
            out_rough[y, x] = rsum / spp
            out_depth[y, x] = dsum / spp
