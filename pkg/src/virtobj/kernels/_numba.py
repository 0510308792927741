"""numba-compiled hot kernels; see ``_numpy`` for the reference semantics."""
import math

import numpy as np
from numba import config, njit, prange

# the TBB shipped with some distros is too old for numba; try OpenMP first
config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


@njit(parallel=True, cache=True)
def parity_inside(tris, origin, h, dims, eps_y, eps_z):
    nx, ny, nz = dims[0], dims[1], dims[2]
    inside = np.zeros((nx, ny, nz), dtype=np.bool_)
    n_tri = tris.shape[0]
    for row in prange(ny * nz):
        j = row // nz
        k = row - j * nz
        ry = origin[1] + (j + 0.5) * h + eps_y
        rz = origin[2] + (k + 0.5) * h + eps_z
        xs = np.empty(n_tri)
        m = 0
        for t in range(n_tri):
            ay, az = tris[t, 0, 1], tris[t, 0, 2]
            by, bz = tris[t, 1, 1], tris[t, 1, 2]
            cy, cz = tris[t, 2, 1], tris[t, 2, 2]
            det = (by - ay) * (cz - az) - (cy - ay) * (bz - az)
            if det == 0.0:
                continue
            w1 = ((ry - ay) * (cz - az) - (cy - ay) * (rz - az)) / det
            w2 = ((by - ay) * (rz - az) - (ry - ay) * (bz - az)) / det
            w0 = 1.0 - w1 - w2
            if w0 > 0.0 and w1 > 0.0 and w2 > 0.0:
                xs[m] = w0 * tris[t, 0, 0] + w1 * tris[t, 1, 0] + w2 * tris[t, 2, 0]
                m += 1
        for i in range(nx):
            xc = origin[0] + (i + 0.5) * h
            cnt = 0
            for q in range(m):
                if xs[q] > xc:
                    cnt += 1
            inside[i, j, k] = (cnt % 2) == 1
    return inside


@njit(cache=True)
def _sat_axis(ax0, ax1, ax2, v0, v1, v2, half):
    p0 = ax0 * v0[0] + ax1 * v0[1] + ax2 * v0[2]
    p1 = ax0 * v1[0] + ax1 * v1[1] + ax2 * v1[2]
    p2 = ax0 * v2[0] + ax1 * v2[1] + ax2 * v2[2]
    r = half * (abs(ax0) + abs(ax1) + abs(ax2))
    lo = min(min(p0, p1), p2)
    hi = max(max(p0, p1), p2)
    return lo <= r and hi >= -r


@njit(cache=True)
def _tri_box(tri, center, half):
    v0 = tri[0] - center
    v1 = tri[1] - center
    v2 = tri[2] - center
    for ax in range(3):
        lo = min(min(v0[ax], v1[ax]), v2[ax])
        hi = max(max(v0[ax], v1[ax]), v2[ax])
        if lo > half or hi < -half:
            return False
    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    n0 = e0[1] * e1[2] - e0[2] * e1[1]
    n1 = e0[2] * e1[0] - e0[0] * e1[2]
    n2 = e0[0] * e1[1] - e0[1] * e1[0]
    d = n0 * v0[0] + n1 * v0[1] + n2 * v0[2]
    if abs(d) > half * (abs(n0) + abs(n1) + abs(n2)):
        return False
    for q in range(3):
        if q == 0:
            e = e0
        elif q == 1:
            e = e1
        else:
            e = e2
        if not _sat_axis(0.0, -e[2], e[1], v0, v1, v2, half):
            return False
        if not _sat_axis(e[2], 0.0, -e[0], v0, v1, v2, half):
            return False
        if not _sat_axis(-e[1], e[0], 0.0, v0, v1, v2, half):
            return False
    return True


@njit(cache=True)
def surface_voxels(tris, origin, h, dims):
    nx, ny, nz = dims[0], dims[1], dims[2]
    occ = np.zeros((nx, ny, nz), dtype=np.bool_)
    half = 0.5 * h
    center = np.empty(3)
    lo = np.empty(3, dtype=np.int64)
    hi = np.empty(3, dtype=np.int64)
    for t in range(tris.shape[0]):
        tri = tris[t]
        for ax in range(3):
            mn = min(min(tri[0, ax], tri[1, ax]), tri[2, ax])
            mx = max(max(tri[0, ax], tri[1, ax]), tri[2, ax])
            a = np.int64(math.floor((mn - origin[ax]) / h))
            b = np.int64(math.floor((mx - origin[ax]) / h))
            lo[ax] = min(max(a, 0), dims[ax] - 1)
            hi[ax] = min(max(b, 0), dims[ax] - 1)
        for i in range(lo[0], hi[0] + 1):
            center[0] = origin[0] + (i + 0.5) * h
            for j in range(lo[1], hi[1] + 1):
                center[1] = origin[1] + (j + 0.5) * h
                for k in range(lo[2], hi[2] + 1):
                    if occ[i, j, k]:
                        continue
                    center[2] = origin[2] + (k + 0.5) * h
                    if _tri_box(tri, center, half):
                        occ[i, j, k] = True
    return occ


@njit(parallel=True, cache=True)
def nearest4(points, nodes, quantum):
    n_pts = points.shape[0]
    n_nodes = nodes.shape[0]
    out = np.empty((n_pts, 4), dtype=np.int64)
    for p in prange(n_pts):
        bk = np.full(4, np.inf)
        bi = np.full(4, np.int64(-1))
        px, py, pz = points[p, 0], points[p, 1], points[p, 2]
        for q in range(n_nodes):
            dx = px - nodes[q, 0]
            dy = py - nodes[q, 1]
            dz = pz - nodes[q, 2]
            key = np.rint((dx * dx + dy * dy + dz * dz) / quantum)
            # nodes arrive in ascending index, so equal keys never displace
            if key < bk[3]:
                s = 3
                while s > 0 and key < bk[s - 1]:
                    bk[s] = bk[s - 1]
                    bi[s] = bi[s - 1]
                    s -= 1
                bk[s] = key
                bi[s] = q
        for s in range(4):
            out[p, s] = bi[s]
    return out


@njit(parallel=True, cache=True)
def damped_sine_bank(amp, decay, freq, sample_rate, n_samples):
    # exact values at each block start, then a decay-and-rotate recurrence
    out = np.zeros(n_samples)
    n_modes = amp.shape[0]
    if n_samples == 0 or n_modes == 0:
        return out
    block = 64
    n_blocks = (n_samples + block - 1) // block
    two_pi = 2.0 * np.pi
    dt = 1.0 / sample_rate
    step_e = np.empty(n_modes)
    step_s = np.empty(n_modes)
    step_c = np.empty(n_modes)
    for i in range(n_modes):
        step_e[i] = math.exp(-decay[i] * dt)
        step_s[i] = math.sin(two_pi * freq[i] * dt)
        step_c[i] = math.cos(two_pi * freq[i] * dt)
    for b in prange(n_blocks):
        s0 = b * block
        s1 = min(s0 + block, n_samples)
        t0 = s0 / sample_rate
        for i in range(n_modes):
            e = amp[i] * math.exp(-decay[i] * t0)
            ph = two_pi * freq[i] * t0
            sn = math.sin(ph)
            cs = math.cos(ph)
            de, ds, dc = step_e[i], step_s[i], step_c[i]
            for k in range(s0, s1):
                out[k] += e * sn
                e *= de
                sn, cs = sn * dc + cs * ds, cs * dc - sn * ds
    return out


@njit(cache=True)
def raster_heights(tri_uvw, u_centers, v_centers, w_max):
    nv = v_centers.shape[0]
    nu = u_centers.shape[0]
    best = np.full((nv, nu), -np.inf)
    if nu == 0 or nv == 0:
        return best
    u0 = u_centers[0]
    v0 = v_centers[0]
    du = u_centers[1] - u0 if nu > 1 else 1.0
    dv = v_centers[1] - v0 if nv > 1 else 1.0
    for t in range(tri_uvw.shape[0]):
        a0, a1, a2 = tri_uvw[t, 0, 0], tri_uvw[t, 0, 1], tri_uvw[t, 0, 2]
        b0, b1, b2 = tri_uvw[t, 1, 0], tri_uvw[t, 1, 1], tri_uvw[t, 1, 2]
        c0, c1, c2 = tri_uvw[t, 2, 0], tri_uvw[t, 2, 1], tri_uvw[t, 2, 2]
        det = (b0 - a0) * (c1 - a1) - (c0 - a0) * (b1 - a1)
        if det == 0.0:
            continue
        umin = min(a0, b0, c0)
        umax = max(a0, b0, c0)
        vmin = min(a1, b1, c1)
        vmax = max(a1, b1, c1)
        i0 = max(int(math.ceil((umin - u0) / du)), 0)
        i1 = min(int(math.floor((umax - u0) / du)), nu - 1)
        j0 = max(int(math.ceil((vmin - v0) / dv)), 0)
        j1 = min(int(math.floor((vmax - v0) / dv)), nv - 1)
        for j in range(j0, j1 + 1):
            pv = v_centers[j]
            for i in range(i0, i1 + 1):
                pu = u_centers[i]
                w1 = ((pu - a0) * (c1 - a1) - (c0 - a0) * (pv - a1)) / det
                w2 = ((b0 - a0) * (pv - a1) - (pu - a0) * (b1 - a1)) / det
                w0 = 1.0 - w1 - w2
                if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                    w = w0 * a2 + w1 * b2 + w2 * c2
                    if w <= w_max and w > best[j, i]:
                        best[j, i] = w
    return best


@njit(cache=True)
def _cell(x0, x1, x2, aabb_min, cell, nx, ny, nz):
    i = int(math.floor((x0 - aabb_min[0]) / cell))
    j = int(math.floor((x1 - aabb_min[1]) / cell))
    k = int(math.floor((x2 - aabb_min[2]) / cell))
    if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
        return -1, 0, 0
    return i, j, k


@njit(cache=True)
def _exit_param(p, d, lo, hi):
    tmax = np.inf
    for ax in range(3):
        if d[ax] != 0.0:
            inv = 1.0 / d[ax]
            t1 = (lo[ax] - p[ax]) * inv
            t2 = (hi[ax] - p[ax]) * inv
            tmax = min(tmax, max(t1, t2))
    return tmax


@njit(parallel=True, cache=True)
def march_rays(origins, dirs, t_near, t_far, offsets, density, albedo, aabb_min, cell,
               light_pos, light_rgb, n_shadow):
    n_rays, n = offsets.shape
    nx, ny, nz = density.shape
    aabb_max = np.empty(3)
    aabb_max[0] = aabb_min[0] + cell * nx
    aabb_max[1] = aabb_min[1] + cell * ny
    aabb_max[2] = aabb_min[2] + cell * nz
    rgb = np.zeros((n_rays, 3))
    trans_out = np.ones(n_rays)
    for r in prange(n_rays):
        span = max(t_far[r] - t_near[r], 0.0)
        delta = span / n
        trans = 1.0
        x = np.empty(3)
        ldir = np.empty(3)
        for j in range(n):
            tj = t_near[r] + (j + offsets[r, j]) * delta
            for ax in range(3):
                x[ax] = origins[r, ax] + tj * dirs[r, ax]
            i0, i1, i2 = _cell(x[0], x[1], x[2], aabb_min, cell, nx, ny, nz)
            sig = 0.0 if i0 < 0 else density[i0, i1, i2]
            if sig > 0.0 and delta > 0.0:
                alpha = 1.0 - math.exp(-sig * delta)
                d0 = light_pos[0] - x[0]
                d1 = light_pos[1] - x[1]
                d2 = light_pos[2] - x[2]
                dist = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                ldir[0] = d0 / dist
                ldir[1] = d1 / dist
                ldir[2] = d2 / dist
                seg = min(_exit_param(x, ldir, aabb_min, aabb_max), dist)
                ds = seg / n_shadow
                optical = 0.0
                for k in range(n_shadow):
                    s = (k + 0.5) * ds
                    q0, q1, q2 = _cell(x[0] + s * ldir[0], x[1] + s * ldir[1],
                                       x[2] + s * ldir[2], aabb_min, cell, nx, ny, nz)
                    if q0 >= 0:
                        optical += density[q0, q1, q2] * ds
                t_sh = math.exp(-optical)
                w = trans * alpha
                for ch in range(3):
                    ls = (light_rgb[ch] / (dist * dist)) * t_sh * albedo[i0, i1, i2, ch] / np.pi
                    rgb[r, ch] += w * ls
            trans = trans * math.exp(-sig * delta)
        trans_out[r] = trans
    return rgb, trans_out
