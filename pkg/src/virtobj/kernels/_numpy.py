"""Vectorized numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_numba`` and the
two must agree to floating-point round-off. Keep the arithmetic order of the
two versions aligned when editing either one.
"""
import numpy as np

# Rows of voxel centers processed per chunk in the parity cast.
_ROW_CHUNK = 256
# Query points per chunk in the nearest-node search.
_QUERY_CHUNK = 64


def parity_inside(tris, origin, h, dims, eps_y, eps_z):
    """Even/odd test of voxel centers against a triangle soup.

    A ray leaves every voxel center along +x; the center is inside when the
    ray crosses the surface an odd number of times. The ray's (y, z) is nudged
    by ``(eps_y, eps_z)`` so that it never runs exactly through a mesh edge.

    Returns a boolean array of shape ``dims``.
    """
    nx, ny, nz = int(dims[0]), int(dims[1]), int(dims[2])
    inside = np.zeros((nx, ny, nz), dtype=np.bool_)
    if tris.shape[0] == 0:
        return inside
    xc = origin[0] + (np.arange(nx) + 0.5) * h
    jj, kk = np.meshgrid(np.arange(ny), np.arange(nz), indexing="ij")
    jj = jj.ravel()
    kk = kk.ravel()
    ry_all = origin[1] + (jj + 0.5) * h + eps_y
    rz_all = origin[2] + (kk + 0.5) * h + eps_z

    a = tris[:, 0, :]
    b = tris[:, 1, :]
    c = tris[:, 2, :]
    det = (b[:, 1] - a[:, 1]) * (c[:, 2] - a[:, 2]) - (c[:, 1] - a[:, 1]) * (b[:, 2] - a[:, 2])
    keep = det != 0.0
    a, b, c, det = a[keep], b[keep], c[keep], det[keep]

    for start in range(0, ry_all.shape[0], _ROW_CHUNK):
        ry = ry_all[start:start + _ROW_CHUNK, None]
        rz = rz_all[start:start + _ROW_CHUNK, None]
        # barycentric coordinates of (ry, rz) in the yz projection
        w1 = ((ry - a[:, 1]) * (c[:, 2] - a[:, 2]) - (c[:, 1] - a[:, 1]) * (rz - a[:, 2])) / det
        w2 = ((b[:, 1] - a[:, 1]) * (rz - a[:, 2]) - (ry - a[:, 1]) * (b[:, 2] - a[:, 2])) / det
        w0 = 1.0 - w1 - w2
        hit = (w0 > 0.0) & (w1 > 0.0) & (w2 > 0.0)
        xs = w0 * a[:, 0] + w1 * b[:, 0] + w2 * c[:, 0]
        xs = np.where(hit, xs, -np.inf)
        # crossings strictly ahead of each center
        counts = (xs[:, None, :] > xc[None, :, None]).sum(axis=2)
        odd = (counts % 2) == 1
        rows = slice(start, start + odd.shape[0])
        inside[:, jj[rows], kk[rows]] = odd.T
    return inside


def _sat_overlap(v0, v1, v2, center, half):
    """Triangle/box separating-axis test, vectorized over leading axis."""
    v0 = v0 - center
    v1 = v1 - center
    v2 = v2 - center
    ok = np.ones(v0.shape[0], dtype=np.bool_)
    # box face normals
    for ax in range(3):
        lo = np.minimum(np.minimum(v0[:, ax], v1[:, ax]), v2[:, ax])
        hi = np.maximum(np.maximum(v0[:, ax], v1[:, ax]), v2[:, ax])
        ok &= (lo <= half) & (hi >= -half)
    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    # triangle normal
    n = np.cross(e0, e1)
    d = np.einsum("ij,ij->i", n, v0)
    r = half * (np.abs(n[:, 0]) + np.abs(n[:, 1]) + np.abs(n[:, 2]))
    ok &= np.abs(d) <= r
    # nine edge cross products
    for e in (e0, e1, e2):
        for ax in range(3):
            axis = np.zeros_like(e)
            # axis = unit_ax x e
            if ax == 0:
                axis[:, 1] = -e[:, 2]
                axis[:, 2] = e[:, 1]
            elif ax == 1:
                axis[:, 0] = e[:, 2]
                axis[:, 2] = -e[:, 0]
            else:
                axis[:, 0] = -e[:, 1]
                axis[:, 1] = e[:, 0]
            p0 = np.einsum("ij,ij->i", axis, v0)
            p1 = np.einsum("ij,ij->i", axis, v1)
            p2 = np.einsum("ij,ij->i", axis, v2)
            r = half * (np.abs(axis[:, 0]) + np.abs(axis[:, 1]) + np.abs(axis[:, 2]))
            lo = np.minimum(np.minimum(p0, p1), p2)
            hi = np.maximum(np.maximum(p0, p1), p2)
            ok &= (lo <= r) & (hi >= -r)
    return ok


def surface_voxels(tris, origin, h, dims):
    """Mark every voxel whose closed cube touches at least one triangle."""
    nx, ny, nz = int(dims[0]), int(dims[1]), int(dims[2])
    occ = np.zeros((nx, ny, nz), dtype=np.bool_)
    dmax = np.array([nx - 1, ny - 1, nz - 1])
    half = 0.5 * h
    for t in range(tris.shape[0]):
        tri = tris[t]
        lo = np.floor((tri.min(axis=0) - origin) / h).astype(np.int64)
        hi = np.floor((tri.max(axis=0) - origin) / h).astype(np.int64)
        lo = np.clip(lo, 0, dmax)
        hi = np.clip(hi, 0, dmax)
        ii, jj, kk = np.meshgrid(
            np.arange(lo[0], hi[0] + 1),
            np.arange(lo[1], hi[1] + 1),
            np.arange(lo[2], hi[2] + 1),
            indexing="ij",
        )
        ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
        centers = np.empty((ii.shape[0], 3))
        centers[:, 0] = origin[0] + (ii + 0.5) * h
        centers[:, 1] = origin[1] + (jj + 0.5) * h
        centers[:, 2] = origin[2] + (kk + 0.5) * h
        n = centers.shape[0]
        hit = _sat_overlap(
            np.broadcast_to(tri[0], (n, 3)),
            np.broadcast_to(tri[1], (n, 3)),
            np.broadcast_to(tri[2], (n, 3)),
            centers,
            half,
        )
        occ[ii[hit], jj[hit], kk[hit]] = True
    return occ


def nearest4(points, nodes, quantum):
    """Indices of the 4 nearest nodes for every query point.

    Squared distances are snapped to integer multiples of ``quantum`` and
    ranked by ``(snapped distance, node index)`` so near-equal distances fall
    back to ascending node order.
    """
    n_pts = points.shape[0]
    out = np.empty((n_pts, 4), dtype=np.int64)
    idx = np.arange(nodes.shape[0], dtype=np.int64)
    for start in range(0, n_pts, _QUERY_CHUNK):
        p = points[start:start + _QUERY_CHUNK]
        dx = p[:, None, 0] - nodes[None, :, 0]
        dy = p[:, None, 1] - nodes[None, :, 1]
        dz = p[:, None, 2] - nodes[None, :, 2]
        d2 = dx * dx + dy * dy + dz * dz
        key = np.rint(d2 / quantum)
        for r in range(p.shape[0]):
            kth = np.partition(key[r], 3)[3]
            cand = np.nonzero(key[r] <= kth)[0]
            order = np.lexsort((idx[cand], key[r, cand]))
            out[start + r] = cand[order[:4]]
    return out


def damped_sine_bank(amp, decay, freq, sample_rate, n_samples):
    """Sum of ``amp * exp(-decay t) * sin(2 pi freq t)`` sampled at ``t = n/sr``.

    Modes are accumulated in index order for every sample.
    """
    t = np.arange(n_samples, dtype=np.float64) / sample_rate
    out = np.zeros(n_samples, dtype=np.float64)
    two_pi = 2.0 * np.pi
    for i in range(amp.shape[0]):
        out += amp[i] * np.exp(-decay[i] * t) * np.sin(two_pi * freq[i] * t)
    return out


def raster_heights(tri_uvw, u_centers, v_centers, w_max):
    """Highest surface point under each sensor pixel, ignoring hits above ``w_max``.

    ``tri_uvw`` holds triangles in sensor coordinates (u, v in-plane, w along
    the outward normal). Returns an ``(len(v_centers), len(u_centers))`` array
    with ``-inf`` where no triangle covers the pixel.
    """
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
        a, b, c = tri_uvw[t, 0], tri_uvw[t, 1], tri_uvw[t, 2]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        if det == 0.0:
            continue
        umin = min(a[0], b[0], c[0])
        umax = max(a[0], b[0], c[0])
        vmin = min(a[1], b[1], c[1])
        vmax = max(a[1], b[1], c[1])
        i0 = max(int(np.ceil((umin - u0) / du)), 0)
        i1 = min(int(np.floor((umax - u0) / du)), nu - 1)
        j0 = max(int(np.ceil((vmin - v0) / dv)), 0)
        j1 = min(int(np.floor((vmax - v0) / dv)), nv - 1)
        if i0 > i1 or j0 > j1:
            continue
        pu = u_centers[i0:i1 + 1][None, :]
        pv = v_centers[j0:j1 + 1][:, None]
        w1 = ((pu - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (pv - a[1])) / det
        w2 = ((b[0] - a[0]) * (pv - a[1]) - (pu - a[0]) * (b[1] - a[1])) / det
        w0 = 1.0 - w1 - w2
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        w = w0 * a[2] + w1 * b[2] + w2 * c[2]
        valid = inside & (w <= w_max)
        block = best[j0:j1 + 1, i0:i1 + 1]
        np.maximum(block, np.where(valid, w, -np.inf), out=block)
    return best


def _lookup(points, grid, aabb_min, cell):
    """Nearest-cell lookup; points outside the grid read as zero."""
    dims = np.array(grid.shape[:3])
    f = np.floor((points - aabb_min) / cell).astype(np.int64)
    valid = np.all((f >= 0) & (f < dims), axis=-1)
    f = np.clip(f, 0, dims - 1)
    vals = grid[f[..., 0], f[..., 1], f[..., 2]]
    if grid.ndim == 3:
        return np.where(valid, vals, 0.0)
    return np.where(valid[..., None], vals, 0.0)


def _segment_to_box(p, d, aabb_min, aabb_max):
    """Exit parameter of rays ``p + t d`` (p inside) from the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (aabb_min - p) * inv
        t2 = (aabb_max - p) * inv
    tmax = np.where(np.isnan(t1), np.inf, np.maximum(t1, t2))
    tmax = np.where(d == 0.0, np.inf, tmax)
    return tmax.min(axis=-1)


def march_rays(origins, dirs, t_near, t_far, offsets, density, albedo, aabb_min, cell,
               light_pos, light_rgb, n_shadow):
    """Emission/absorption quadrature with one point light and shadow rays.

    ``offsets`` is ``(P, n)`` with the in-bin sample position in [0, 1) for
    every bin (0.5 everywhere gives midpoint sampling). Returns the
    accumulated RGB (P, 3) and residual transmittance (P,).
    """
    n_rays, n = offsets.shape
    aabb_max = aabb_min + cell * np.array(density.shape, dtype=np.float64)
    span = np.maximum(t_far - t_near, 0.0)
    delta = span / n
    rgb = np.zeros((n_rays, 3))
    trans = np.ones(n_rays)
    for j in range(n):
        tj = t_near + (j + offsets[:, j]) * delta
        x = origins + tj[:, None] * dirs
        sig = _lookup(x, density, aabb_min, cell)
        alpha = 1.0 - np.exp(-sig * delta)
        act = (sig > 0.0) & (delta > 0.0)
        if np.any(act):
            xa = x[act]
            to_l = light_pos - xa
            dist = np.sqrt(np.einsum("ij,ij->i", to_l, to_l))
            ldir = to_l / dist[:, None]
            seg = np.minimum(_segment_to_box(xa, ldir, aabb_min, aabb_max), dist)
            ds = seg / n_shadow
            optical = np.zeros(xa.shape[0])
            for k in range(n_shadow):
                xs = xa + ((k + 0.5) * ds)[:, None] * ldir
                optical += _lookup(xs, density, aabb_min, cell) * ds
            t_sh = np.exp(-optical)
            alb = _lookup(xa, albedo, aabb_min, cell)
            ls = (light_rgb[None, :] / (dist * dist)[:, None]) * t_sh[:, None] * alb / np.pi
            w = trans[act] * alpha[act]
            rgb[act] += w[:, None] * ls
        trans = trans * np.exp(-sig * delta)
    return rgb, trans
