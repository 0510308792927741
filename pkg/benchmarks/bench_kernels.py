"""Time each hot kernel on the numba and numpy backends.

    python benchmarks/bench_kernels.py [--repeat N] [--quick]

JIT compilation is excluded: every kernel is called once before timing.
"""
import argparse
import sys
import timeit

import numpy as np

from virtobj import geometry, kernels


def cases(quick: bool):
    rng = np.random.default_rng(0)
    scale = 0.5 if quick else 1.0

    sphere = geometry.icosphere(1.0, 3 if quick else 4)
    tris = np.ascontiguousarray(sphere.triangle_coords())
    res = int(24 * scale) if quick else 32
    origin, h, dims = geometry.grid_for(sphere, res)
    dims = tuple(int(d) for d in dims)
    yield "parity_inside", (tris, origin, h, dims, 1.2345678e-7 * h, 2.3456789e-7 * h)
    yield "surface_voxels", (tris, origin, h, dims)

    hx = geometry.voxelize(sphere, res)
    yield "nearest4", (np.ascontiguousarray(sphere.vertices), hx.nodes, 1e-9 * hx.voxel_edge ** 2)

    k = int(200 * scale)
    yield "damped_sine_bank", (rng.normal(size=k), rng.uniform(1, 30, k), rng.uniform(100, 15000, k),
                               44100.0, int(44100 * scale))

    small = geometry.icosphere(5.0, 4)
    tri = np.ascontiguousarray(small.triangle_coords()[small.triangle_coords()[:, :, 2].max(axis=1) > 3.0])
    tri = tri - np.array([0.0, 0.0, 5.0])
    u = (np.arange(160) + 0.5) * 0.1 - 8.0
    v = (np.arange(120) + 0.5) * 0.1 - 6.0
    yield "raster_heights", (tri, u, v, 1.0)

    n = int(64 * scale)
    dens = np.where(hx.occupancy, 500.0, 0.0)
    alb = np.full(dens.shape + (3,), 0.8)
    P = n * n
    o = np.tile([0.0, -3.0, 0.0], (P, 1))
    g = np.linspace(-0.3, 0.3, n)
    X, Z = np.meshgrid(g, g)
    d = np.stack([X.ravel(), np.ones(P), Z.ravel()], axis=1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    t_n = np.full(P, 1.8)
    t_f = np.full(P, 4.2)
    s = int(64 * scale)
    yield "march_rays", (o, d, t_n, t_f, np.full((P, s), 0.5), dens, alb, hx.origin, hx.voxel_edge,
                         np.array([2.0, -2.0, 2.0]), np.array([8.0, 8.0, 8.0]), s)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)

    nb = kernels.numba_backend
    if nb is None:
        print("numba backend disabled (VIRTOBJ_DISABLE_NUMBA is set); timing numpy only", file=sys.stderr)
    print(f"{'kernel':<18} {'numpy (s)':>11} {'numba (s)':>11} {'speedup':>9}")
    for name, kargs in cases(args.quick):
        f_np = getattr(kernels.numpy_backend, name)
        t_np = min(timeit.repeat(lambda: f_np(*kargs), number=1, repeat=args.repeat))
        if nb is not None:
            f_nb = getattr(nb, name)
            f_nb(*kargs)
            t_nb = min(timeit.repeat(lambda: f_nb(*kargs), number=1, repeat=args.repeat))
            print(f"{name:<18} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:<18} {t_np:11.4f} {'-':>11} {'-':>9}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
