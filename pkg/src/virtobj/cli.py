"""Command-line interface: build object files and query them.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import dsp, geometry, materials, modal, objectfile, render, touch
from .eigensolver import EigenError, solve_lowest
from .fem import assemble
from .objectfile import BuildInfo, FieldParams, ObjectFileContainer

log = logging.getLogger("virtobj")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class StageError(Exception):
    """An error raised by one pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, exc: Exception):
        self.stage = stage
        self.exc = exc
        super().__init__(f"{stage}: {exc}")

    @property
    def exit_code(self) -> int:
        return EXIT_NUMERIC if isinstance(self.exc, (EigenError, FloatingPointError)) else EXIT_INPUT


@dataclass(frozen=True)
class BuildSpec:
    mesh_path: str
    material: str
    resolution: int = 32
    n_modes: int = 200
    freq_cap: float = 20000.0
    overrides_path: str | None = None
    output_path: str | None = None
    name: str | None = None

    def check(self) -> None:
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if not self.freq_cap >= 0:
            raise ValueError("freq_cap must be >= 0")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, OSError, IndexError, EigenError) as exc:
        raise StageError(name, exc) from exc


def build_object_file(spec: BuildSpec) -> tuple[ObjectFileContainer, int | None]:
    """Run the whole pipeline; returns the container and bytes written (if saved)."""
    _stage("arguments", spec.check)
    overrides = _stage("material", materials.load_overrides, spec.overrides_path) if spec.overrides_path else None
    material = _stage("material", materials.lookup, spec.material, overrides)
    mesh = _stage("load_mesh", geometry.load_mesh, spec.mesh_path)
    with open(spec.mesh_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).digest()
    hex_mesh = _stage("voxelize", geometry.voxelize, mesh, spec.resolution)
    system = _stage("assemble", assemble, hex_mesh, material)
    n_rigid = 6 * system.n_components
    eig = _stage(
        "eigensolve", solve_lowest, system, spec.n_modes + n_rigid, spec.freq_cap,
        (material.rayleigh_alpha, material.rayleigh_beta),
    )
    smap = _stage("surface_map", geometry.map_surface_to_hex, mesh, hex_mesh)
    band = (modal.AUDIBLE_BAND[0], min(modal.AUDIBLE_BAND[1], spec.freq_cap))
    model = _stage("modes", modal.build_modal_model, eig, material, smap, band, max_modes=spec.n_modes)
    name = spec.name or os.path.splitext(os.path.basename(spec.mesh_path))[0]
    container = ObjectFileContainer(
        name=name,
        material=material,
        hex_mesh=hex_mesh,
        surface=mesh,
        modal=model,
        build=BuildInfo(spec.resolution, spec.n_modes, float(spec.freq_cap), digest),
        field_params=FieldParams(use_vertex_colors=mesh.colors is not None),
    )
    written = None
    if spec.output_path:
        written = _stage("save", objectfile.save, container, spec.output_path)
    return container, written


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _vec3(s):
    try:
        vals = [float(x) for x in s.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {s!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {s!r}")
    return tuple(vals)


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--deterministic", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="midpoint sampling and fixed reductions for bit-stable output")
    parser.add_argument("--threads", type=_positive_int, default=default, help="worker threads")
    parser.add_argument("--override", default=default, metavar="FILE",
                        help="material override file (material.field = value)")
    parser.add_argument("-v", "--verbose", action="count",
                        default=argparse.SUPPRESS if suppress else 0)


def _query_vertex(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--vertex", type=int, help="surface vertex index")
    g.add_argument("--xyz", type=_vec3, help="use the surface vertex nearest to 'x y z' (meters)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="virtobj", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("build", help="build an object file from a mesh and a material")
    _global_flags(p, suppress=True)
    p.add_argument("mesh", help="OBJ surface mesh (meters)")
    p.add_argument("--material", required=True)
    p.add_argument("--resolution", type=_positive_int, default=32)
    p.add_argument("--n-modes", type=_positive_int, default=200)
    p.add_argument("--freq-cap", type=float, default=20000.0)
    p.add_argument("--name")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("info", help="summarize an object file")
    _global_flags(p, suppress=True)
    p.add_argument("objfile")

    p = sub.add_parser("modes", help="table of eigenvalue, decay and frequency per mode")
    _global_flags(p, suppress=True)
    p.add_argument("objfile")

    p = sub.add_parser("impact", help="synthesize an impact sound to WAV")
    _global_flags(p, suppress=True)
    p.add_argument("objfile")
    _query_vertex(p)
    p.add_argument("--force", type=_vec3, default=(0.0, 0.0, -1.0), help="impulse 'fx fy fz' in N*s")
    p.add_argument("--sample-rate", type=_positive_int, default=modal.DEFAULT_SAMPLE_RATE)
    p.add_argument("--duration", type=float, default=modal.DEFAULT_DURATION)
    p.add_argument("--raw", action="store_true",
                   help="keep physical amplitude instead of scaling the peak to 0.9")
    p.add_argument("--spectrogram", metavar="PNG", help="also write a log-magnitude spectrogram image")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("touch", help="render a tactile image at a vertex to PNG")
    _global_flags(p, suppress=True)
    p.add_argument("objfile")
    _query_vertex(p)
    p.add_argument("--press-depth", type=float, help="press depth in mm")
    p.add_argument("--heightmap", metavar="FILE", help="also dump the raw heightmap raster")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("render", help="volume-render a camera view to PNG")
    _global_flags(p, suppress=True)
    p.add_argument("objfile")
    p.add_argument("--scene", metavar="FILE", help="key = value camera/light file")
    p.add_argument("--camera", type=_vec3)
    p.add_argument("--look-at", type=_vec3)
    p.add_argument("--up", type=_vec3)
    p.add_argument("--fov", type=float, help="vertical field of view, degrees")
    p.add_argument("--width", type=_positive_int)
    p.add_argument("--height", type=_positive_int)
    p.add_argument("--light", type=_vec3)
    p.add_argument("--light-rgb", type=_vec3)
    p.add_argument("--background", type=_vec3)
    p.add_argument("--samples", type=_positive_int, default=render.DEFAULT_SAMPLES)
    p.add_argument("--shadow-samples", type=_positive_int, default=64)
    p.add_argument("--seed", type=int, help="seed for jittered sampling")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("voxelize", help="voxelize a mesh and print (optionally dump) the grid")
    _global_flags(p, suppress=True)
    p.add_argument("mesh")
    p.add_argument("--resolution", type=_positive_int, default=32)
    p.add_argument("-o", "--output", help="write nodes, elements and occupancy to .npz")
    return parser


# -- subcommands ----------------------------------------------------------------

def _load(path):
    return _stage("load", objectfile.load, path)


def _pick_vertex(args, container):
    n = container.surface.n_vertices
    if args.xyz is not None:
        return modal.nearest_vertex(container.surface.vertices, args.xyz)
    v = 0 if args.vertex is None else args.vertex
    if not 0 <= v < n:
        raise StageError("arguments", IndexError(f"vertex {v} out of range (0..{n - 1})"))
    return v


def cmd_build(args):
    spec = BuildSpec(args.mesh, args.material, args.resolution, args.n_modes, args.freq_cap,
                     args.override, args.output, args.name)
    c, written = build_object_file(spec)
    md = c.modal
    print(f"object        {c.name} ({c.material.name})")
    print(f"voxels        {c.hex_mesh.n_elements} at edge {c.hex_mesh.voxel_edge:.6g} m")
    print(f"dof           {3 * c.hex_mesh.n_nodes}")
    print(f"modes kept    {md.n_modes}")
    if md.n_modes:
        print(f"frequencies   {md.frequency.min():.2f} - {md.frequency.max():.2f} Hz")
    print(f"file          {args.output} ({written} bytes)")
    return EXIT_OK


def cmd_info(args):
    c = _load(args.objfile)
    rep = objectfile.storage_report(c, container_bytes=os.path.getsize(args.objfile))
    m = c.material
    print(f"name          {c.name}")
    print(f"format        OBJF v{objectfile.VERSION}")
    print(f"material      {m.name}: rho={m.density:g} E={m.youngs_modulus:g} nu={m.poisson_ratio:g} "
          f"alpha={m.rayleigh_alpha:g} beta={m.rayleigh_beta:g}")
    print(f"surface       {c.surface.n_vertices} vertices, {c.surface.n_triangles} triangles")
    print(f"hex mesh      {c.hex_mesh.n_elements} voxels, {c.hex_mesh.n_nodes} nodes, grid {c.hex_mesh.dims}")
    print(f"build         resolution {c.build.resolution}, n_modes {c.build.n_modes}, cap {c.build.freq_cap:g} Hz")
    print(f"modes         {c.modal.n_modes}")
    if c.modal.n_modes:
        print(f"frequencies   {c.modal.frequency.min():.2f} - {c.modal.frequency.max():.2f} Hz")
    print(f"storage       container {rep['container_bytes']} B")
    print(f"              audio dump {rep['audio_dump_bytes']} B ({rep['audio_ratio']:.1f}x larger)")
    print(f"              touch dump {rep['touch_dump_bytes']} B")
    return EXIT_OK


def cmd_modes(args):
    c = _load(args.objfile)
    md = c.modal
    print(f"{'mode':>5} {'lambda (1/s^2)':>16} {'c (1/s)':>12} {'omega (Hz)':>12}")
    for i in range(md.n_modes):
        print(f"{i:5d} {md.eigenvalues[i]:16.6e} {md.decay[i]:12.6g} {md.frequency[i]:12.4f}")
    return EXIT_OK


def cmd_impact(args):
    if not args.duration > 0:
        raise StageError("arguments", ValueError("duration must be > 0"))
    c = _load(args.objfile)
    v = _pick_vertex(args, c)
    sig = _stage("synthesize", modal.synthesize_impact, c.modal, v, args.force,
                 args.sample_rate, args.duration, False)
    _stage("write_wav", dsp.write_wav, sig, args.output, not args.raw)
    if args.spectrogram:
        spec = dsp.stft(sig)
        _stage("write_png", render.write_png, np.repeat(dsp.magnitude_image(spec)[..., None], 3, axis=2),
               args.spectrogram)
    print(f"vertex {v}: {sig.samples.shape[0]} samples at {sig.sample_rate} Hz -> {args.output}")
    return EXIT_OK


def cmd_touch(args):
    if args.press_depth is not None and not args.press_depth > 0:
        raise StageError("arguments", ValueError("press depth must be > 0"))
    c = _load(args.objfile)
    v = _pick_vertex(args, c)
    cfg = c.tactile
    if args.press_depth is not None:
        cfg = touch.TactileConfig(cfg.width, cfg.height, cfg.field_width, cfg.field_height,
                                  args.press_depth, cfg.lights, cfg.background)
    img = _stage("touch", touch.touch, c.surface, v, cfg)
    _stage("write_png", render.write_png, img.pixels, args.output)
    if args.heightmap:
        _stage("write_heightmap", touch.write_heightmap, img.heightmap, args.heightmap)
    print(f"vertex {v}: {int(img.contact_mask.sum())} contact pixels -> {args.output}")
    return EXIT_OK


_SCENE_KEYS = {
    "camera": _vec3, "look_at": _vec3, "up": _vec3, "fov": float, "width": int,
    "height": int, "light": _vec3, "light_rgb": _vec3, "background": _vec3,
}


def parse_scene(text: str, path="<scene>") -> dict:
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in _SCENE_KEYS:
            raise ValueError(f"{path}:{line_no}: unknown key {k!r}")
        try:
            out[k] = _SCENE_KEYS[k](v)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ValueError(f"{path}:{line_no}: {exc}") from None
    return out


def default_scene(container: ObjectFileContainer) -> dict:
    lo, hi = container.hex_mesh.aabb()
    center = 0.5 * (lo + hi)
    diag = float(np.linalg.norm(hi - lo))
    cam = center + diag * np.array([0.6, -2.0, 0.9])
    light = center + diag * np.array([-1.0, -1.5, 1.5])
    return {
        "camera": tuple(cam), "look_at": tuple(center), "up": (0.0, 0.0, 1.0), "fov": 35.0,
        "width": 128, "height": 128, "light": tuple(light),
        # a face-on white surface lands near 0.9 once self-shadowing halves it
        "light_rgb": tuple([2.0 * math.pi * 0.9 * float(np.sum((light - center) ** 2))] * 3),
        "background": (1.0, 1.0, 1.0),
    }


def cmd_render(args):
    scene = {}
    if args.scene:
        try:
            with open(args.scene, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise StageError("scene", exc) from exc
        scene = _stage("scene", parse_scene, text, args.scene)
    for key in _SCENE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            scene[key] = val
    c = _load(args.objfile)
    full = default_scene(c)
    full.update(scene)
    cam = _stage("camera", render.CameraLight,
                 full["camera"], full["look_at"], full["up"], math.radians(full["fov"]),
                 int(full["width"]), int(full["height"]), full["light"], full["light_rgb"], full["background"])
    field = c.scatter_field()
    rng = None if args.deterministic else np.random.default_rng(args.seed)
    img = _stage("render", render.render_image, field, cam, args.samples, args.shadow_samples,
                 args.deterministic, rng)
    _stage("write_png", render.write_png, img, args.output)
    print(f"{cam.width}x{cam.height} image -> {args.output}")
    return EXIT_OK


def cmd_voxelize(args):
    mesh = _stage("load_mesh", geometry.load_mesh, args.mesh)
    hx = _stage("voxelize", geometry.voxelize, mesh, args.resolution)
    vol, area = geometry.mesh_volume_area(mesh)
    print(f"grid          {hx.dims} at edge {hx.voxel_edge:.6g} m")
    print(f"voxels        {hx.n_elements}")
    print(f"nodes         {hx.n_nodes}")
    print(f"volume        voxels {hx.n_elements * hx.voxel_edge ** 3:.6g} m^3, mesh {vol:.6g} m^3")
    if args.output:
        np.savez(args.output, nodes=hx.nodes, elements=hx.elements, occupancy=hx.occupancy,
                 origin=hx.origin, voxel_edge=hx.voxel_edge)
    return EXIT_OK


COMMANDS = {
    "build": cmd_build, "info": cmd_info, "modes": cmd_modes, "impact": cmd_impact,
    "touch": cmd_touch, "render": cmd_render, "voxelize": cmd_voxelize,
}


def _set_threads(n):
    from . import kernels

    if kernels.numba_backend is not None:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return
    threadpool_limits(n)


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        _set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"virtobj {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except objectfile.ObjectFileError as exc:
        print(f"virtobj {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
