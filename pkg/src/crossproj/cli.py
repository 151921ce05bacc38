"""Batch command-line frontend.

Pipelines communicate only via files (PLY/PGM/BPV/BPL/BPF plus the text
formats), so every stage is independently runnable and diffable.  stdout
carries data and metrics only; diagnostics go to stderr.  Exit codes:
0 success, 1 usage, 2 parse/input error, 3 validation error.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .errors import ParseError, ValidationError
from .geometry import Camera
from .linker import DepthMap, LinkConfig, LinkMatrix, build_link, link_stats, remap_link, render_depth
from .synth import analytic_hits, look_at_pose, sample_cloud
from .transfer import (
    FeatureMap2D,
    FeatureSet3D,
    FusionWeights,
    fuse_views,
    gather_2d_to_3d,
    paint_labels_2d_to_3d,
    paint_labels_3d_to_2d,
    scatter_3d_to_2d,
)
from .views import DEFAULT_VIEW_COUNT, View, ViewBundle, select_views_test, select_views_train
from .voxelgrid import SparseVoxelGrid, voxelize
from . import io_formats as io

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _size_type(text: str):
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def _origin_type(text: str):
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z origin, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 origin components, got {len(parts)}")
    return np.array(parts)


def _delta_type(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"delta must be a number or 'auto', got {text!r}") from None


def _threads_default():
    env = os.environ.get("CROSSPROJ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _load_camera(intrinsics_path, pose_path, width, height) -> Camera:
    intr = io.read_intrinsics(intrinsics_path, width, height)
    pose = io.read_pose(pose_path)
    return Camera(intr, pose)


def _require(args, names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise _UsageError(f"{args.command} {args.direction}: missing {', '.join(missing)}")


def _emit(key, value):
    print(f"{key}={value}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_voxelize(args) -> int:
    cloud = io.read_ply(args.input)
    grid = voxelize(cloud, args.voxel_size, args.origin)
    io.write_bpv(args.out, grid)
    _emit("n", grid.n)
    _emit("channels", grid.channels)
    if grid.n:
        lo = grid.origin + grid.coords.min(axis=0) * grid.voxel_size
        hi = grid.origin + (grid.coords.max(axis=0) + 1) * grid.voxel_size
    else:
        lo = hi = grid.origin
    _emit("bounds_min", ",".join(repr(float(x)) for x in lo))
    _emit("bounds_max", ",".join(repr(float(x)) for x in hi))
    return EXIT_OK


def cmd_link(args) -> int:
    grid = io.read_bpv(args.grid)
    depth = io.read_pgm16(args.depth)
    camera = _load_camera(args.intrinsics, args.pose, depth.width, depth.height)
    link = build_link(grid, camera, depth, LinkConfig(args.delta))
    io.write_bpl(args.out, link)
    if args.stats:
        for key, value in link_stats(grid, camera, link).items():
            _emit(key, value)
    return EXIT_OK


def cmd_render_depth(args) -> int:
    grid = io.read_bpv(args.grid)
    width, height = args.size
    camera = _load_camera(args.intrinsics, args.pose, width, height)
    io.write_pgm16(args.out, render_depth(grid, camera))
    return EXIT_OK


def _read_link(path) -> LinkMatrix:
    return io.read_bpl(path)


def cmd_project(args) -> int:
    if args.direction == "3d-to-2d":
        _require(args, ["grid", "depth", "pose", "intrinsics"])
    else:
        _require(args, ["features"])
    link = _read_link(args.link)
    if args.direction == "3d-to-2d":
        grid = io.read_bpv(args.grid)
        depth = io.read_pgm16(args.depth)
        camera = _load_camera(args.intrinsics, args.pose, depth.width, depth.height)
        if args.features:
            feats = io.read_bpf(args.features)
            if feats.ndim != 2:
                raise ValidationError(f"3-D features must be an (N, C) tensor, got {feats.shape}")
            features = FeatureSet3D(feats)
        else:
            features = FeatureSet3D(grid.features)
        out = scatter_3d_to_2d(features, link, depth, grid, camera)
        io.write_bpf(args.out, out.data)
    else:
        feats = io.read_bpf(args.features)
        if feats.ndim != 3:
            raise ValidationError(f"2-D features must be an (H, W, C) tensor, got {feats.shape}")
        out = gather_2d_to_3d(FeatureMap2D(feats), link)
        io.write_bpf(args.out, out.data)
    return EXIT_OK


def cmd_fuse(args) -> int:
    views = []
    for path in args.views:
        data = io.read_bpf(path)
        if data.ndim != 2:
            raise ValidationError(f"{path}: fusion inputs must be (N, C) tensors, got {data.shape}")
        views.append(FeatureSet3D(data))
    if args.links:
        if len(args.links) != len(views):
            raise ValidationError(f"{len(views)} views but {len(args.links)} link files")
        validity = [_read_link(p).mask for p in args.links]
    else:
        validity = [np.ones(v.n, dtype=np.uint8) for v in views]
    if args.policy == "weights":
        if not args.weights:
            raise ValidationError("--weights is required with --policy weights")
        w = io.read_bpf(args.weights)
        if w.ndim != 2:
            raise ValidationError(f"weights must be an (R, N) tensor, got {w.shape}")
        policy = FusionWeights(w.astype(np.float64))
    else:
        policy = args.policy
    fused = fuse_views(views, validity, policy)
    io.write_bpf(args.out, fused.data)
    return EXIT_OK


def cmd_paint_labels(args) -> int:
    if args.direction == "3d-to-2d":
        _require(args, ["depth", "pose", "intrinsics"])
    else:
        _require(args, ["labels"])
    link = _read_link(args.link)
    grid = io.read_bpv(args.grid)
    if args.direction == "3d-to-2d":
        if grid.labels is None:
            raise ValidationError(f"{args.grid}: grid carries no labels to paint")
        depth = io.read_pgm16(args.depth)
        camera = _load_camera(args.intrinsics, args.pose, depth.width, depth.height)
        img = paint_labels_3d_to_2d(grid.labels, link, depth, grid, camera)
        io.write_label_image(args.out, img)
    else:
        img = io.read_label_image(args.labels)
        painted = paint_labels_2d_to_3d(img, link)
        out_grid = SparseVoxelGrid(grid.origin, grid.voxel_size, grid.coords, grid.features, painted)
        io.write_bpv(args.out, out_grid)
    return EXIT_OK


def cmd_remap(args) -> int:
    link = _read_link(args.input)
    width, height = args.size
    io.write_bpl(args.out, remap_link(link, args.ratio, width, height))
    return EXIT_OK


def cmd_synth(args) -> int:
    scene = io.read_scene(args.scene, density=args.density)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width, height = args.size
    focal = args.focal if args.focal else float(width)

    cloud = sample_cloud(scene, args.seed)
    io.write_ply(out_dir / "cloud.ply", cloud)

    from .geometry import Intrinsics

    intr = Intrinsics(fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                      width=width, height=height)
    io.write_intrinsics(out_dir / "intrinsics.txt", intr)

    lo, hi = scene.bounds()
    center = (lo + hi) / 2.0
    radius = 1.6 * float(np.linalg.norm(hi - lo)) / 2.0 + 0.5
    entries = []
    for k in range(args.views):
        azimuth = 2.0 * np.pi * k / args.views
        eye = center + radius * np.array(
            [np.cos(azimuth) * np.cos(args.elevation),
             np.sin(azimuth) * np.cos(args.elevation),
             np.sin(args.elevation)]
        )
        pose = look_at_pose(eye, center)
        camera = Camera(intr, pose)
        depth, box_idx = analytic_hits(scene, camera)

        pose_name = f"pose_{k:03d}.txt"
        depth_name = f"depth_{k:03d}.pgm"
        color_name = f"color_{k:03d}.pgm"
        io.write_pose(out_dir / pose_name, pose)
        io.write_pgm16(out_dir / depth_name, DepthMap(depth.astype(np.float32)))
        # Grayscale rendering from the hit boxes' colors (luma).
        colors = np.array([b.color for b in scene.boxes])
        luma = np.zeros(depth.shape)
        hit = box_idx >= 0
        weights = np.array([0.299, 0.587, 0.114])
        luma[hit] = colors[box_idx[hit]] @ weights
        io.write_label_image(out_dir / color_name, np.round(luma * 65535).astype(np.uint16))
        entries.append(io.ManifestEntry(k, color_name, depth_name, pose_name))
    io.write_manifest(out_dir / "manifest.txt", "intrinsics.txt", entries)
    _emit("points", len(cloud))
    _emit("views", args.views)
    _emit("out_dir", out_dir)
    return EXIT_OK


def _load_bundle(manifest_path) -> ViewBundle:
    intr_path, entries = io.read_manifest(manifest_path)
    base = Path(manifest_path).parent

    def resolve(p):
        return p if os.path.isabs(p) else str(base / p)

    views = []
    for e in entries:
        depth = io.read_pgm16(resolve(e.depth_path))
        camera = _load_camera(resolve(intr_path), resolve(e.pose_path), depth.width, depth.height)
        views.append(View(e.frame_index, resolve(e.color_path), depth, camera))
    return ViewBundle(views)


def cmd_select_views(args) -> int:
    bundle = _load_bundle(args.manifest)
    if args.mode == "train":
        picked = select_views_train(bundle, args.n, args.seed)
    else:
        picked = select_views_test(bundle, args.n)
    for view in picked:
        print(view.frame_index)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

def _bench_inputs(n_voxels, width, height, channels, seed=20240601):
    """Random grid in a cube, a camera that sees it, and warm inputs."""
    rng = np.random.default_rng(seed)
    side = max(2, int(np.ceil((2.0 * max(n_voxels, 1)) ** (1.0 / 3.0))))
    flat = rng.choice(side ** 3, size=n_voxels, replace=False)
    coords = np.stack(np.unravel_index(flat, (side, side, side)), axis=1).astype(np.int32)
    voxel_size = 0.02
    grid = SparseVoxelGrid(np.zeros(3), voxel_size,
                           coords, rng.random((n_voxels, channels), dtype=np.float32))
    extent = side * voxel_size
    center = np.full(3, extent / 2.0)
    eye = center + np.array([0.0, -2.2 * extent, 1.1 * extent])
    from .geometry import Intrinsics

    intr = Intrinsics(fx=0.9 * width, fy=0.9 * width, cx=(width - 1) / 2.0,
                      cy=(height - 1) / 2.0, width=width, height=height)
    camera = Camera(intr, look_at_pose(eye, center))
    return grid, camera


def _time_op(fn, iters):
    fn()  # warm
    samples = []
    for _ in range(iters):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def cmd_bench(args) -> int:
    n = args.voxels
    width, height = args.size
    if args.backend == "both":
        backends = _kernels.available_backends()
    elif args.backend == "active":
        backends = {_kernels.backend(): _kernels.available_backends()[_kernels.backend()]}
    else:
        avail = _kernels.available_backends()
        if args.backend not in avail:
            raise ValidationError(f"backend {args.backend!r} is not available (built: {sorted(avail)})")
        backends = {args.backend: avail[args.backend]}

    _emit("voxels", n)
    _emit("size", f"{width}x{height}")
    _emit("channels", args.channels)
    _emit("threads", args.threads)
    if n == 0:
        for name in backends:
            for op in ("build_link", "scatter", "gather", "total"):
                _emit(f"{name}.{op}.median_s", 0)
                _emit(f"{name}.{op}.voxels_per_s", 0)
        return EXIT_OK

    grid, camera = _bench_inputs(n, width, height, args.channels)
    depth = render_depth(grid, camera)
    features = FeatureSet3D(grid.features)

    for name, impl in backends.items():
        u, v, mask = impl.build_link(camera.m, grid.coords, grid.origin, grid.voxel_size,
                                     depth.values, grid.voxel_size)
        link = LinkMatrix(u, v, mask, width, height)
        zcam = impl.voxel_depths(camera.m, grid.coords, grid.origin, grid.voxel_size)
        image = np.zeros((height, width, args.channels), dtype=np.float32)

        def run_build():
            impl.build_link(camera.m, grid.coords, grid.origin, grid.voxel_size,
                            depth.values, grid.voxel_size)

        def run_scatter():
            winner = impl.scatter_winners(link.u, link.v, link.mask, depth.values, zcam)
            image[:] = 0.0
            hit = winner >= 0
            image[hit] = features.data[winner[hit]]

        def run_gather():
            impl.gather(image, link.u, link.v, link.mask)

        total = 0.0
        for op, fn in (("build_link", run_build), ("scatter", run_scatter), ("gather", run_gather)):
            med = _time_op(fn, args.iters)
            total += med
            _emit(f"{name}.{op}.median_s", f"{med:.6f}")
            _emit(f"{name}.{op}.voxels_per_s", f"{n / med:.0f}" if med > 0 else "inf")
        _emit(f"{name}.total.median_s", f"{total:.6f}")
        _emit(f"{name}.total.voxels_per_s", f"{n / total:.0f}" if total > 0 else "inf")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crossproj", description=__doc__)
    parser.add_argument("--version", action="version", version=f"crossproj {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", help="bin a PLY point cloud into a sparse voxel grid")
    p.add_argument("--in", dest="input", required=True, help="input ASCII PLY")
    p.add_argument("--voxel-size", type=float, required=True, help="voxel edge length in meters")
    p.add_argument("--origin", type=_origin_type, default=np.zeros(3), help="grid origin x,y,z")
    p.add_argument("--out", required=True, help="output BPV grid")
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("link", help="build the per-voxel link matrix for one view")
    p.add_argument("--grid", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--delta", type=_delta_type, default="auto",
                   help="depth-matching tolerance in meters, or 'auto' (= voxel size)")
    p.add_argument("--out", required=True, help="output BPL link matrix")
    p.add_argument("--stats", action="store_true",
                   help="print visible/occluded/out-of-frustum voxel counts")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("render-depth", help="z-buffer splat of voxel centers to a depth map")
    p.add_argument("--grid", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--size", type=_size_type, required=True, help="image size WxH")
    p.add_argument("--out", required=True, help="output 16-bit PGM")
    p.set_defaults(func=cmd_render_depth)

    p = sub.add_parser("project", help="move features between 3D voxels and a 2D image")
    p.add_argument("direction", choices=["3d-to-2d", "2d-to-3d"])
    p.add_argument("--link", required=True)
    p.add_argument("--grid", help="BPV grid (3d-to-2d)")
    p.add_argument("--depth", help="depth PGM (3d-to-2d)")
    p.add_argument("--pose", help="pose file (3d-to-2d)")
    p.add_argument("--intrinsics", help="intrinsics file (3d-to-2d)")
    p.add_argument("--features", help="input BPF (defaults to grid features for 3d-to-2d)")
    p.add_argument("--out", required=True, help="output BPF")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fuse", help="fuse per-view back-projected features")
    p.add_argument("--policy", choices=["uniform", "max", "weights"], required=True)
    p.add_argument("--weights", help="BPF of (views, voxels) weights for --policy weights")
    p.add_argument("--links", nargs="+", help="per-view BPL files supplying validity masks")
    p.add_argument("--out", required=True)
    p.add_argument("views", nargs="+", help="per-view BPF feature sets (N x C)")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("paint-labels", help="transfer semantic labels between 3D and 2D")
    p.add_argument("direction", choices=["3d-to-2d", "2d-to-3d"])
    p.add_argument("--grid", required=True)
    p.add_argument("--link", required=True)
    p.add_argument("--depth", help="depth PGM (3d-to-2d)")
    p.add_argument("--pose", help="pose file (3d-to-2d)")
    p.add_argument("--intrinsics", help="intrinsics file (3d-to-2d)")
    p.add_argument("--labels", help="input label PGM (2d-to-3d)")
    p.add_argument("--out", required=True, help="label PGM (3d-to-2d) or BPV (2d-to-3d)")
    p.set_defaults(func=cmd_paint_labels)

    p = sub.add_parser("remap", help="remap link pixel coordinates to a pyramid level")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--ratio", type=int, required=True, help="downsampling ratio (>= 1)")
    p.add_argument("--size", type=_size_type, required=True, help="target pixel space WxH")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_remap)

    p = sub.add_parser("synth", help="generate a synthetic box scene with exact depth")
    p.add_argument("--scene", required=True, help="box scene description file")
    p.add_argument("--views", type=int, default=DEFAULT_VIEW_COUNT)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--density", type=float, default=1000.0, help="surface points per square meter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_size_type, default=(160, 120), help="rendered image size WxH")
    p.add_argument("--focal", type=float, default=None, help="focal length in pixels")
    p.add_argument("--elevation", type=float, default=0.6, help="camera ring elevation (radians)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select-views", help="pick views from a scene manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["train", "test"], required=True)
    p.add_argument("--n", type=int, default=DEFAULT_VIEW_COUNT)
    p.add_argument("--seed", type=int, default=0, help="rng seed (train mode)")
    p.set_defaults(func=cmd_select_views)

    p = sub.add_parser("bench", help="throughput benchmark of the hot kernels")
    p.add_argument("--voxels", type=int, required=True)
    p.add_argument("--size", type=_size_type, required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--backend", choices=["active", "both", "numpy", "native"], default="active")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "threads", None) is None:
        args.threads = _threads_default()
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
