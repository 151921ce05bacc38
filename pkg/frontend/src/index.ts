/**
 * crossproj bindings: the engine's five hot kernels over typed arrays.
 *
 * Each function marshals its inputs into the engine's binary formats in a
 * scratch directory, invokes one CLI subcommand, and decodes the result.
 * Outputs are numerically identical to the engine's own: bit-identical for
 * the integer/mask parts, within float32 rounding for aggregated floats.
 */

import { writeFileSync, readFileSync } from "node:fs";
import { join } from "node:path";

import {
  decodeBpf,
  decodeBpl,
  encodeBpf,
  encodeBpl,
  encodeBpv,
  encodeIntrinsics,
  encodePgm16,
  encodePose,
} from "./formats.js";
import { runEngine, withScratch } from "./runner.js";
import {
  BindingError,
  checkDepth,
  checkFeatures2d,
  checkFeatures3d,
  checkGrid,
  checkLink,
  expectArray,
} from "./types.js";
import type {
  CameraView,
  DepthMapView,
  FeatureMap2DView,
  FeatureSet3DView,
  FusionPolicy,
  LinkMatrixView,
  VoxelGridView,
} from "./types.js";

export { BindingError } from "./types.js";
export type {
  CameraView,
  DepthMapView,
  FeatureMap2DView,
  FeatureSet3DView,
  FusionPolicy,
  LinkMatrixView,
  VoxelGridView,
} from "./types.js";
export * as formats from "./formats.js";

/** Engine (primary library) semantic version, e.g. "0.1.0". */
export function version(): string {
  const out = runEngine(["--version"]).trim();
  const m = /(\d+\.\d+\.\d+)\s*$/.exec(out);
  if (!m) throw new BindingError(`cannot parse engine version from '${out}'`);
  return m[1];
}

function writeCameraFiles(dir: string, camera: CameraView): { intrinsics: string; pose: string } {
  const intrinsics = join(dir, "k.txt");
  const pose = join(dir, "p.txt");
  writeFileSync(intrinsics, encodeIntrinsics(camera.fx, camera.fy, camera.cx, camera.cy));
  writeFileSync(pose, encodePose(camera.pose));
  return { intrinsics, pose };
}

function writeGridFile(dir: string, grid: VoxelGridView, features?: FeatureSet3DView): string {
  const path = join(dir, "grid.bpv");
  writeFileSync(path, encodeBpv(grid, features?.data, features?.channels ?? 0));
  return path;
}

function writeDepthFile(dir: string, depth: DepthMapView): string {
  const path = join(dir, "depth.pgm");
  writeFileSync(path, encodePgm16(depth));
  return path;
}

function writeLinkFile(dir: string, name: string, link: LinkMatrixView): string {
  const path = join(dir, name);
  writeFileSync(path, encodeBpl(link));
  return path;
}

/**
 * Build the per-voxel link matrix for one view.
 *
 * Depth values are marshalled at millimeter resolution (the engine's wire
 * format); pass depths that are exact millimeter multiples when bit-exact
 * agreement with in-memory engine runs matters.
 */
export function buildLink(
  grid: VoxelGridView,
  camera: CameraView,
  depth: DepthMapView,
  delta: number | "auto" = "auto",
): LinkMatrixView {
  checkGrid(grid);
  checkDepth(depth);
  if (delta !== "auto" && !(delta > 0)) {
    throw new BindingError(`delta must be positive or "auto", got ${delta}`);
  }
  return withScratch((dir) => {
    const gridPath = writeGridFile(dir, grid);
    const depthPath = writeDepthFile(dir, depth);
    const cam = writeCameraFiles(dir, camera);
    const out = join(dir, "link.bpl");
    runEngine([
      "link", "--grid", gridPath, "--pose", cam.pose, "--intrinsics", cam.intrinsics,
      "--depth", depthPath, "--delta", String(delta), "--out", out,
    ]);
    return decodeBpl(readFileSync(out));
  });
}

/** Project voxel features into an image; collisions resolve to the nearest-residual voxel. */
export function scatter3dTo2d(
  features: FeatureSet3DView,
  link: LinkMatrixView,
  depth: DepthMapView,
  grid: VoxelGridView,
  camera: CameraView,
): FeatureMap2DView {
  checkFeatures3d(features);
  checkLink(link);
  checkDepth(depth);
  checkGrid(grid);
  if (features.n !== link.u.length) {
    throw new BindingError(`feature set has ${features.n} rows but link has ${link.u.length}`);
  }
  return withScratch((dir) => {
    const gridPath = writeGridFile(dir, grid);
    const depthPath = writeDepthFile(dir, depth);
    const cam = writeCameraFiles(dir, camera);
    const linkPath = writeLinkFile(dir, "link.bpl", link);
    const featPath = join(dir, "f3d.bpf");
    writeFileSync(featPath, encodeBpf([features.n, features.channels], features.data));
    const out = join(dir, "img.bpf");
    runEngine([
      "project", "3d-to-2d", "--grid", gridPath, "--link", linkPath,
      "--depth", depthPath, "--pose", cam.pose, "--intrinsics", cam.intrinsics,
      "--features", featPath, "--out", out,
    ]);
    const dec = decodeBpf(readFileSync(out));
    const [height, width, channels] = dec.dims;
    return { width, height, channels, data: dec.data };
  });
}

/** Back-project image features onto voxels; masked-out rows come back zero. */
export function gather2dTo3d(
  features: FeatureMap2DView,
  link: LinkMatrixView,
): FeatureSet3DView {
  checkFeatures2d(features);
  checkLink(link);
  return withScratch((dir) => {
    const linkPath = writeLinkFile(dir, "link.bpl", link);
    const featPath = join(dir, "f2d.bpf");
    writeFileSync(
      featPath,
      encodeBpf([features.height, features.width, features.channels], features.data),
    );
    const out = join(dir, "f3d.bpf");
    runEngine([
      "project", "2d-to-3d", "--link", linkPath, "--features", featPath, "--out", out,
    ]);
    const dec = decodeBpf(readFileSync(out));
    const [n, channels] = dec.dims;
    return { n, channels, data: dec.data };
  });
}

/**
 * Fuse per-view back-projected features.
 *
 * Validity masks travel as mask-only link matrices; explicit weights as an
 * (R x N) float32 tensor.
 */
export function fuseViews(
  views: FeatureSet3DView[],
  validity: Uint8Array[],
  policy: FusionPolicy = "uniform",
): FeatureSet3DView {
  if (views.length < 1) throw new BindingError("fusion needs at least one view");
  if (validity.length !== views.length) {
    throw new BindingError(`${views.length} views but ${validity.length} validity masks`);
  }
  const n = views[0].n;
  views.forEach(checkFeatures3d);
  validity.forEach((m, i) => expectArray(m, Uint8Array, n, `validity[${i}]`));
  return withScratch((dir) => {
    const viewPaths: string[] = [];
    const linkPaths: string[] = [];
    views.forEach((view, i) => {
      const vp = join(dir, `view_${i}.bpf`);
      writeFileSync(vp, encodeBpf([view.n, view.channels], view.data));
      viewPaths.push(vp);
      linkPaths.push(writeLinkFile(dir, `valid_${i}.bpl`, {
        u: new Int32Array(n),
        v: new Int32Array(n),
        mask: validity[i],
        width: 1,
        height: 1,
      }));
    });
    const out = join(dir, "fused.bpf");
    const args = ["fuse", "--out", out, "--links", ...linkPaths];
    if (typeof policy === "string") {
      args.push("--policy", policy);
    } else {
      expectArray(policy.weights, Float32Array, policy.views * n, "policy.weights");
      const wp = join(dir, "weights.bpf");
      writeFileSync(wp, encodeBpf([policy.views, n], policy.weights));
      args.push("--policy", "weights", "--weights", wp);
    }
    runEngine([...args, ...viewPaths]);
    const dec = decodeBpf(readFileSync(out));
    const [rows, channels] = dec.dims;
    return { n: rows, channels, data: dec.data };
  });
}

/** Remap link pixel coordinates to a coarser pyramid level (mask unchanged). */
export function remapLink(
  link: LinkMatrixView,
  ratio: number,
  newWidth: number,
  newHeight: number,
): LinkMatrixView {
  checkLink(link);
  if (!Number.isInteger(ratio) || ratio < 1) {
    throw new BindingError(`ratio must be a positive integer, got ${ratio}`);
  }
  return withScratch((dir) => {
    const inPath = writeLinkFile(dir, "in.bpl", link);
    const out = join(dir, "out.bpl");
    runEngine([
      "remap", "--in", inPath, "--ratio", String(ratio),
      "--size", `${newWidth}x${newHeight}`, "--out", out,
    ]);
    return decodeBpl(readFileSync(out));
  });
}
