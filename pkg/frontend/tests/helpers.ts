/** Shared test utilities: seeded RNG, random geometry, case scaffolding. */

import { spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import type {
  CameraView,
  DepthMapView,
  FeatureSet3DView,
  LinkMatrixView,
  VoxelGridView,
} from "../src/types.js";

/** mulberry32: tiny deterministic PRNG, good enough for test data. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(r: () => number, lo: number, hi: number): number {
  return lo + Math.floor(r() * (hi - lo));
}

/** Rotation Rz(a) @ Ry(b) @ Rx(c): orthonormal with det +1. */
export function rotation(a: number, b: number, c: number): number[][] {
  const [sa, ca] = [Math.sin(a), Math.cos(a)];
  const [sb, cb] = [Math.sin(b), Math.cos(b)];
  const [sc, cc] = [Math.sin(c), Math.cos(c)];
  const rz = [[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]];
  const ry = [[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]];
  const rx = [[1, 0, 0], [0, cc, -sc], [0, sc, cc]];
  const mul = (x: number[][], y: number[][]) =>
    x.map((row, i) => y[0].map((_, j) => row[0] * y[0][j] + row[1] * y[1][j] + row[2] * y[2][j]));
  return mul(mul(rz, ry), rx);
}

export function randomCamera(r: () => number): CameraView {
  const rot = rotation(r() * 0.6 - 0.3, r() * 0.6 - 0.3, r() * 0.6 - 0.3);
  const t = [r() * 2 - 1, r() * 2 - 1, r() * 1 - 2.5];
  const pose = new Float64Array(16);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) pose[i * 4 + j] = rot[i][j];
    pose[i * 4 + 3] = t[i];
  }
  pose[15] = 1;
  return { fx: 30 + r() * 60, fy: 30 + r() * 60, cx: 12 + r() * 8, cy: 8 + r() * 8, pose };
}

export function randomGrid(r: () => number, maxN = 60): VoxelGridView {
  const want = randInt(r, 1, maxN + 1);
  const seen = new Set<string>();
  const rows: number[] = [];
  while (seen.size < want) {
    const c = [randInt(r, -12, 12), randInt(r, -12, 12), randInt(r, 10, 60)];
    const key = c.join(",");
    if (!seen.has(key)) {
      seen.add(key);
      rows.push(...c);
    }
  }
  return {
    origin: new Float64Array([r() * 0.2 - 0.1, r() * 0.2 - 0.1, 0]),
    voxelSize: 0.02 + r() * 0.08,
    coords: new Int32Array(rows),
    n: want,
  };
}

/** Depth maps carry exact millimeter multiples (the wire format's grid). */
export function randomDepth(r: () => number, width: number, height: number): DepthMapView {
  const values = new Float32Array(width * height);
  for (let i = 0; i < values.length; i++) {
    const mm = r() < 0.25 ? 0 : randInt(r, 100, 5000);
    values[i] = Math.fround(mm / 1000.0);
  }
  return { width, height, values };
}

export function randomLink(
  r: () => number,
  n: number,
  width: number,
  height: number,
): LinkMatrixView {
  const u = new Int32Array(n);
  const v = new Int32Array(n);
  const mask = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    u[i] = randInt(r, 0, width);
    v[i] = randInt(r, 0, height);
    mask[i] = r() < 0.6 ? 1 : 0;
  }
  return { u, v, mask, width, height };
}

export function randomFeatures(r: () => number, n: number, channels: number): FeatureSet3DView {
  const data = new Float32Array(n * channels);
  for (let i = 0; i < data.length; i++) data[i] = Math.fround(r() * 4 - 2);
  return { n, channels, data };
}

export function scratchDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeCase(dir: string, files: Record<string, Uint8Array | string>): void {
  for (const [name, content] of Object.entries(files)) {
    writeFileSync(join(dir, name), content);
  }
}

/** Run the engine library (not the CLI) over all prepared cases. */
export function computeExpectedOutputs(root: string): void {
  const script = new URL("./expected_outputs.py", import.meta.url).pathname;
  const proc = spawnSync("python3", [script, root], { encoding: "utf8" });
  if (proc.status !== 0) {
    throw new Error(`expected_outputs.py failed:\n${proc.stderr}`);
  }
}

export function engineCli(args: string[], check = true): { status: number | null; stdout: string; stderr: string } {
  const proc = spawnSync("crossproj", args, { encoding: "utf8" });
  if (check && proc.status !== 0) {
    throw new Error(`crossproj ${args.join(" ")} failed: ${proc.stderr}`);
  }
  return { status: proc.status, stdout: proc.stdout, stderr: proc.stderr };
}

export function maxAbsDiff(a: Float32Array, b: Float32Array): number {
  if (a.length !== b.length) return Infinity;
  let worst = 0;
  for (let i = 0; i < a.length; i++) worst = Math.max(worst, Math.abs(a[i] - b[i]));
  return worst;
}

export function arraysEqual(
  a: Int32Array | Uint8Array | Float32Array,
  b: Int32Array | Uint8Array | Float32Array,
): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) if (a[i] !== b[i]) return false;
  return true;
}
