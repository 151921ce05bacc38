import { spawnSync } from "node:child_process";
import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, test } from "vitest";

import {
  decodeBpf,
  decodeBpl,
  decodeBpv,
  decodeIntrinsics,
  decodePgm16,
  decodePose,
  encodeBpf,
  encodeBpl,
  encodeBpv,
  encodeIntrinsics,
  encodePgm16,
  encodePose,
} from "../src/formats.js";
import { BindingError } from "../src/types.js";
import {
  arraysEqual,
  randomDepth,
  randomFeatures,
  randomGrid,
  randomLink,
  rng,
  scratchDir,
} from "./helpers.js";

describe("codec round trips", () => {
  test("bpv", () => {
    const r = rng(1);
    const grid = randomGrid(r);
    const feats = randomFeatures(r, grid.n, 3);
    const decoded = decodeBpv(encodeBpv(grid, feats.data, 3));
    expect(decoded.grid.n).toBe(grid.n);
    expect(decoded.grid.voxelSize).toBe(grid.voxelSize);
    expect(arraysEqual(decoded.grid.coords, grid.coords)).toBe(true);
    expect(arraysEqual(decoded.features, feats.data)).toBe(true);
  });

  test("bpl", () => {
    const r = rng(2);
    const link = randomLink(r, 40, 16, 12);
    const decoded = decodeBpl(encodeBpl(link));
    expect(arraysEqual(decoded.u, link.u)).toBe(true);
    expect(arraysEqual(decoded.v, link.v)).toBe(true);
    expect(arraysEqual(decoded.mask, link.mask)).toBe(true);
    expect([decoded.width, decoded.height]).toEqual([16, 12]);
  });

  test("bpf", () => {
    const r = rng(3);
    const data = randomFeatures(r, 6, 4).data;
    const decoded = decodeBpf(encodeBpf([6, 4], data));
    expect(decoded.dims).toEqual([6, 4]);
    expect(arraysEqual(decoded.data, data)).toBe(true);
  });

  test("pgm16 preserves millimeter depth", () => {
    const r = rng(4);
    const depth = randomDepth(r, 8, 6);
    const decoded = decodePgm16(encodePgm16(depth));
    expect(arraysEqual(decoded.values, depth.values)).toBe(true);
  });

  test("camera text formats", () => {
    const k = decodeIntrinsics(encodeIntrinsics(60.5, 59.25, 15.5, 11.5));
    expect([k.fx, k.fy, k.cx, k.cy]).toEqual([60.5, 59.25, 15.5, 11.5]);
    const pose = new Float64Array([1, 0, 0, 0.25, 0, 1, 0, -0.5, 0, 0, 1, 2, 0, 0, 0, 1]);
    expect(Array.from(decodePose(encodePose(pose)))).toEqual(Array.from(pose));
  });

  test("truncated containers are rejected", () => {
    const r = rng(5);
    const whole = encodeBpl(randomLink(r, 10, 8, 8));
    expect(() => decodeBpl(whole.slice(0, whole.length - 3))).toThrow(BindingError);
    expect(() => decodeBpf(new Uint8Array([1, 2, 3]))).toThrow(BindingError);
  });
});

describe("cross-compatibility with the engine's writers", () => {
  test("engine-written files decode byte-compatibly", () => {
    const dir = scratchDir("xfmt-");
    const script = `
import numpy as np
from crossproj import io_formats as io
from crossproj.linker import DepthMap, LinkMatrix
from crossproj.voxelgrid import SparseVoxelGrid
rng = np.random.default_rng(9)
coords = np.unique(rng.integers(-9, 9, (20, 3)), axis=0).astype(np.int32)
grid = SparseVoxelGrid(np.array([0.1, -0.2, 0.0]), 0.05, coords,
                       rng.normal(size=(len(coords), 3)).astype(np.float32))
io.write_bpv("${dir}/g.bpv", grid)
link = LinkMatrix(rng.integers(0, 8, 12).astype(np.int32),
                  rng.integers(0, 6, 12).astype(np.int32),
                  rng.integers(0, 2, 12).astype(np.uint8), 8, 6)
io.write_bpl("${dir}/l.bpl", link)
io.write_bpf("${dir}/t.bpf", rng.normal(size=(3, 4)).astype(np.float32))
io.write_pgm16("${dir}/d.pgm", DepthMap((rng.integers(0, 5000, (6, 8)) / 1000.0).astype(np.float32)))
`;
    const proc = spawnSync("python3", ["-c", script], { encoding: "utf8" });
    expect(proc.status, proc.stderr).toBe(0);

    const bpv = decodeBpv(readFileSync(join(dir, "g.bpv")));
    expect(bpv.channels).toBe(3);
    // re-encoding reproduces the engine's bytes exactly
    const reencoded = encodeBpv(bpv.grid, bpv.features, bpv.channels);
    expect(Buffer.from(reencoded).equals(readFileSync(join(dir, "g.bpv")))).toBe(true);

    const bplBytes = readFileSync(join(dir, "l.bpl"));
    const link = decodeBpl(bplBytes);
    expect(Buffer.from(encodeBpl(link)).equals(bplBytes)).toBe(true);

    const bpf = decodeBpf(readFileSync(join(dir, "t.bpf")));
    expect(bpf.dims).toEqual([3, 4]);

    const depth = decodePgm16(readFileSync(join(dir, "d.pgm")));
    const pgmBytes = readFileSync(join(dir, "d.pgm"));
    expect(Buffer.from(encodePgm16(depth)).equals(pgmBytes)).toBe(true);

    // and the engine accepts files written by these codecs
    const echo = `
from crossproj import io_formats as io
g = io.read_bpv("${dir}/g2.bpv")
l = io.read_bpl("${dir}/l2.bpl")
assert g.n == ${bpv.grid.n} and l.n == 12
print("ok")
`;
    writeFileSync(join(dir, "g2.bpv"), encodeBpv(bpv.grid, bpv.features, bpv.channels));
    writeFileSync(join(dir, "l2.bpl"), encodeBpl(link));
    const back = spawnSync("python3", ["-c", echo], { encoding: "utf8" });
    expect(back.status, back.stderr).toBe(0);
    expect(back.stdout.trim()).toBe("ok");
  });
});
