/**
 * Codecs for the engine's on-disk formats.
 *
 * Binary containers are little-endian with 4-byte ASCII magics; PGM samples
 * are big-endian per that format's own specification. These mirror the
 * engine's readers/writers byte-for-byte so link matrices serialized here
 * compare equal to CLI output.
 */

import { BindingError } from "./types.js";
import type {
  DepthMapView,
  FeatureMap2DView,
  FeatureSet3DView,
  LinkMatrixView,
  VoxelGridView,
} from "./types.js";

const MAGIC_BPV = 0x31565042; // "BPV1" LE
const MAGIC_BPL = 0x314c5042; // "BPL1"
const MAGIC_BPF = 0x31465042; // "BPF1"

class Cursor {
  readonly view: DataView;
  off = 0;

  constructor(readonly buf: Uint8Array, readonly what: string) {
    this.view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  }

  need(n: number): void {
    if (this.off + n > this.buf.length) {
      throw new BindingError(`${this.what}: truncated at offset ${this.off}, need ${n} bytes`);
    }
  }

  u32(): number {
    this.need(4);
    const v = this.view.getUint32(this.off, true);
    this.off += 4;
    return v;
  }

  u64(): number {
    this.need(8);
    const v = this.view.getBigUint64(this.off, true);
    this.off += 8;
    if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new BindingError(`${this.what}: size field ${v} too large`);
    }
    return Number(v);
  }

  f64(): number {
    this.need(8);
    const v = this.view.getFloat64(this.off, true);
    this.off += 8;
    return v;
  }

  u8(): number {
    this.need(1);
    return this.buf[this.off++];
  }

  magic(expected: number, name: string): void {
    if (this.u32() !== expected) {
      throw new BindingError(`${this.what}: bad magic, expected ${name}`);
    }
    const version = this.u32();
    if (version !== 1) {
      throw new BindingError(`${this.what}: unsupported version ${version}`);
    }
  }

  end(): void {
    if (this.off !== this.buf.length) {
      throw new BindingError(`${this.what}: ${this.buf.length - this.off} trailing bytes`);
    }
  }
}

class Builder {
  private chunks: Uint8Array[] = [];

  push(bytes: Uint8Array): void {
    this.chunks.push(bytes);
  }

  scalar(size: number, write: (dv: DataView) => void): void {
    const buf = new Uint8Array(size);
    write(new DataView(buf.buffer));
    this.chunks.push(buf);
  }

  bytes(): Uint8Array {
    let total = 0;
    for (const c of this.chunks) total += c.length;
    const out = new Uint8Array(total);
    let off = 0;
    for (const c of this.chunks) {
      out.set(c, off);
      off += c.length;
    }
    return out;
  }
}

// Typed-array payloads are serialized through DataView so the output is
// little-endian regardless of host byte order.

function writeF32s(b: Builder, data: Float32Array): void {
  const buf = new Uint8Array(data.length * 4);
  const dv = new DataView(buf.buffer);
  for (let i = 0; i < data.length; i++) dv.setFloat32(i * 4, data[i], true);
  b.push(buf);
}

function readF32s(cur: Cursor, count: number): Float32Array {
  cur.need(count * 4);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = cur.view.getFloat32(cur.off + i * 4, true);
  cur.off += count * 4;
  return out;
}

function writeI32s(b: Builder, data: Int32Array): void {
  const buf = new Uint8Array(data.length * 4);
  const dv = new DataView(buf.buffer);
  for (let i = 0; i < data.length; i++) dv.setInt32(i * 4, data[i], true);
  b.push(buf);
}

function readI32s(cur: Cursor, count: number): Int32Array {
  cur.need(count * 4);
  const out = new Int32Array(count);
  for (let i = 0; i < count; i++) out[i] = cur.view.getInt32(cur.off + i * 4, true);
  cur.off += count * 4;
  return out;
}

// ---------------------------------------------------------------------------
// BPV sparse voxel grids (coords + features; labels optional, not exposed)
// ---------------------------------------------------------------------------

export function encodeBpv(grid: VoxelGridView, features?: Float32Array, channels = 0): Uint8Array {
  const c = features ? channels : 0;
  const b = new Builder();
  b.scalar(4 + 4, (dv) => {
    dv.setUint32(0, MAGIC_BPV, true);
    dv.setUint32(4, 1, true);
  });
  b.scalar(8 * 4 + 8 + 4 + 1, (dv) => {
    dv.setFloat64(0, grid.voxelSize, true);
    dv.setFloat64(8, grid.origin[0], true);
    dv.setFloat64(16, grid.origin[1], true);
    dv.setFloat64(24, grid.origin[2], true);
    dv.setBigUint64(32, BigInt(grid.n), true);
    dv.setUint32(40, c, true);
    dv.setUint8(44, 0);
  });
  writeI32s(b, grid.coords);
  if (features) writeF32s(b, features);
  return b.bytes();
}

export interface DecodedBpv {
  grid: VoxelGridView;
  features: Float32Array;
  channels: number;
  labels?: Uint16Array;
}

export function decodeBpv(buf: Uint8Array, what = "bpv"): DecodedBpv {
  const cur = new Cursor(buf, what);
  cur.magic(MAGIC_BPV, "BPV1");
  const voxelSize = cur.f64();
  const origin = new Float64Array([cur.f64(), cur.f64(), cur.f64()]);
  const n = cur.u64();
  const channels = cur.u32();
  const hasLabels = cur.u8();
  const coords = readI32s(cur, n * 3);
  const features = readF32s(cur, n * channels);
  let labels: Uint16Array | undefined;
  if (hasLabels) {
    cur.need(n * 2);
    labels = new Uint16Array(n);
    for (let i = 0; i < n; i++) labels[i] = cur.view.getUint16(cur.off + i * 2, true);
    cur.off += n * 2;
  }
  cur.end();
  return { grid: { origin, voxelSize, coords, n }, features, channels, labels };
}

// ---------------------------------------------------------------------------
// BPL link matrices (packed 9-byte records)
// ---------------------------------------------------------------------------

export function encodeBpl(link: LinkMatrixView): Uint8Array {
  const n = link.u.length;
  const b = new Builder();
  b.scalar(4 + 4 + 8 + 4 + 4, (dv) => {
    dv.setUint32(0, MAGIC_BPL, true);
    dv.setUint32(4, 1, true);
    dv.setBigUint64(8, BigInt(n), true);
    dv.setUint32(16, link.width, true);
    dv.setUint32(20, link.height, true);
  });
  const rec = new Uint8Array(n * 9);
  const dv = new DataView(rec.buffer);
  for (let i = 0; i < n; i++) {
    dv.setInt32(i * 9, link.u[i], true);
    dv.setInt32(i * 9 + 4, link.v[i], true);
    dv.setUint8(i * 9 + 8, link.mask[i]);
  }
  b.push(rec);
  return b.bytes();
}

export function decodeBpl(buf: Uint8Array, what = "bpl"): LinkMatrixView {
  const cur = new Cursor(buf, what);
  cur.magic(MAGIC_BPL, "BPL1");
  const n = cur.u64();
  const width = cur.u32();
  const height = cur.u32();
  cur.need(n * 9);
  const u = new Int32Array(n);
  const v = new Int32Array(n);
  const mask = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    u[i] = cur.view.getInt32(cur.off + i * 9, true);
    v[i] = cur.view.getInt32(cur.off + i * 9 + 4, true);
    mask[i] = cur.view.getUint8(cur.off + i * 9 + 8);
  }
  cur.off += n * 9;
  cur.end();
  return { u, v, mask, width, height };
}

// ---------------------------------------------------------------------------
// BPF float32 tensors
// ---------------------------------------------------------------------------

export function encodeBpf(dims: number[], data: Float32Array): Uint8Array {
  const b = new Builder();
  b.scalar(4 + 4 + 4 + dims.length * 8, (dv) => {
    dv.setUint32(0, MAGIC_BPF, true);
    dv.setUint32(4, 1, true);
    dv.setUint32(8, dims.length, true);
    dims.forEach((d, i) => dv.setBigUint64(12 + i * 8, BigInt(d), true));
  });
  writeF32s(b, data);
  return b.bytes();
}

export function decodeBpf(buf: Uint8Array, what = "bpf"): { dims: number[]; data: Float32Array } {
  const cur = new Cursor(buf, what);
  cur.magic(MAGIC_BPF, "BPF1");
  const ndims = cur.u32();
  if (ndims === 0 || ndims > 8) {
    throw new BindingError(`${what}: unsupported ndims ${ndims}`);
  }
  const dims: number[] = [];
  let count = 1;
  for (let i = 0; i < ndims; i++) {
    const d = cur.u64();
    dims.push(d);
    count *= d;
  }
  const data = readF32s(cur, count);
  cur.end();
  return { dims, data };
}

// ---------------------------------------------------------------------------
// PGM 16-bit (big-endian samples; depth in millimeters, 0 = invalid)
// ---------------------------------------------------------------------------

export function encodePgm16(depth: DepthMapView): Uint8Array {
  const header = new TextEncoder().encode(`P5\n${depth.width} ${depth.height}\n65535\n`);
  const body = new Uint8Array(depth.values.length * 2);
  const dv = new DataView(body.buffer);
  for (let i = 0; i < depth.values.length; i++) {
    const mm = Math.round(depth.values[i] * 1000.0);
    dv.setUint16(i * 2, Math.min(65535, Math.max(0, mm)), false);
  }
  const out = new Uint8Array(header.length + body.length);
  out.set(header, 0);
  out.set(body, header.length);
  return out;
}

export function decodePgm16(buf: Uint8Array, what = "pgm"): DepthMapView {
  const text = new TextDecoder("latin1").decode(buf);
  const m = /^P5\s+(\d+)\s+(\d+)\s+(\d+)\s/.exec(text);
  if (!m) throw new BindingError(`${what}: malformed PGM header`);
  const [, w, h, maxval] = m;
  if (Number(maxval) !== 65535) {
    throw new BindingError(`${what}: maxval must be 65535, got ${maxval}`);
  }
  const width = Number(w);
  const height = Number(h);
  const start = m[0].length;
  if (buf.length - start !== width * height * 2) {
    throw new BindingError(`${what}: body size mismatch`);
  }
  const dv = new DataView(buf.buffer, buf.byteOffset + start, width * height * 2);
  const values = new Float32Array(width * height);
  for (let i = 0; i < values.length; i++) {
    values[i] = Math.fround(dv.getUint16(i * 2, false) / 1000.0);
  }
  return { width, height, values };
}

// ---------------------------------------------------------------------------
// Camera text files
// ---------------------------------------------------------------------------

export function encodeIntrinsics(fx: number, fy: number, cx: number, cy: number): string {
  return `${fx} 0.0 ${cx}\n0.0 ${fy} ${cy}\n0.0 0.0 1.0\n`;
}

export function encodePose(pose?: Float64Array): string {
  const m = pose ?? new Float64Array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]);
  if (m.length !== 16) {
    throw new BindingError(`pose must have 16 entries, got ${m.length}`);
  }
  const rows: string[] = [];
  for (let r = 0; r < 4; r++) {
    rows.push([m[r * 4], m[r * 4 + 1], m[r * 4 + 2], m[r * 4 + 3]].join(" "));
  }
  return rows.join("\n") + "\n";
}

export function decodeIntrinsics(text: string): { fx: number; fy: number; cx: number; cy: number } {
  const vals = text.trim().split(/\s+/).map(Number);
  if (vals.length !== 9 || vals.some((v) => !Number.isFinite(v))) {
    throw new BindingError("intrinsics file must hold 9 numbers");
  }
  return { fx: vals[0], cx: vals[2], fy: vals[4], cy: vals[5] };
}

export function decodePose(text: string): Float64Array {
  const vals = text.trim().split(/\s+/).map(Number);
  if (vals.length !== 16 || vals.some((v) => !Number.isFinite(v))) {
    throw new BindingError("pose file must hold 16 numbers");
  }
  return new Float64Array(vals);
}
