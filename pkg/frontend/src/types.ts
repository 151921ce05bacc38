/**
 * Typed-array views exchanged with the projection engine.
 *
 * All buffers are contiguous and row-major; shapes are carried alongside.
 * Dtypes are fixed: f32 for features and depth, i32 for coordinates and
 * pixel indices, u8 for masks, f64 for camera parameters.
 */

/** Raised on dtype/shape mismatches and on engine-side failures. */
export class BindingError extends Error {
  /** Engine exit code when the error came from the subprocess (2 = parse, 3 = validation). */
  readonly exitCode?: number;

  constructor(message: string, exitCode?: number) {
    super(message);
    this.name = "BindingError";
    this.exitCode = exitCode;
  }
}

/** Sparse voxel grid view: N voxels, integer coords flattened as N x 3. */
export interface VoxelGridView {
  /** Grid origin in world meters, length 3. */
  origin: Float64Array;
  /** Voxel edge length in meters (> 0). */
  voxelSize: number;
  /** Integer voxel coordinates, length n * 3, row-major. */
  coords: Int32Array;
  n: number;
}

/** Pinhole camera: intrinsics plus a 4x4 row-major camera-to-world pose. */
export interface CameraView {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  /** Length 16, row-major camera-to-world; identity when omitted. */
  pose?: Float64Array;
}

/** Per-pixel depth in meters (0 = invalid), length width * height. */
export interface DepthMapView {
  width: number;
  height: number;
  values: Float32Array;
}

/** Link matrix: per-voxel pixel binding with a visibility mask. */
export interface LinkMatrixView {
  u: Int32Array;
  v: Int32Array;
  mask: Uint8Array;
  width: number;
  height: number;
}

/** N x C per-voxel features, row-major. */
export interface FeatureSet3DView {
  n: number;
  channels: number;
  data: Float32Array;
}

/** H x W x C image features, row-major. */
export interface FeatureMap2DView {
  width: number;
  height: number;
  channels: number;
  data: Float32Array;
}

/** Multi-view fusion policy: named reduction or explicit (R x N) weights. */
export type FusionPolicy =
  | "uniform"
  | "max"
  | { weights: Float32Array; views: number };

function dtypeName(x: unknown): string {
  if (x instanceof Float32Array) return "f32";
  if (x instanceof Float64Array) return "f64";
  if (x instanceof Int32Array) return "i32";
  if (x instanceof Uint8Array) return "u8";
  return typeof x;
}

export function expectArray<T>(
  value: unknown,
  ctor: new (n: number) => T,
  length: number,
  what: string,
): T {
  if (!(value instanceof ctor)) {
    throw new BindingError(
      `${what}: expected ${dtypeName(new ctor(0))} buffer, got ${dtypeName(value)}`,
    );
  }
  const actual = (value as unknown as { length: number }).length;
  if (actual !== length) {
    throw new BindingError(`${what}: expected length ${length}, got ${actual}`);
  }
  return value;
}

export function checkGrid(grid: VoxelGridView): void {
  expectArray(grid.origin, Float64Array, 3, "grid.origin");
  expectArray(grid.coords, Int32Array, grid.n * 3, "grid.coords");
  if (!(grid.voxelSize > 0)) {
    throw new BindingError(`grid.voxelSize must be positive, got ${grid.voxelSize}`);
  }
}

export function checkDepth(depth: DepthMapView): void {
  if (depth.width <= 0 || depth.height <= 0) {
    throw new BindingError(`depth map dims must be positive, got ${depth.width}x${depth.height}`);
  }
  expectArray(depth.values, Float32Array, depth.width * depth.height, "depth.values");
}

export function checkLink(link: LinkMatrixView): void {
  const n = link.u.length;
  expectArray(link.u, Int32Array, n, "link.u");
  expectArray(link.v, Int32Array, n, "link.v");
  expectArray(link.mask, Uint8Array, n, "link.mask");
  if (link.width <= 0 || link.height <= 0) {
    throw new BindingError(`link pixel space must be positive, got ${link.width}x${link.height}`);
  }
}

export function checkFeatures3d(f: FeatureSet3DView): void {
  expectArray(f.data, Float32Array, f.n * f.channels, "features.data");
}

export function checkFeatures2d(f: FeatureMap2DView): void {
  expectArray(f.data, Float32Array, f.width * f.height * f.channels, "features.data");
}
