"""Readers and writers for every on-disk format.

Binary containers (BPV voxel grids, BPL link matrices, BPF tensors) are
little-endian with 4-byte ASCII magics; PGM samples are big-endian per that
format's own specification -- the mix is deliberate and a classic bug
source, so each reader/writer states its endianness explicitly.  Every
reader validates magic, version, and size arithmetic against the actual
byte count before allocating anything, so truncated or corrupt files fail
with a diagnostic instead of a partial object or a crash.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Intrinsics, Pose
from .linker import DepthMap, LinkMatrix
from .synth import Box, BoxScene
from .voxelgrid import PointCloud, SparseVoxelGrid

__all__ = [
    "read_ply", "write_ply",
    "read_pgm16", "write_pgm16",
    "read_label_image", "write_label_image",
    "read_bpv", "write_bpv",
    "read_bpl", "write_bpl",
    "read_bpf", "write_bpf",
    "read_intrinsics", "write_intrinsics",
    "read_pose", "write_pose",
    "read_manifest", "write_manifest", "ManifestEntry",
    "read_scene", "write_scene",
]

BPV_MAGIC = b"BPV1"
BPL_MAGIC = b"BPL1"
BPF_MAGIC = b"BPF1"

# Millimeter quantization keeps 16-bit depth usable to 65.535 m.
_MM_PER_M = 1000.0
_BPF_MAX_DIMS = 8


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise ParseError(f"no such file: {path}") from None
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise ParseError(f"no such file: {path}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise ParseError(f"cannot read {path}: {e}") from None


class _Cursor:
    """Bounds-checked sequential reader over a byte buffer."""

    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.off + n > len(self.buf):
            raise ParseError(
                f"{self.path}: truncated file, need {n} bytes for {what} "
                f"at offset {self.off} but only {len(self.buf) - self.off} remain"
            )
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def remaining(self) -> int:
        return len(self.buf) - self.off

    def expect_end(self):
        if self.off != len(self.buf):
            raise ParseError(f"{self.path}: {len(self.buf) - self.off} bytes of trailing data")


def _check_magic_version(cur: _Cursor, magic: bytes):
    got = cur.take(4, "magic")
    if got != magic:
        raise ParseError(f"{cur.path}: bad magic {got!r}, expected {magic!r}")
    (version,) = cur.unpack("<I", "version")
    if version != 1:
        raise ParseError(f"{cur.path}: unsupported version {version}")


# ---------------------------------------------------------------------------
# PLY point clouds (ASCII)
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "float": "f", "float32": "f",
    "double": "d", "float64": "d",
    "uchar": "u1", "uint8": "u1",
    "char": "i1", "int8": "i1",
    "ushort": "u2", "uint16": "u2",
    "short": "i2", "int16": "i2",
    "uint": "u4", "uint32": "u4",
    "int": "i4", "int32": "i4",
}


def read_ply(path) -> PointCloud:
    """Parse an ASCII PLY file with x/y/z, red/green/blue, optional label.

    Unknown scalar vertex properties are skipped with a warning; anything
    structurally wrong (bad header, list properties, count mismatch) raises
    ParseError naming the offending line.
    """
    lines = _read_text(path).splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}:1: not a PLY file (missing 'ply' magic)")

    vertex_count = None
    props = []  # (name, type) in declaration order
    in_vertex = False
    body_start = None
    lineno = 1
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("comment"):
            continue
        tok = line.split()
        if tok[0] == "format":
            if tok[1:] != ["ascii", "1.0"]:
                raise ParseError(f"{path}:{lineno}: only 'format ascii 1.0' is supported")
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(f"{path}:{lineno}: malformed element declaration")
            try:
                count = int(tok[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad element count {tok[2]!r}") from None
            if tok[1] == "vertex":
                if count < 0:
                    raise ParseError(f"{path}:{lineno}: negative vertex count")
                vertex_count = count
                in_vertex = True
            else:
                if count != 0:
                    raise ParseError(
                        f"{path}:{lineno}: unsupported element '{tok[1]}' with nonzero count"
                    )
                in_vertex = False
        elif tok[0] == "property":
            if not in_vertex:
                continue
            if len(tok) >= 2 and tok[1] == "list":
                raise ParseError(f"{path}:{lineno}: list properties are not supported on vertices")
            if len(tok) != 3:
                raise ParseError(f"{path}:{lineno}: malformed property declaration")
            if tok[1] not in _PLY_TYPES:
                raise ParseError(f"{path}:{lineno}: unknown property type {tok[1]!r}")
            props.append((tok[2], tok[1]))
        elif tok[0] == "end_header":
            body_start = lineno
            break
        else:
            raise ParseError(f"{path}:{lineno}: unexpected header line {tok[0]!r}")
    if body_start is None:
        raise ParseError(f"{path}: header never ends (missing end_header)")
    if vertex_count is None:
        raise ParseError(f"{path}: no vertex element declared")

    names = [p[0] for p in props]
    for required in ("x", "y", "z", "red", "green", "blue"):
        if required not in names:
            raise ParseError(f"{path}: missing required vertex property '{required}'")
    known = {"x", "y", "z", "red", "green", "blue", "label"}
    unknown = [n for n in names if n not in known]
    if unknown:
        warnings.warn(f"{path}: ignoring unknown vertex properties {unknown}")

    body = [l for l in (raw.strip() for raw in lines[body_start:]) if l]
    if len(body) != vertex_count:
        raise ParseError(
            f"{path}: header declares {vertex_count} vertices but body has {len(body)} rows"
        )

    col = {name: i for i, (name, _) in enumerate(props)}
    pos = np.empty((vertex_count, 3), dtype=np.float64)
    rgb = np.empty((vertex_count, 3), dtype=np.float64)
    lab = np.empty(vertex_count, dtype=np.uint16) if "label" in col else None
    for i, line in enumerate(body):
        tok = line.split()
        if len(tok) != len(props):
            raise ParseError(
                f"{path}:{body_start + 1 + i}: expected {len(props)} values, got {len(tok)}"
            )
        try:
            x = np.float32(tok[col["x"]])
            y = np.float32(tok[col["y"]])
            z = np.float32(tok[col["z"]])
            r, g, b = (int(tok[col[c]]) for c in ("red", "green", "blue"))
            if lab is not None:
                label = int(tok[col["label"]])
        except ValueError:
            raise ParseError(f"{path}:{body_start + 1 + i}: malformed vertex value") from None
        if not (0 <= r <= 255 and 0 <= g <= 255 and 0 <= b <= 255):
            raise ParseError(f"{path}:{body_start + 1 + i}: color component out of [0, 255]")
        pos[i] = (x, y, z)
        rgb[i] = (r / 255.0, g / 255.0, b / 255.0)
        if lab is not None:
            if not 0 <= label <= 65535:
                raise ParseError(f"{path}:{body_start + 1 + i}: label out of u16 range")
            lab[i] = label
    try:
        return PointCloud(pos, rgb, lab)
    except ValidationError as e:
        raise ParseError(f"{path}: {e}") from None


def _fmt_f32(v) -> str:
    # Shortest decimal that round-trips the float32 value.
    return np.format_float_positional(np.float32(v), unique=True, trim="0")


def write_ply(path, cloud: PointCloud):
    """Write an ASCII PLY file; positions are stored at float32 precision."""
    has_labels = cloud.labels is not None
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if has_labels:
        lines.append("property ushort label")
    lines.append("end_header")
    rgb = np.clip(np.round(cloud.colors * 255.0), 0, 255).astype(np.uint8)
    for i in range(len(cloud)):
        x, y, z = (_fmt_f32(c) for c in cloud.positions[i])
        row = f"{x} {y} {z} {rgb[i, 0]} {rgb[i, 1]} {rgb[i, 2]}"
        if has_labels:
            row += f" {cloud.labels[i]}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# PGM (binary P5, 16-bit big-endian samples)
# ---------------------------------------------------------------------------

def _read_pgm_u16(path) -> np.ndarray:
    buf = _read_bytes(path)
    # Token scan over the header: magic, width, height, maxval.  '#' starts
    # a comment running to end of line.
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(buf):
            raise ParseError(f"{path}: truncated PGM header")
        c = buf[i:i + 1]
        if c == b"#":
            j = buf.find(b"\n", i)
            i = len(buf) if j < 0 else j + 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(buf) and not buf[j:j + 1].isspace() and buf[j:j + 1] != b"#":
                j += 1
            tokens.append(buf[i:j])
            i = j
    if tokens[0] != b"P5":
        raise ParseError(f"{path}: bad PGM magic {tokens[0]!r}, expected b'P5'")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ParseError(f"{path}: non-numeric PGM header field") from None
    if width <= 0 or height <= 0:
        raise ParseError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval != 65535:
        raise ParseError(f"{path}: maxval must be 65535 for 16-bit samples, got {maxval}")
    if i >= len(buf) or not buf[i:i + 1].isspace():
        raise ParseError(f"{path}: missing whitespace after maxval")
    i += 1  # exactly one whitespace byte separates header from samples
    body = buf[i:]
    expected = width * height * 2
    if len(body) != expected:
        raise ParseError(f"{path}: PGM body has {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype=">u2").reshape(height, width).astype(np.uint16)


def _write_pgm_u16(path, values: np.ndarray):
    if values.ndim != 2:
        raise ValidationError(f"PGM payload must be 2-D, got shape {values.shape}")
    h, w = values.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + values.astype(">u2").tobytes())


def read_pgm16(path) -> DepthMap:
    """Read a 16-bit PGM depth map; samples are millimeters, 0 = invalid."""
    raw = _read_pgm_u16(path)
    return DepthMap((raw.astype(np.float64) / _MM_PER_M).astype(np.float32))


def write_pgm16(path, depth: DepthMap):
    """Write a depth map as 16-bit PGM in millimeters (clipped to 65.535 m)."""
    mm = np.round(depth.values.astype(np.float64) * _MM_PER_M)
    _write_pgm_u16(path, np.clip(mm, 0, 65535).astype(np.uint16))


def read_label_image(path) -> np.ndarray:
    """Read a 16-bit PGM label image (65535 = void)."""
    return _read_pgm_u16(path)


def write_label_image(path, labels: np.ndarray):
    """Write a uint16 label image as 16-bit PGM (65535 = void)."""
    _write_pgm_u16(path, np.asarray(labels, dtype=np.uint16))


# ---------------------------------------------------------------------------
# BPV sparse voxel grids
# ---------------------------------------------------------------------------

def read_bpv(path) -> SparseVoxelGrid:
    """Read a BPV1 sparse voxel grid (little-endian, packed)."""
    cur = _Cursor(_read_bytes(path), path)
    _check_magic_version(cur, BPV_MAGIC)
    voxel_size, ox, oy, oz, n, c, has_labels = cur.unpack("<dddd QIB", "header")
    if voxel_size <= 0 or not np.isfinite(voxel_size):
        raise ParseError(f"{path}: bad voxel size {voxel_size}")
    if has_labels not in (0, 1):
        raise ParseError(f"{path}: has_labels flag must be 0 or 1, got {has_labels}")
    expected = n * 3 * 4 + n * c * 4 + (n * 2 if has_labels else 0)
    if cur.remaining() != expected:
        raise ParseError(
            f"{path}: body has {cur.remaining()} bytes but n={n}, c={c}, "
            f"has_labels={has_labels} requires {expected}"
        )
    coords = np.frombuffer(cur.take(n * 12, "coords"), dtype="<i4").reshape(n, 3)
    feats = np.frombuffer(cur.take(n * c * 4, "features"), dtype="<f4").reshape(n, c)
    labels = None
    if has_labels:
        labels = np.frombuffer(cur.take(n * 2, "labels"), dtype="<u2")
    cur.expect_end()
    try:
        return SparseVoxelGrid(np.array([ox, oy, oz]), voxel_size, coords, feats, labels)
    except ValidationError as e:
        raise ParseError(f"{path}: {e}") from None


def write_bpv(path, grid: SparseVoxelGrid):
    """Write a sparse voxel grid as BPV1."""
    has_labels = grid.labels is not None
    parts = [
        BPV_MAGIC,
        struct.pack(
            "<IddddQIB", 1, grid.voxel_size,
            grid.origin[0], grid.origin[1], grid.origin[2],
            grid.n, grid.channels, 1 if has_labels else 0,
        ),
        grid.coords.astype("<i4").tobytes(),
        grid.features.astype("<f4").tobytes(),
    ]
    if has_labels:
        parts.append(grid.labels.astype("<u2").tobytes())
    Path(path).write_bytes(b"".join(parts))


# ---------------------------------------------------------------------------
# BPL link matrices
# ---------------------------------------------------------------------------

_BPL_RECORD = np.dtype([("u", "<i4"), ("v", "<i4"), ("m", "u1")])  # 9 bytes, packed


def read_bpl(path) -> LinkMatrix:
    """Read a BPL1 link matrix."""
    cur = _Cursor(_read_bytes(path), path)
    _check_magic_version(cur, BPL_MAGIC)
    n, width, height = cur.unpack("<QII", "header")
    if width == 0 or height == 0:
        raise ParseError(f"{path}: bad link dimensions {width}x{height}")
    expected = n * _BPL_RECORD.itemsize
    if cur.remaining() != expected:
        raise ParseError(f"{path}: body has {cur.remaining()} bytes but n={n} requires {expected}")
    rec = np.frombuffer(cur.take(expected, "records"), dtype=_BPL_RECORD)
    cur.expect_end()
    if rec.size and not np.all((rec["m"] == 0) | (rec["m"] == 1)):
        raise ParseError(f"{path}: mask bytes must be 0 or 1")
    try:
        return LinkMatrix(rec["u"].copy(), rec["v"].copy(), rec["m"].copy(), width, height)
    except ValidationError as e:
        raise ParseError(f"{path}: {e}") from None


def write_bpl(path, link: LinkMatrix):
    """Write a link matrix as BPL1 (packed 9-byte records)."""
    rec = np.empty(link.n, dtype=_BPL_RECORD)
    rec["u"] = link.u
    rec["v"] = link.v
    rec["m"] = link.mask
    header = BPL_MAGIC + struct.pack("<IQII", 1, link.n, link.width, link.height)
    Path(path).write_bytes(header + rec.tobytes())


# ---------------------------------------------------------------------------
# BPF tensors
# ---------------------------------------------------------------------------

def read_bpf(path) -> np.ndarray:
    """Read a BPF1 float32 tensor (row-major)."""
    cur = _Cursor(_read_bytes(path), path)
    _check_magic_version(cur, BPF_MAGIC)
    (ndims,) = cur.unpack("<I", "ndims")
    if ndims == 0:
        raise ParseError(f"{path}: scalar tensors (ndims=0) are not supported")
    if ndims > _BPF_MAX_DIMS:
        raise ParseError(f"{path}: ndims={ndims} exceeds the limit of {_BPF_MAX_DIMS}")
    dims = cur.unpack("<" + "Q" * ndims, "dims")
    count = 1
    for d in dims:
        count *= d  # python ints: no overflow
    if cur.remaining() != count * 4:
        raise ParseError(
            f"{path}: dims {dims} require {count * 4} data bytes, found {cur.remaining()}"
        )
    data = np.frombuffer(cur.take(count * 4, "data"), dtype="<f4")
    cur.expect_end()
    return data.reshape(dims).copy()


def write_bpf(path, tensor: np.ndarray):
    """Write a float32 tensor as BPF1."""
    arr = np.asarray(tensor, dtype=np.float32)
    if arr.ndim == 0:
        raise ValidationError("BPF does not support scalars (ndims=0)")
    arr = np.ascontiguousarray(arr)
    if arr.ndim > _BPF_MAX_DIMS:
        raise ValidationError(f"BPF supports at most {_BPF_MAX_DIMS} dims, got {arr.ndim}")
    header = BPF_MAGIC + struct.pack("<II", 1, arr.ndim)
    header += struct.pack("<" + "Q" * arr.ndim, *arr.shape)
    Path(path).write_bytes(header + arr.astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# Intrinsics / pose text files
# ---------------------------------------------------------------------------

def _parse_reals(text: str, count: int, path) -> np.ndarray:
    tok = text.split()
    if len(tok) != count:
        raise ParseError(f"{path}: expected {count} numbers, found {len(tok)}")
    try:
        vals = np.array([float(t) for t in tok], dtype=np.float64)
    except ValueError:
        raise ParseError(f"{path}: non-numeric value in matrix file") from None
    if not np.all(np.isfinite(vals)):
        raise ParseError(f"{path}: matrix contains non-finite values")
    return vals


def read_intrinsics(path, width: int, height: int) -> Intrinsics:
    """Read a 3x3 calibration matrix (9 whitespace-separated reals).

    The file has no image size, so the caller supplies it (usually from the
    paired depth map).
    """
    k = _parse_reals(_read_text(path), 9, path).reshape(3, 3)
    if k[1, 0] != 0 or k[2, 0] != 0 or k[2, 1] != 0 or k[0, 1] != 0 or k[2, 2] != 1:
        raise ParseError(f"{path}: not an upper-triangular pinhole calibration matrix")
    try:
        return Intrinsics(fx=k[0, 0], fy=k[1, 1], cx=k[0, 2], cy=k[1, 2], width=width, height=height)
    except ValidationError as e:
        raise ParseError(f"{path}: {e}") from None


def write_intrinsics(path, intr: Intrinsics):
    k = intr.matrix
    rows = [" ".join(repr(float(x)) for x in row) for row in k]
    Path(path).write_text("\n".join(rows) + "\n")


def read_pose(path) -> Pose:
    """Read a 4x4 camera-to-world pose (16 whitespace-separated reals)."""
    m = _parse_reals(_read_text(path), 16, path).reshape(4, 4)
    return Pose.from_matrix(m)


def write_pose(path, pose: Pose):
    rows = [" ".join(repr(float(x)) for x in row) for row in pose.matrix4()]
    Path(path).write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Scene manifests
# ---------------------------------------------------------------------------

class ManifestEntry:
    """One manifest line: frame index plus color/depth/pose file paths."""

    __slots__ = ("frame_index", "color_path", "depth_path", "pose_path")

    def __init__(self, frame_index, color_path, depth_path, pose_path):
        self.frame_index = int(frame_index)
        self.color_path = str(color_path)
        self.depth_path = str(depth_path)
        self.pose_path = str(pose_path)

    def __eq__(self, other):
        return isinstance(other, ManifestEntry) and all(
            getattr(self, s) == getattr(other, s) for s in self.__slots__
        )

    def __repr__(self):
        return (f"ManifestEntry({self.frame_index}, {self.color_path!r}, "
                f"{self.depth_path!r}, {self.pose_path!r})")


def read_manifest(path):
    """Parse a scene manifest: returns (intrinsics_path, [ManifestEntry...])."""
    lines = [l for l in _read_text(path).splitlines() if l.strip() and not l.startswith("#")]
    if not lines:
        raise ParseError(f"{path}: empty manifest")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "intrinsics":
        raise ParseError(f"{path}:1: manifest must start with 'intrinsics <path>'")
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if len(tok) != 4:
            raise ParseError(f"{path}:{lineno}: expected '<frame> <color> <depth> <pose>'")
        try:
            frame = int(tok[0])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad frame index {tok[0]!r}") from None
        entries.append(ManifestEntry(frame, tok[1], tok[2], tok[3]))
    frames = [e.frame_index for e in entries]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ParseError(f"{path}: frame indices must be strictly increasing")
    return head[1], entries


def write_manifest(path, intrinsics_path, entries):
    lines = [f"intrinsics {intrinsics_path}"]
    for e in entries:
        lines.append(f"{e.frame_index} {e.color_path} {e.depth_path} {e.pose_path}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Box scene descriptions
# ---------------------------------------------------------------------------

def read_scene(path, density: float = 1000.0) -> BoxScene:
    """Parse a box scene description (one 'box ...' line per box)."""
    boxes = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if tok[0] != "box" or len(tok) != 11:
            raise ParseError(
                f"{path}:{lineno}: expected 'box xmin ymin zmin xmax ymax zmax r g b label'"
            )
        try:
            vals = [float(t) for t in tok[1:10]]
            label = int(tok[10])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed box values") from None
        try:
            boxes.append(Box(tuple(vals[0:3]), tuple(vals[3:6]), tuple(vals[6:9]), label))
        except ValidationError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from None
    if not boxes:
        raise ParseError(f"{path}: scene has no boxes")
    return BoxScene(boxes, density=density)


def write_scene(path, scene: BoxScene):
    lines = []
    for b in scene.boxes:
        nums = [*b.min_corner, *b.max_corner, *b.color]
        lines.append("box " + " ".join(repr(float(x)) for x in nums) + f" {b.label}")
    Path(path).write_text("\n".join(lines) + "\n")
