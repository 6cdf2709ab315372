"""KITTI-layout readers/writers plus PGM and PFM codecs.

Layout::

    <root>/sequences/<NN>/image_0/<XXXXXX>.pgm
    <root>/sequences/<NN>/calib.txt
    <root>/poses/<NN>.txt
    <depth_root>/<NN>/<XXXXXX>.pfm
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CameraIntrinsics, Pose, orthonormalize
from .errors import ParseError


@dataclass(frozen=True, eq=False)
class GrayImage:
    data: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        a = np.ascontiguousarray(self.data, dtype=np.uint8)
        if a.ndim != 2:
            raise ValueError("GrayImage data must be 2-D")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Dense metric depth; values <= 0 mark invalid pixels."""

    data: np.ndarray  # (height, width) float64

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("DepthMap data must be 2-D")
        a[~np.isfinite(a)] = 0.0
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def scaled(self, factor: float) -> "DepthMap":
        return DepthMap(self.data * factor)

    def sample_nearest(self, pts: np.ndarray) -> np.ndarray:
        """Depth at the nearest pixel of each (u, v); 0 outside the map."""
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        col = np.floor(pts[:, 0] + 0.5).astype(np.int64)
        row = np.floor(pts[:, 1] + 0.5).astype(np.int64)
        inside = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        out = np.zeros(len(pts))
        out[inside] = self.data[row[inside], col[inside]]
        return out

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass
class Trajectory:
    frames: list = field(default_factory=list)
    poses: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) != len(self.poses):
            raise ValueError("frames and poses differ in length")
        if any(b <= a for a, b in zip(self.frames, self.frames[1:])):
            raise ValueError("frame indices must be strictly increasing")

    @classmethod
    def from_poses(cls, poses) -> "Trajectory":
        poses = list(poses)
        return cls(list(range(len(poses))), poses)

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(zip(self.frames, self.poses))

    def append(self, frame: int, pose: Pose):
        if self.frames and frame <= self.frames[-1]:
            raise ValueError("frame indices must be strictly increasing")
        self.frames.append(frame)
        self.poses.append(pose)

    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.zeros((0, 3))
        return np.array([p.translation for p in self.poses])

    def matrices(self) -> np.ndarray:
        return np.array([p.matrix for p in self.poses])

    def path_length(self) -> float:
        pos = self.positions()
        if len(pos) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))


# --- calibration -----------------------------------------------------------

def load_kitti_calib(path) -> CameraIntrinsics:
    text = Path(path).read_text()
    for line in text.splitlines():
        if line.startswith("P0:"):
            fields = line[3:].split()
            if len(fields) != 12:
                raise ParseError(f"{path}: P0 has {len(fields)} values, expected 12")
            try:
                p = np.array([float(f) for f in fields]).reshape(3, 4)
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}") from None
            return CameraIntrinsics(fx=p[0, 0], fy=p[1, 1], cx=p[0, 2], cy=p[1, 2])
    raise ParseError(f"{path}: no P0 line")


def write_kitti_calib(k: CameraIntrinsics, path):
    p = np.zeros((3, 4))
    p[:, :3] = k.matrix
    line = " ".join(f"{v:.12e}" for v in p.ravel())
    Path(path).write_text("".join(f"P{i}: {line}\n" for i in range(4)))


# --- PGM -------------------------------------------------------------------

def _read_header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping '#' comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last token.
    """
    tokens = []
    i = 0
    n = len(buf)
    while len(tokens) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i:i + 1].isspace() and buf[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise ParseError("truncated header")
        tokens.append(buf[start:i])
    return tokens, i


def decode_pgm(buf: bytes) -> GrayImage:
    tokens, end = _read_header_tokens(buf, 4)
    if tokens[0] != b"P5":
        raise ParseError(f"unsupported PGM magic {tokens[0]!r} (only binary P5)")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("non-integer PGM header field") from None
    if w <= 0 or h <= 0:
        raise ParseError("PGM dimensions must be positive")
    if not 0 < maxval <= 255:
        raise ParseError(f"unsupported PGM maxval {maxval}")
    start = end + 1
    data = buf[start:start + w * h]
    if len(data) != w * h:
        raise ParseError(f"PGM payload has {len(data)} bytes, expected {w * h}")
    return GrayImage(np.frombuffer(data, dtype=np.uint8).reshape(h, w))


def encode_pgm(img) -> bytes:
    a = np.ascontiguousarray(np.asarray(img), dtype=np.uint8)
    h, w = a.shape
    return f"P5\n{w} {h}\n255\n".encode() + a.tobytes()


def load_pgm(path) -> GrayImage:
    try:
        return decode_pgm(Path(path).read_bytes())
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_png(path) -> GrayImage:
    """8-bit grayscale PNG (the format KITTI ships). Needs Pillow."""
    try:
        from PIL import Image
    except ImportError:
        raise ParseError(f"{path}: reading PNG frames needs Pillow (pip install pillow)") from None
    with Image.open(path) as im:
        if im.mode not in ("L", "P", "RGB", "RGBA", "I;16", "I"):
            raise ParseError(f"{path}: unsupported PNG mode {im.mode}")
        return GrayImage(np.asarray(im.convert("L"), dtype=np.uint8))


def write_pgm(img, path):
    Path(path).write_bytes(encode_pgm(img))


# --- PFM -------------------------------------------------------------------

def decode_pfm(buf: bytes) -> DepthMap:
    tokens, end = _read_header_tokens(buf, 4)
    if tokens[0] != b"Pf":
        raise ParseError(f"unsupported PFM magic {tokens[0]!r} (only grayscale Pf)")
    try:
        w, h = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError:
        raise ParseError("malformed PFM header") from None
    if w <= 0 or h <= 0 or scale == 0.0:
        raise ParseError("invalid PFM dimensions or scale")
    dtype = "<f4" if scale < 0 else ">f4"
    start = end + 1
    nbytes = 4 * w * h
    payload = buf[start:start + nbytes]
    if len(payload) != nbytes:
        raise ParseError(f"PFM payload has {len(payload)} bytes, expected {nbytes}")
    rows = np.frombuffer(payload, dtype=dtype).reshape(h, w)
    return DepthMap(rows[::-1].astype(np.float64))


def encode_pfm(depth, little_endian: bool = True) -> bytes:
    a = np.asarray(depth, dtype=np.float32)
    h, w = a.shape
    scale = -1.0 if little_endian else 1.0
    dtype = "<f4" if little_endian else ">f4"
    header = f"Pf\n{w} {h}\n{scale}\n".encode()
    return header + np.ascontiguousarray(a[::-1]).astype(dtype).tobytes()


def load_pfm(path) -> DepthMap:
    try:
        return decode_pfm(Path(path).read_bytes())
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_pfm(depth, path):
    Path(path).write_bytes(encode_pfm(depth))


# --- poses -----------------------------------------------------------------

def format_kitti_pose(pose: Pose) -> str:
    m = np.hstack([pose.rotation, pose.translation[:, None]])
    return " ".join(f"{v:.12e}" for v in m.ravel())


def write_kitti_poses(traj: Trajectory, path):
    if len(traj) == 0:
        raise ValueError("cannot write an empty trajectory")
    lines = [format_kitti_pose(p) + "\n" for p in traj.poses]
    with open(path, "w", newline="\n") as fh:
        fh.writelines(lines)


def read_kitti_poses(path) -> Trajectory:
    poses = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 12:
                raise ParseError(f"{path}:{lineno}: expected 12 values, got {len(fields)}")
            try:
                m = np.array([float(f) for f in fields]).reshape(3, 4)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(m)):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            poses.append(Pose(orthonormalize(m[:, :3]), m[:, 3]))
    return Trajectory.from_poses(poses)


# --- sequences -------------------------------------------------------------

_FRAME_RE = re.compile(r"^(\d{6})\.(pgm|png)$")


@dataclass
class SequenceSource:
    image_dir: Path
    calib: CameraIntrinsics
    gt: Optional[Trajectory] = None
    depth_dir: Optional[Path] = None
    n_frames: int = 0
    image_ext: str = "pgm"

    def image_path(self, i: int) -> Path:
        return self.image_dir / f"{i:06d}.{self.image_ext}"

    def depth_path(self, i: int) -> Optional[Path]:
        if self.depth_dir is None:
            return None
        return self.depth_dir / f"{i:06d}.pfm"

    def image(self, i: int) -> GrayImage:
        if self.image_ext == "png":
            return load_png(self.image_path(i))
        return load_pgm(self.image_path(i))

    def depth(self, i: int) -> Optional[DepthMap]:
        """Depth map for frame ``i``, or None when depth is disabled or the file is missing."""
        p = self.depth_path(i)
        if p is None or not p.exists():
            return None
        return load_pfm(p)


def load_sequence(root, seq: str, depth_root=None) -> SequenceSource:
    root = Path(root)
    seq_dir = root / "sequences" / seq
    image_dir = seq_dir / "image_0"
    if not image_dir.is_dir():
        raise FileNotFoundError(f"image directory not found: {image_dir}")
    found = [m for m in map(_FRAME_RE.match, os.listdir(image_dir)) if m]
    exts = {m.group(2) for m in found}
    if not found:
        raise FileNotFoundError(f"no .pgm or .png frames in {image_dir}")
    if len(exts) > 1:
        raise ParseError(f"{image_dir}: mixes .pgm and .png frames")
    indices = sorted(int(m.group(1)) for m in found)
    if indices != list(range(len(indices))):
        raise ParseError(f"{image_dir}: frame files are not a contiguous sequence from 000000")
    calib = load_kitti_calib(seq_dir / "calib.txt")
    gt_path = root / "poses" / f"{seq}.txt"
    gt = read_kitti_poses(gt_path) if gt_path.exists() else None
    depth_dir = None
    if depth_root is not None:
        depth_dir = Path(depth_root) / seq
    return SequenceSource(image_dir, calib, gt, depth_dir, len(indices), exts.pop())
