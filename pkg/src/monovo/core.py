"""Geometric value types and small-matrix helpers used throughout monovo.

Pose convention: a relative motion ``T_k`` maps coordinates expressed in
camera frame k-1 into camera frame k (``X_k = R @ X_{k-1} + t``). Global
poses are camera-to-world, accumulated as ``C_k = C_{k-1} @ inverse(T_k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import PointBehindCamera


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def inv_matrix(self) -> np.ndarray:
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])


class Point2(NamedTuple):
    u: float
    v: float


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class FeatureMatch:
    prev: Point2
    curr: Point2
    id: int


@dataclass(frozen=True)
class RansacConfig:
    """Hyperparameters shared by every RANSAC loop in the package."""

    max_iterations: int = 2000
    threshold: float = 1.0
    seed: int = 0
    confidence: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def rng(self, iteration: int) -> np.random.Generator:
        """Independent stream for one RANSAC iteration."""
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, iteration])


def ransac_iterations_needed(inlier_ratio: float, sample_size: int, confidence: float) -> float:
    """Standard adaptive stopping bound: log(1-p) / log(1-w^s)."""
    if inlier_ratio <= 0.0:
        return np.inf
    good = inlier_ratio ** sample_size
    if good >= 1.0:
        return 0.0
    denom = np.log1p(-good)
    if denom == 0.0:
        return np.inf
    return np.log1p(-confidence) / denom


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) (nearest rotation in Frobenius norm)."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=np.float64))
    d = np.sign(np.linalg.det(u @ vt))
    if d == 0:
        d = 1.0
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = _frozen(self.rotation)
        t = _frozen(self.translation).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return (
            np.all(np.abs(r.T @ r - np.eye(3)) <= tol)
            and abs(np.linalg.det(r) - 1.0) <= tol
            and np.all(np.isfinite(self.translation))
        )

    def orthonormalized(self) -> "Pose":
        return Pose(orthonormalize(self.rotation), self.translation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the pose to (3,) or (N, 3) points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def __repr__(self):
        return f"Pose(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rt, -rt @ p.translation)


def skew(t) -> np.ndarray:
    tx, ty, tz = np.asarray(t, dtype=np.float64).reshape(3)
    return np.array([[0.0, -tz, ty], [tz, 0.0, -tx], [-ty, tx, 0.0]])


def normalize(pt, k: CameraIntrinsics) -> np.ndarray:
    """Pixel coordinates (..., 2) to homogeneous normalized coordinates (..., 3)."""
    p = np.asarray(pt, dtype=np.float64)
    out = np.ones(p.shape[:-1] + (3,))
    out[..., 0] = (p[..., 0] - k.cx) / k.fx
    out[..., 1] = (p[..., 1] - k.cy) / k.fy
    return out


def project(p, pose: Pose, k: CameraIntrinsics) -> np.ndarray:
    """Perspective projection of (3,) or (N, 3) points through ``pose``.

    Raises PointBehindCamera if any transformed depth is not positive.
    """
    pc = pose.transform(p)
    z = pc[..., 2]
    if np.any(z <= 0):
        raise PointBehindCamera(f"transformed depth {np.min(z):g} <= 0")
    u = k.fx * pc[..., 0] / z + k.cx
    v = k.fy * pc[..., 1] / z + k.cy
    return np.stack([u, v], axis=-1)


def so3_exp(omega) -> np.ndarray:
    """Rodrigues formula for a rotation vector."""
    w = np.asarray(omega, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(w)
    wx = skew(w)
    if theta < 1e-8:
        return np.eye(3) + wx + 0.5 * wx @ wx
    return (
        np.eye(3)
        + np.sin(theta) / theta * wx
        + (1.0 - np.cos(theta)) / theta**2 * wx @ wx
    )


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle (radians) of a rotation matrix.

    Uses atan2 of the sine (from the skew part) and cosine (from the trace)
    rather than a clamped arccos, which loses about 1e-8 rad near identity.
    """
    r = np.asarray(r, dtype=np.float64)
    c = (np.trace(r) - 1.0) / 2.0
    s = 0.5 * np.sqrt((r[2, 1] - r[1, 2]) ** 2 + (r[0, 2] - r[2, 0]) ** 2 + (r[1, 0] - r[0, 1]) ** 2)
    return float(np.arctan2(s, c))


def angle_between(a, b) -> float:
    """Angle in radians between two 3-vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def match_arrays(matches: Sequence[FeatureMatch]) -> tuple[np.ndarray, np.ndarray]:
    """Split a list of FeatureMatch into (N, 2) previous and current pixel arrays."""
    if len(matches) == 0:
        return np.zeros((0, 2)), np.zeros((0, 2))
    prev = np.array([m.prev for m in matches], dtype=np.float64)
    curr = np.array([m.curr for m in matches], dtype=np.float64)
    return prev, curr


def matches_from_arrays(prev, curr, ids=None) -> list[FeatureMatch]:
    prev = np.asarray(prev, dtype=np.float64)
    curr = np.asarray(curr, dtype=np.float64)
    if ids is None:
        ids = range(len(prev))
    return [
        FeatureMatch(Point2(float(a[0]), float(a[1])), Point2(float(b[0]), float(b[1])), int(i))
        for a, b, i in zip(prev, curr, ids)
    ]
