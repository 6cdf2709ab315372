"""Seeded synthetic scenes with exact ground truth.

Three modes:

* ``general``  points spread through the view frustum 2-50 m ahead; the
  camera follows a forward arc.
* ``planar``   points on a wall 10 m ahead; the camera slides parallel to
  the wall (a forward arc would drive into it).
* ``rotation`` like ``general`` but with zero translation.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, FeatureMatch, Point2, Pose, compose, inverse
from .dataio import (
    DepthMap,
    GrayImage,
    Trajectory,
    write_kitti_calib,
    write_kitti_poses,
    write_pfm,
    write_pgm,
)

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 240
DEFAULT_INTRINSICS = CameraIntrinsics(fx=250.0, fy=250.0, cx=159.5, cy=119.5)
NEAR, FAR = 2.0, 50.0
WALL_DEPTH = 10.0
MIN_VISIBLE_DEPTH = 1.0
MARGIN = 4.0
SPLAT_RADIUS = 3.0
BLOB_SIGMA = 2.0


class SceneMode(str, Enum):
    GENERAL = "general"
    PLANAR = "planar"
    ROTATION = "rotation"


@dataclass
class SyntheticScene:
    points: np.ndarray  # (N, 3) world coordinates
    trajectory: Trajectory  # camera-to-world
    intrinsics: CameraIntrinsics
    mode: SceneMode
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    amplitude: np.ndarray = None  # per-point blob brightness
    plane: tuple = None  # (unit normal, offset) with normal . X = offset, planar mode only
    horizon: float = FAR  # points farther than this are not visible

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)

    def camera_points(self, frame: int) -> np.ndarray:
        """All scene points expressed in the camera frame of ``frame``."""
        return inverse(self.trajectory.poses[frame]).transform(self.points)

    def project(self, frame: int):
        """Pixel projections (N, 2), camera depths (N,), and visibility mask."""
        pc = self.camera_points(frame)
        z = pc[:, 2]
        k = self.intrinsics
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = np.column_stack([k.fx * pc[:, 0] / z + k.cx, k.fy * pc[:, 1] / z + k.cy])
        vis = (z >= MIN_VISIBLE_DEPTH) & (z <= self.horizon) & _in_bounds(uv, self.width, self.height)
        return uv, z, vis

    def relative_motion(self, frame: int) -> Pose:
        """T_k mapping camera ``frame-1`` coordinates into camera ``frame``."""
        c = self.trajectory.poses
        return compose(inverse(c[frame]), c[frame - 1])


def _in_bounds(uv, width, height, margin=MARGIN):
    return (
        (uv[:, 0] >= margin) & (uv[:, 0] <= width - 1 - margin)
        & (uv[:, 1] >= margin) & (uv[:, 1] <= height - 1 - margin)
    )


def _yaw(deg: float) -> np.ndarray:
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _build_trajectory(mode: SceneMode, n_frames: int, speed: float, yaw_rate: float) -> Trajectory:
    if mode is SceneMode.PLANAR:
        step = Pose(np.eye(3), [speed, 0.0, 0.0])
    elif mode is SceneMode.ROTATION:
        step = Pose(_yaw(yaw_rate), np.zeros(3))
    else:
        # chord of the arc: rotate by half the yaw, then move forward
        step = Pose(_yaw(yaw_rate), _yaw(yaw_rate / 2.0) @ np.array([0.0, 0.0, speed]))
    poses = [Pose.identity()]
    for _ in range(n_frames - 1):
        poses.append(compose(poses[-1], step))
    return Trajectory.from_poses(poses)


def _sample_frustum(rng, k, width, height, count, near, far):
    u = rng.uniform(MARGIN, width - 1 - MARGIN, count)
    v = rng.uniform(MARGIN, height - 1 - MARGIN, count)
    z = rng.uniform(near, far, count)
    return np.column_stack([(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z])


def _visible(pose: Pose, pts, k, width, height, far=FAR):
    pc = inverse(pose).transform(pts)
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = np.column_stack([k.fx * pc[:, 0] / z + k.cx, k.fy * pc[:, 1] / z + k.cy])
    return (z >= MIN_VISIBLE_DEPTH) & (z <= far) & _in_bounds(uv, width, height)


def _rejection_sample(draw, accept, count, tries: int = 1000):
    """Draw batches until ``count`` points pass ``accept(candidates, accepted)``."""
    accepted = np.zeros((0, 3))
    for _ in range(tries):
        if len(accepted) >= count:
            break
        cand = draw(max(2 * (count - len(accepted)), 16))
        cand = cand[accept(cand, accepted)]
        accepted = np.vstack([accepted, cand[: count - len(accepted)]])
    return accepted


def _project_all(pose: Pose, pts, k):
    pc = inverse(pose).transform(pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.column_stack([k.fx * pc[:, 0] / pc[:, 2] + k.cx, k.fy * pc[:, 1] / pc[:, 2] + k.cy])


def _spread_mask(uv_cand, uv_taken, sep: float) -> np.ndarray:
    """Greedy mask keeping candidates at least ``sep`` px from everything kept before."""
    keep = np.zeros(len(uv_cand), dtype=bool)
    taken = np.asarray(uv_taken, dtype=np.float64).reshape(-1, 2)
    sep2 = sep * sep
    for i, q in enumerate(uv_cand):
        if not len(taken) or np.min(np.sum((taken - q) ** 2, axis=1)) >= sep2:
            keep[i] = True
            taken = np.vstack([taken, q])
    return keep


def generate_scene(mode="general", n_points: int = 200, n_frames: int = 2, seed: int = 0, *,
                   speed: float = 1.0, yaw_rate: float = 0.5, depth_range=(NEAR, FAR),
                   intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
                   width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
                   min_separation: float = 0.0) -> SyntheticScene:
    """Build a deterministic scene.

    ``n_points`` points are placed so that every one of them is visible in
    cameras 0 and 1. Points farther than ``depth_range[1]`` are treated as
    beyond the visibility horizon. For longer sequences each frame tops the
    co-visible set back up to ``n_points`` with points entering at the
    horizon (general, rotation) or along the wall (planar).

    ``min_separation`` (pixels) rejects new points whose projection lands
    closer than that to an already visible point, in both frames they are
    drawn for. Dense blob clusters bias the tracker, so this keeps rendered
    features apart; the top-up may then fall short of ``n_points``.
    """
    mode = SceneMode(mode)
    if n_points < 50:
        raise ValueError("n_points must be >= 50")
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    near, far = map(float, depth_range)
    if not 0 < near < far:
        raise ValueError("depth_range must satisfy 0 < near < far")
    if mode is SceneMode.PLANAR:
        far = max(far, 2.0 * WALL_DEPTH)
    rng = np.random.default_rng(seed)
    traj = _build_trajectory(mode, n_frames, speed, yaw_rate)
    k = intrinsics
    poses = traj.poses

    def seen_by(f):
        def accept(p, accepted=None):
            ok = (_visible(poses[f], p, k, width, height, far)
                  & _visible(poses[f + 1], p, k, width, height, far))
            if min_separation <= 0 or accepted is None or not ok.any():
                return ok
            idx = np.nonzero(ok)[0]
            for g in (f, f + 1):
                taken = np.vstack([points[_visible(poses[g], points, k, width, height, far)]
                                   if len(points) else np.zeros((0, 3)), accepted])
                keep = _spread_mask(_project_all(poses[g], p[idx], k),
                                    _project_all(poses[g], taken, k), min_separation)
                idx = idx[keep]
            out = np.zeros(len(p), dtype=bool)
            out[idx] = True
            return out
        return accept

    if mode is SceneMode.PLANAR:
        lo, hi = WALL_DEPTH, WALL_DEPTH
        slab_lo = WALL_DEPTH
    elif mode is SceneMode.ROTATION:
        lo, hi = near, far
        slab_lo = near
    else:
        lo, hi = near, far
        slab_lo = max(near, far - max(speed, 0.0) * 2.0)

    points = np.zeros((0, 3))
    for f in range(n_frames - 1):
        have = int(np.count_nonzero(seen_by(f)(points))) if len(points) else 0
        count = n_points - have
        if count <= 0:
            continue
        a, b = (lo, hi) if f == 0 else (slab_lo, hi)

        def draw(m, f=f, a=a, b=b):
            return poses[f].transform(_sample_frustum(rng, k, width, height, m, a, b))

        points = np.vstack([points, _rejection_sample(draw, seen_by(f), count)])
    plane = (np.array([0.0, 0.0, 1.0]), WALL_DEPTH) if mode is SceneMode.PLANAR else None
    amplitude = rng.uniform(150.0, 255.0, len(points))
    return SyntheticScene(points, traj, k, mode, width, height, amplitude, plane, far)


def exact_matches(scene: SyntheticScene, frame_a: int, frame_b: int, *, noise: float = 0.0,
                  outlier_fraction: float = 0.0, seed: int = 0) -> list[FeatureMatch]:
    """Projections of points visible in both frames, ids are point indices.

    Gaussian pixel noise (std ``noise``) is added to both endpoints;
    ``floor(outlier_fraction * n)`` matches get a uniformly random current
    position.
    """
    uva, _, va = scene.project(frame_a)
    uvb, _, vb = scene.project(frame_b)
    idx = np.nonzero(va & vb)[0]
    pa, pb = uva[idx].copy(), uvb[idx].copy()
    rng = np.random.default_rng(seed)
    if noise > 0:
        pa += rng.normal(0.0, noise, pa.shape)
        pb += rng.normal(0.0, noise, pb.shape)
    n_out = int(np.floor(outlier_fraction * len(idx)))
    if n_out:
        which = rng.choice(len(idx), n_out, replace=False)
        pb[which, 0] = rng.uniform(0, scene.width - 1, n_out)
        pb[which, 1] = rng.uniform(0, scene.height - 1, n_out)
    return [
        FeatureMatch(Point2(*map(float, a)), Point2(*map(float, b)), int(i))
        for a, b, i in zip(pa, pb, idx)
    ]


def outlier_ids(scene: SyntheticScene, matches, frame_b: int, tol: float = 1e-9) -> set:
    """Ids whose current endpoint does not match the true projection."""
    uvb, _, _ = scene.project(frame_b)
    return {m.id for m in matches if np.hypot(*(np.array(m.curr) - uvb[m.id])) > tol}


def exact_depth_map(scene: SyntheticScene, frame: int) -> DepthMap:
    """Splat each visible point's camera depth on a 3 px disc (nearest wins)."""
    uv, z, vis = scene.project(frame)
    depth = np.full((scene.height, scene.width), np.inf)
    r = int(np.ceil(SPLAT_RADIUS))
    for (u, v), d in zip(uv[vis], z[vis]):
        c0, r0 = int(np.floor(u + 0.5)), int(np.floor(v + 0.5))
        rows = np.arange(max(r0 - r, 0), min(r0 + r + 1, scene.height))
        cols = np.arange(max(c0 - r, 0), min(c0 + r + 1, scene.width))
        if not len(rows) or not len(cols):
            continue
        cc, rr = np.meshgrid(cols, rows)
        disc = (cc - u) ** 2 + (rr - v) ** 2 <= SPLAT_RADIUS ** 2
        # the nearest pixel always belongs to its own point's splat
        disc[(rr == r0) & (cc == c0)] = True
        block = depth[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        block[disc] = np.minimum(block[disc], d)
    depth[~np.isfinite(depth)] = 0.0
    return DepthMap(depth)


def _ray_plane(scene: SyntheticScene, frame: int, cols, rows):
    """World intersection of pixel rays with the scene plane; NaN if missed."""
    k = scene.intrinsics
    pose = scene.trajectory.poses[frame]
    d = np.stack([(cols - k.cx) / k.fx, (rows - k.cy) / k.fy, np.ones_like(cols, dtype=np.float64)], -1)
    dw = d @ pose.rotation.T
    n, off = scene.plane
    denom = dw @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (off - pose.translation @ n) / denom
    hit = pose.translation + s[..., None] * dw
    hit[~(s > 0)] = np.nan
    return hit


def render_texture_frame(scene: SyntheticScene, frame: int) -> GrayImage:
    """Black background with a Gaussian blob per visible point.

    Planar scenes paint the blobs onto the wall (so neighbouring frames are
    related by the plane homography); other modes splat fixed-size blobs at
    the projections.
    """
    uv, z, _ = scene.project(frame)
    k = scene.intrinsics
    in_front = (z > 0) & (z <= scene.horizon)
    with np.errstate(invalid="ignore"):
        near_img = (
            in_front
            & (uv[:, 0] > -6) & (uv[:, 0] < scene.width + 5)
            & (uv[:, 1] > -6) & (uv[:, 1] < scene.height + 5)
        )
    img = np.zeros((scene.height, scene.width))
    r = 5
    sigma_wall = BLOB_SIGMA * WALL_DEPTH / k.fx
    for i in np.nonzero(near_img)[0]:
        u, v = uv[i]
        c0, r0 = int(np.floor(u + 0.5)), int(np.floor(v + 0.5))
        rows = np.arange(max(r0 - r, 0), min(r0 + r + 1, scene.height))
        cols = np.arange(max(c0 - r, 0), min(c0 + r + 1, scene.width))
        if not len(rows) or not len(cols):
            continue
        cc, rr = np.meshgrid(cols.astype(np.float64), rows.astype(np.float64))
        if scene.mode is SceneMode.PLANAR:
            hit = _ray_plane(scene, frame, cc, rr)
            d2 = np.sum((hit - scene.points[i]) ** 2, axis=-1) / sigma_wall ** 2
            d2 = np.nan_to_num(d2, nan=np.inf)
        else:
            d2 = ((cc - u) ** 2 + (rr - v) ** 2) / BLOB_SIGMA ** 2
        img[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1] += scene.amplitude[i] * np.exp(-0.5 * d2)
    return GrayImage(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))


def export_kitti(scene: SyntheticScene, root, seq: str = "00", depth_root=None) -> dict:
    """Write the scene in KITTI odometry layout (PGM images, calib, poses, PFM depth).

    Returns the written directory paths.
    """
    root = Path(root)
    seq_dir = root / "sequences" / seq
    img_dir = seq_dir / "image_0"
    img_dir.mkdir(parents=True, exist_ok=True)
    (root / "poses").mkdir(parents=True, exist_ok=True)
    depth_dir = Path(depth_root if depth_root is not None else root / "depth") / seq
    depth_dir.mkdir(parents=True, exist_ok=True)
    write_kitti_calib(scene.intrinsics, seq_dir / "calib.txt")
    write_kitti_poses(scene.trajectory, root / "poses" / f"{seq}.txt")
    for f in range(scene.n_frames):
        write_pgm(render_texture_frame(scene, f), img_dir / f"{f:06d}.pgm")
        write_pfm(exact_depth_map(scene, f), depth_dir / f"{f:06d}.pfm")
    return {"images": img_dir, "depth": depth_dir, "poses": root / "poses" / f"{seq}.txt"}
