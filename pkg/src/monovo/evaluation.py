"""KITTI odometry metrics (t_err, r_err, ATE, RPE) and Umeyama alignment."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .core import Pose, compose, inverse, orthonormalize, rotation_angle
from .dataio import Trajectory
from .errors import DegenerateTrajectory, LengthMismatch, TooShort

SEGMENT_LENGTHS = tuple(range(100, 801, 100))


class AlignMode(str, Enum):
    NONE = "none"
    RIGID_6DOF = "6dof"
    SIMILARITY_7DOF = "7dof"


@dataclass(frozen=True)
class MetricsReport:
    t_err: float  # percent
    r_err: float  # deg / 100 m
    ate: float  # m
    rpe_t: float  # m
    rpe_r: float  # deg

    def as_dict(self) -> dict:
        return asdict(self)


def _check_lengths(est: Trajectory, gt: Trajectory):
    if len(est) != len(gt):
        raise LengthMismatch(f"estimate has {len(est)} poses, ground truth {len(gt)}")


def umeyama(src: np.ndarray, dst: np.ndarray, with_scale: bool = True):
    """Least-squares ``(s, R, t)`` with ``dst ~ s R src + t`` for (N, 3) arrays."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    var_s = np.mean(np.sum(xs * xs, axis=1))
    if var_s < 1e-18:
        raise DegenerateTrajectory("all positions coincide")
    cov = xd.T @ xs / len(src)
    u, d, vt = np.linalg.svd(cov)
    sgn = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sgn[2, 2] = -1.0
    r = u @ sgn @ vt
    s = float(np.trace(np.diag(d) @ sgn) / var_s) if with_scale else 1.0
    t = mu_d - s * r @ mu_s
    return s, r, t


def align_transform(est: Trajectory, gt: Trajectory, mode) -> tuple[float, np.ndarray, np.ndarray]:
    mode = AlignMode(mode)
    _check_lengths(est, gt)
    if mode is AlignMode.NONE:
        return 1.0, np.eye(3), np.zeros(3)
    if len(est) < 3:
        raise ValueError("alignment needs at least 3 poses")
    if list(est.frames) != list(gt.frames):
        raise ValueError("frame indices differ between trajectories")
    return umeyama(est.positions(), gt.positions(), mode is AlignMode.SIMILARITY_7DOF)


def umeyama_align(est: Trajectory, gt: Trajectory, mode) -> Trajectory:
    """Apply the ``mode`` alignment of ``est`` onto ``gt`` to every estimated pose."""
    mode = AlignMode(mode)
    if mode is AlignMode.NONE:
        _check_lengths(est, gt)
        return est
    s, r, t = align_transform(est, gt, mode)
    poses = [Pose(orthonormalize(r @ p.rotation), s * r @ p.translation + t) for p in est.poses]
    return Trajectory(list(est.frames), poses)


def ate(est: Trajectory, gt: Trajectory) -> float:
    _check_lengths(est, gt)
    d = est.positions() - gt.positions()
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))


def relative_errors(est: Trajectory, gt: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per consecutive pair: translation error norm (m) and rotation error (deg)."""
    _check_lengths(est, gt)
    if len(est) < 2:
        raise ValueError("RPE needs at least 2 poses")
    te, re = [], []
    for i in range(len(est) - 1):
        gt_rel = compose(inverse(gt.poses[i]), gt.poses[i + 1])
        est_rel = compose(inverse(est.poses[i]), est.poses[i + 1])
        delta = compose(inverse(gt_rel), est_rel)
        te.append(np.linalg.norm(delta.translation))
        re.append(np.degrees(rotation_angle(delta.rotation)))
    return np.array(te), np.array(re)


def rpe(est: Trajectory, gt: Trajectory) -> tuple[float, float]:
    te, re = relative_errors(est, gt)
    return float(np.mean(te)), float(np.mean(re))


def trajectory_distances(traj: Trajectory) -> np.ndarray:
    pos = traj.positions()
    steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def segment_errors(est: Trajectory, gt: Trajectory, lengths=SEGMENT_LENGTHS):
    """Every (start, L) subsequence error as rows ``(start, L, t_err_ratio, r_err_deg_per_m)``."""
    _check_lengths(est, gt)
    dist = trajectory_distances(gt)
    gm = gt.matrices()
    em = est.matrices()
    gm_inv = np.linalg.inv(gm)
    em_inv = np.linalg.inv(em)
    rows = []
    n = len(gt)
    for start in range(n):
        for length in lengths:
            ends = np.nonzero(dist[start:] - dist[start] >= length)[0]
            if len(ends) == 0:
                continue
            end = start + int(ends[0])
            d_gt = gm_inv[start] @ gm[end]
            d_est = em_inv[start] @ em[end]
            err = np.linalg.inv(d_est) @ d_gt
            t = np.linalg.norm(err[:3, 3])
            ang = np.degrees(rotation_angle(err[:3, :3]))
            rows.append((start, length, t / length, ang / length))
    return rows


def kitti_seg_errors(est: Trajectory, gt: Trajectory) -> tuple[float, float]:
    """Mean translational error (%) and rotational error (deg/100 m) over all
    subsequences of 100..800 m."""
    rows = segment_errors(est, gt)
    if not rows:
        raise TooShort("ground-truth path is shorter than the shortest segment (100 m)")
    arr = np.array(rows)
    return float(np.mean(arr[:, 2]) * 100.0), float(np.mean(arr[:, 3]) * 100.0)


def evaluate(est: Trajectory, gt: Trajectory, align="none") -> MetricsReport:
    """All four metrics after aligning ``est`` to ``gt``.

    Trajectories too short for a 100 m segment report NaN for t_err/r_err.
    """
    aligned = umeyama_align(est, gt, align)
    try:
        t_err, r_err = kitti_seg_errors(aligned, gt)
    except TooShort:
        t_err = r_err = float("nan")
    rpe_t, rpe_r = rpe(aligned, gt)
    return MetricsReport(t_err, r_err, ate(aligned, gt), rpe_t, rpe_r)
