"""Frame-to-frame motion from 3D-2D correspondences by reprojection-error
minimization (Levenberg-Marquardt on a 6-parameter twist) inside RANSAC."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    CameraIntrinsics,
    Point2,
    Point3,
    Pose,
    RansacConfig,
    normalize,
    orthonormalize,
    ransac_iterations_needed,
    skew,
    so3_exp,
)
from .errors import InsufficientCorrespondences, InvalidDepth, NoConvergence

BEHIND_SENTINEL = 1e6
SAMPLE_SIZE = 6


class Correspondence3D2D(NamedTuple):
    point: Point3
    pixel: Point2


@dataclass(frozen=True)
class LMConfig:
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    max_iterations: int = 20
    step_tol: float = 1e-8


@dataclass
class PnpResult:
    motion: Pose
    inlier_mask: np.ndarray
    final_cost: float
    cost_history: list = field(default_factory=list)  # accepted-step costs of the final refit


def backproject(pixel, depth: float, k: CameraIntrinsics) -> Point3:
    if not depth > 0:
        raise InvalidDepth(f"depth must be positive, got {depth}")
    return Point3(*map(float, depth * normalize(pixel, k)))


def _arrays(corrs):
    if isinstance(corrs, tuple) and len(corrs) == 2:
        return np.asarray(corrs[0], dtype=np.float64), np.asarray(corrs[1], dtype=np.float64)
    pts = np.array([c.point for c in corrs], dtype=np.float64).reshape(-1, 3)
    pix = np.array([c.pixel for c in corrs], dtype=np.float64).reshape(-1, 2)
    return pts, pix


def reprojection_residuals(corrs, motion: Pose, k: CameraIntrinsics) -> np.ndarray:
    """Per-correspondence projected-minus-observed pixel offsets, shape (N, 2).

    Points that land behind the camera get a (1e6, 1e6) sentinel.
    """
    pts, pix = _arrays(corrs)
    pc = motion.transform(pts)
    z = pc[:, 2]
    front = z > 0
    out = np.full((len(pts), 2), BEHIND_SENTINEL)
    zf = z[front]
    out[front, 0] = k.fx * pc[front, 0] / zf + k.cx - pix[front, 0]
    out[front, 1] = k.fy * pc[front, 1] / zf + k.cy - pix[front, 1]
    return out


def apply_twist(xi, pose: Pose) -> Pose:
    """Left-perturb ``pose``: rotation Exp(w) R, translation Exp(w) t + v."""
    xi = np.asarray(xi, dtype=np.float64)
    dr = so3_exp(xi[:3])
    return Pose(orthonormalize(dr @ pose.rotation), dr @ pose.translation + xi[3:])


def residual_jacobian(pts: np.ndarray, motion: Pose, k: CameraIntrinsics) -> np.ndarray:
    """d(residual)/d(twist) at zero twist, shape (N, 2, 6), for in-front points."""
    pc = motion.transform(pts)
    x, y, z = pc.T
    n = len(pts)
    dproj = np.zeros((n, 2, 3))
    dproj[:, 0, 0] = k.fx / z
    dproj[:, 0, 2] = -k.fx * x / z**2
    dproj[:, 1, 1] = k.fy / z
    dproj[:, 1, 2] = -k.fy * y / z**2
    rp = pts @ motion.rotation.T
    dpc = np.zeros((n, 3, 6))
    # d(Exp(w) R P)/dw at w=0 is -[R P]x ; Exp(w) t contributes -[t]x too
    for i in range(n):
        dpc[i, :, :3] = -skew(rp[i] + motion.translation)
    dpc[:, :, 3:] = np.eye(3)
    return dproj @ dpc


def _cost(pts, pix, motion, k):
    r = reprojection_residuals((pts, pix), motion, k)
    return float(np.sum(r * r))


def refine_lm(pts: np.ndarray, pix: np.ndarray, init: Pose, k: CameraIntrinsics,
              lm: LMConfig = LMConfig()):
    """Minimize the squared reprojection error from ``init``.

    Returns ``(pose, cost, history, iterations)``; ``history`` holds the cost
    after every accepted step, starting with the initial cost.
    """
    pose = init
    cost = _cost(pts, pix, pose, k)
    history = [cost]
    lam = lm.lambda_init
    it = 0
    for it in range(1, lm.max_iterations + 1):
        r = reprojection_residuals((pts, pix), pose, k)
        front = pose.transform(pts)[:, 2] > 0
        if not np.any(front):
            break
        j = residual_jacobian(pts[front], pose, k).reshape(-1, 6)
        rv = r[front].reshape(-1)
        jtj = j.T @ j
        g = j.T @ rv
        a = jtj + lam * np.diag(np.diag(jtj))
        try:
            step = -np.linalg.solve(a, g)
        except np.linalg.LinAlgError:
            lam *= lm.lambda_up
            continue
        cand = apply_twist(step, pose)
        c = _cost(pts, pix, cand, k)
        if c < cost:
            pose, cost = cand, c
            history.append(cost)
            lam /= lm.lambda_down
        else:
            lam *= lm.lambda_up
        if np.linalg.norm(step) < lm.step_tol:
            break
    return pose, cost, history, it


def solve_pnp(corrs, k: CameraIntrinsics, init: Pose = None, cfg: RansacConfig = RansacConfig(threshold=2.0),
              lm: LMConfig = LMConfig()) -> PnpResult:
    pts, pix = _arrays(corrs)
    n = len(pts)
    if n < SAMPLE_SIZE:
        raise InsufficientCorrespondences(f"{n} correspondences, need at least {SAMPLE_SIZE}")
    init = init or Pose.identity()
    thr = cfg.threshold

    def inliers_of(pose):
        r = reprojection_residuals((pts, pix), pose, k)
        return np.hypot(r[:, 0], r[:, 1]) < thr

    best_pose, best_mask, best_count = None, None, -1
    it = 0
    while it < cfg.max_iterations:
        sample = cfg.rng(it).choice(n, SAMPLE_SIZE, replace=False)
        it += 1
        pose, cost, _, _ = refine_lm(pts[sample], pix[sample], init, k, lm)
        if not np.isfinite(cost) or cost >= BEHIND_SENTINEL ** 2:
            continue
        mask = inliers_of(pose)
        count = int(mask.sum())
        if count > best_count:
            best_pose, best_mask, best_count = pose, mask, count
        if it >= ransac_iterations_needed(best_count / n, SAMPLE_SIZE, cfg.confidence):
            break

    if best_pose is None or best_count < SAMPLE_SIZE:
        raise NoConvergence("no RANSAC sample converged to a consistent motion")
    pose, cost, history, _ = refine_lm(pts[best_mask], pix[best_mask], best_pose, k, lm)
    mask = inliers_of(pose)
    if mask.sum() < best_count:
        pose, mask = best_pose, best_mask
        r = reprojection_residuals((pts[mask], pix[mask]), pose, k)
        cost = float(np.sum(r * r))
    m = int(mask.sum())
    return PnpResult(pose.orthonormalized(), mask, cost / m, history)
