"""Two-view geometry: essential matrix and homography RANSAC, decomposition,
triangulation and GRIC model scoring."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CameraIntrinsics,
    Point3,
    Pose,
    RansacConfig,
    match_arrays,
    normalize,
    orthonormalize,
    ransac_iterations_needed,
    skew,
)
from .errors import (
    AtInfinity,
    ChiralityAmbiguous,
    DegenerateConfiguration,
    InsufficientMatches,
)

CHIRALITY_MARGIN = 0.1
DEPTH_GATE = (0.1, 400.0)
W_INF = 1e-12

# GRIC constants per model: (structure dimension d, motion parameters k)
GRIC_MODELS = {"F": (3, 7), "H": (2, 8)}
GRIC_DATA_DIM = 4


@dataclass
class EssentialResult:
    e: np.ndarray
    inlier_mask: np.ndarray
    motion: Pose
    triangulated: list = field(default_factory=list)  # (match index, depth in frame k-1)
    sampson_sq: Optional[np.ndarray] = None  # squared Sampson distance of every match (px^2)


@dataclass
class HomographyResult:
    h: np.ndarray
    inlier_mask: np.ndarray
    transfer_sq: Optional[np.ndarray] = None  # squared symmetric transfer error (px^2)


def _pairs(matches):
    if isinstance(matches, tuple) and len(matches) == 2:
        prev, curr = matches
        return np.asarray(prev, dtype=np.float64), np.asarray(curr, dtype=np.float64)
    return match_arrays(matches)


def hartley_transform(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.mean(np.hypot(*(pts - c).T))
    s = np.sqrt(2.0) / d if d > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _apply_h(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    q = pts @ t[:2, :2].T + t[:2, 2]
    if t[2, 0] == 0 and t[2, 1] == 0:
        return q / t[2, 2]
    w = pts @ t[2, :2] + t[2, 2]
    return q / w[:, None]


def project_to_essential(e: np.ndarray) -> np.ndarray:
    """Closest essential matrix (singular values 1, 1, 0), unit Frobenius norm."""
    u, _, vt = np.linalg.svd(e)
    out = u @ np.diag([1.0, 1.0, 0.0]) @ vt
    return out / np.linalg.norm(out)


def eight_point(x_prev: np.ndarray, x_curr: np.ndarray) -> np.ndarray:
    """Normalized 8-point essential matrix from (N, 2) normalized camera coordinates.

    Solves ``x_curr^T E x_prev = 0`` in least squares.
    """
    t1 = hartley_transform(x_prev)
    t2 = hartley_transform(x_curr)
    a = _apply_h(t1, x_prev)
    b = _apply_h(t2, x_curr)
    m = np.column_stack([
        b[:, 0] * a[:, 0], b[:, 0] * a[:, 1], b[:, 0],
        b[:, 1] * a[:, 0], b[:, 1] * a[:, 1], b[:, 1],
        a[:, 0], a[:, 1], np.ones(len(a)),
    ])
    _, _, vt = np.linalg.svd(m)
    fn = vt[-1].reshape(3, 3)
    return project_to_essential(t2.T @ fn @ t1)


def fundamental_from_essential(e: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    kinv = k.inv_matrix
    return kinv.T @ e @ kinv


def sampson_sq(f: np.ndarray, prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
    """Squared Sampson distance of pixel matches to ``curr^T F prev = 0``."""
    x1 = np.column_stack([prev, np.ones(len(prev))])
    x2 = np.column_stack([curr, np.ones(len(curr))])
    fx1 = x1 @ f.T
    ftx2 = x2 @ f
    num = np.sum(x2 * fx1, axis=1) ** 2
    den = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(den > 0, out, np.inf)


def _hartley_batch(pts: np.ndarray) -> np.ndarray:
    """Hartley similarity for each (B, M, 2) point set, shape (B, 3, 3)."""
    c = pts.mean(axis=1)
    d = np.mean(np.linalg.norm(pts - c[:, None], axis=2), axis=1)
    s = np.where(d > 0, np.sqrt(2.0) / np.where(d > 0, d, 1.0), 1.0)
    t = np.zeros((len(pts), 3, 3))
    t[:, 0, 0] = t[:, 1, 1] = s
    t[:, 0, 2] = -s * c[:, 0]
    t[:, 1, 2] = -s * c[:, 1]
    t[:, 2, 2] = 1.0
    return t


def _apply_sim_batch(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts * t[:, None, 0, 0, None] + t[:, None, :2, 2]


def _project_essential_batch(e: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(e)
    out = u[:, :, :2] @ vt[:, :2, :]
    return out / np.linalg.norm(out, axis=(1, 2))[:, None, None]


def _eight_point_batch(xp: np.ndarray, xc: np.ndarray) -> np.ndarray:
    t1 = _hartley_batch(xp)
    t2 = _hartley_batch(xc)
    a = _apply_sim_batch(t1, xp)
    b = _apply_sim_batch(t2, xc)
    one = np.ones(a.shape[:2])
    m = np.stack([
        b[..., 0] * a[..., 0], b[..., 0] * a[..., 1], b[..., 0],
        b[..., 1] * a[..., 0], b[..., 1] * a[..., 1], b[..., 1],
        a[..., 0], a[..., 1], one,
    ], axis=2)
    _, _, vt = np.linalg.svd(m, full_matrices=True)
    fn = vt[:, -1].reshape(-1, 3, 3)
    return _project_essential_batch(np.transpose(t2, (0, 2, 1)) @ fn @ t1)


def _sampson_sq_batch(f: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Squared Sampson distances (B, N) for (B, 3, 3) models and homogeneous (N, 3) points."""
    fx1 = np.einsum("bij,nj->bni", f, x1)
    ftx2 = np.einsum("bji,nj->bni", f, x2)
    num = np.einsum("ni,bni->bn", x2, fx1) ** 2
    den = fx1[..., 0] ** 2 + fx1[..., 1] ** 2 + ftx2[..., 0] ** 2 + ftx2[..., 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(den > 0, out, np.inf)


def _homography_batch(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    t1 = _hartley_batch(src)
    t2 = _hartley_batch(dst)
    a = _apply_sim_batch(t1, src)
    b = _apply_sim_batch(t2, dst)
    bsz, n = a.shape[:2]
    m = np.zeros((bsz, 2 * n, 9))
    m[:, 0::2, 0:2] = a
    m[:, 0::2, 2] = 1.0
    m[:, 0::2, 6:8] = -b[..., 0:1] * a
    m[:, 0::2, 8] = -b[..., 0]
    m[:, 1::2, 3:5] = a
    m[:, 1::2, 5] = 1.0
    m[:, 1::2, 6:8] = -b[..., 1:2] * a
    m[:, 1::2, 8] = -b[..., 1]
    _, _, vt = np.linalg.svd(m, full_matrices=True)
    hn = vt[:, -1].reshape(-1, 3, 3)
    # inverse of a similarity: scale 1/s, offset -t/s
    t2inv = np.zeros_like(t2)
    s2 = t2[:, 0, 0]
    t2inv[:, 0, 0] = t2inv[:, 1, 1] = 1.0 / s2
    t2inv[:, :2, 2] = -t2[:, :2, 2] / s2[:, None]
    t2inv[:, 2, 2] = 1.0
    h = t2inv @ hn @ t1
    h22 = h[:, 2, 2]
    norm = np.where(np.abs(h22) > 1e-15, h22, np.linalg.norm(h, axis=(1, 2)))
    return h / norm[:, None, None]


def _map_batch(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    q = np.einsum("bij,nj->bni", h, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return q[..., :2] / q[..., 2:3]


def _transfer_sq_batch(h: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    det = np.linalg.det(h)
    ok = np.isfinite(det) & (np.abs(det) > 1e-300)
    hinv = np.linalg.inv(np.where(ok[:, None, None], h, np.eye(3)))
    with np.errstate(invalid="ignore", over="ignore"):
        fwd = np.sum((_map_batch(h, x1) - x2[None, :, :2]) ** 2, axis=2)
        back = np.sum((_map_batch(hinv, x2) - x1[None, :, :2]) ** 2, axis=2)
        out = fwd + back
    out = np.where(np.isfinite(out), out, np.inf)
    out[~ok] = np.inf
    return out


def _collinear_batch(pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Per (4, 2) sample in a (B, 4, 2) stack: True if any three points are collinear."""
    out = np.zeros(len(pts), dtype=bool)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        d1 = pts[:, j] - pts[:, i]
        d2 = pts[:, k] - pts[:, i]
        area = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        scale = np.maximum(np.maximum(np.sum(d1 * d1, 1), np.sum(d2 * d2, 1)), 1e-300)
        out |= area <= tol * scale
    return out


# RANSAC hypotheses are generated and scored in chunks; the per-iteration
# bookkeeping below is still strictly sequential, so results do not depend
# on the chunk size.
_CHUNK = 64


def _truncated_costs(res_sq: np.ndarray, thr2: float) -> np.ndarray:
    """MSAC score per hypothesis: squared residuals capped at the gate, summed."""
    return np.minimum(res_sq, thr2).sum(axis=-1)


def _samples(cfg: RansacConfig, start: int, stop: int, n: int, size: int) -> np.ndarray:
    return np.array([cfg.rng(it).choice(n, size, replace=False) for it in range(start, stop)])


# --- essential -------------------------------------------------------------

def ransac_essential(matches, k: CameraIntrinsics, cfg: RansacConfig = RansacConfig()):
    """RANSAC over 8-point samples; returns ``(E, inlier_mask, sampson_sq)``.

    Never fails on degenerate data: the best model found is returned even if
    it has few inliers, so the caller can still score it.
    """
    prev, curr = _pairs(matches)
    n = len(prev)
    if n < 8:
        raise InsufficientMatches(f"{n} matches, need at least 8")
    xp = normalize(prev, k)[:, :2]
    xc = normalize(curr, k)[:, :2]
    kinv = k.inv_matrix
    thr2 = cfg.threshold ** 2

    x1 = np.column_stack([prev, np.ones(n)])
    x2 = np.column_stack([curr, np.ones(n)])
    best_e, best_mask, best_count, best_cost = None, None, -1, np.inf
    hyps = []
    it = 0
    done = False
    while it < cfg.max_iterations and not done:
        stop = min(it + _CHUNK, cfg.max_iterations)
        idx = _samples(cfg, it, stop, n, 8)
        es = _eight_point_batch(xp[idx], xc[idx])
        res = _sampson_sq_batch(kinv.T @ es @ kinv, x1, x2)
        masks = res < thr2
        counts = masks.sum(axis=1)
        costs = _truncated_costs(res, thr2)
        for j in range(len(idx)):
            if costs[j] < best_cost:
                best_e, best_mask, best_count, best_cost = es[j], masks[j], int(counts[j]), costs[j]
            it += 1
            if it >= ransac_iterations_needed(best_count / n, 8, cfg.confidence):
                done = True
                break
        hyps.append(es[:j + 1])

    if best_count >= 8:
        # When the data is far cleaner than the gate assumes, outliers lying
        # near an epipolar line can make a slightly wrong sample outscore an
        # exact one. Rescore every drawn hypothesis at the observed noise level.
        r = np.sqrt(sampson_sq(kinv.T @ best_e @ kinv, prev, curr))
        gate = _robust_gate(r, cfg.threshold)
        if gate < cfg.threshold:
            cand = np.concatenate(hyps)
            costs = np.concatenate([
                _truncated_costs(_sampson_sq_batch(kinv.T @ cand[i:i + _CHUNK] @ kinv, x1, x2), gate ** 2)
                for i in range(0, len(cand), _CHUNK)
            ])
            best_e = cand[int(np.argmin(costs))]
        # The refit may lose the odd outlier that only the sampled model
        # happened to accommodate, so its inlier count can drop slightly.
        e = _refit_essential(best_e, xp, xc, prev, curr, kinv, cfg.threshold)
        mask = sampson_sq(kinv.T @ e @ kinv, prev, curr) < thr2
        if mask.sum() >= 8:
            best_e, best_mask = e, mask
    res = sampson_sq(kinv.T @ best_e @ kinv, prev, curr)
    return best_e, best_mask, res


REFIT_ROUNDS = 5
MAD_TO_SIGMA = 1.0 / 0.6745


def _robust_gate(r: np.ndarray, threshold: float) -> float:
    """Three robust standard deviations of the in-gate residuals, clamped to (0, threshold]."""
    inl = r[r < threshold]
    if len(inl) == 0:
        return threshold
    sigma = MAD_TO_SIGMA * np.median(inl)
    return float(min(threshold, max(3.0 * sigma, 1e-3 * threshold)))


def _refit_essential(e, xp, xc, prev, curr, kinv, threshold):
    """Least-squares refit on the matches that agree with ``e`` at the data's own noise level.

    Random outliers that happen to fall inside the RANSAC gate pull a plain
    refit noticeably off, so the gate is tightened to three robust standard
    deviations of the current residuals (never above ``threshold``).
    """
    prev_sel = None
    for _ in range(REFIT_ROUNDS):
        r = np.sqrt(sampson_sq(kinv.T @ e @ kinv, prev, curr))
        if np.count_nonzero(r < threshold) < 8:
            break
        sel = r < _robust_gate(r, threshold)
        if sel.sum() < 8 or (prev_sel is not None and np.array_equal(sel, prev_sel)):
            break
        e = eight_point(xp[sel], xc[sel])
        prev_sel = sel
    return e


def estimate_essential(matches, k: CameraIntrinsics, cfg: RansacConfig = RansacConfig()) -> EssentialResult:
    prev, curr = _pairs(matches)
    e, mask, res = ransac_essential((prev, curr), k, cfg)
    if mask.sum() < 8:
        raise DegenerateConfiguration(f"best essential model has {int(mask.sum())} inliers")
    motion, tri = decompose_essential(e, (prev, curr), k, inlier_mask=mask)
    return EssentialResult(e, mask, motion, tri, res)


def essential_candidates(e: np.ndarray) -> list[Pose]:
    """The four (R, t) factorizations of E, in a fixed enumeration order."""
    u, _, vt = np.linalg.svd(e)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    r1 = orthonormalize(u @ w @ vt)
    r2 = orthonormalize(u @ w.T @ vt)
    t = u[:, 2] / np.linalg.norm(u[:, 2])
    return [Pose(r1, t), Pose(r1, -t), Pose(r2, t), Pose(r2, -t)]


def triangulate_many(prev: np.ndarray, curr: np.ndarray, motion: Pose, k: CameraIntrinsics):
    """Linear triangulation of (N, 2) pixel pairs.

    Returns ``(points, finite)``: points (N, 3) in frame k-1 coordinates and a
    mask that is False where the homogeneous scale is below 1e-12.
    """
    a = normalize(prev, k)
    b = normalize(curr, k)
    p1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    p2 = np.hstack([motion.rotation, motion.translation[:, None]])
    rows = np.stack([
        a[:, 0, None] * p1[2] - p1[0],
        a[:, 1, None] * p1[2] - p1[1],
        b[:, 0, None] * p2[2] - p2[0],
        b[:, 1, None] * p2[2] - p2[1],
    ], axis=1)
    _, _, vt = np.linalg.svd(rows)
    x = vt[:, -1, :]
    w = x[:, 3]
    finite = np.abs(w) >= W_INF
    pts = np.full((len(x), 3), np.nan)
    pts[finite] = x[finite, :3] / w[finite, None]
    return pts, finite


def triangulate(x_prev, x_curr, motion: Pose, k: CameraIntrinsics) -> Point3:
    pts, finite = triangulate_many(
        np.asarray(x_prev, dtype=np.float64).reshape(1, 2),
        np.asarray(x_curr, dtype=np.float64).reshape(1, 2),
        motion, k,
    )
    if not finite[0]:
        raise AtInfinity("rays are parallel; point at infinity")
    return Point3(*map(float, pts[0]))


def _chirality(prev, curr, motion, k):
    pts, finite = triangulate_many(prev, curr, motion, k)
    z1 = np.where(finite, pts[:, 2], -np.inf)
    z2 = np.where(finite, motion.transform(np.nan_to_num(pts))[:, 2], -np.inf)
    both = (z1 > 0) & (z2 > 0)
    return both, int(both.sum()), int((z1 > 0).sum() + (z2 > 0).sum()), z1


def decompose_essential(e: np.ndarray, matches, k: CameraIntrinsics, inlier_mask=None):
    """Select the chirality-consistent factorization of E.

    Returns ``(motion, triangulated)`` where ``triangulated`` lists
    ``(match index, depth in frame k-1)`` for inliers in front of both
    cameras. Raises ChiralityAmbiguous when the best and second-best
    candidates differ by less than 10% of the inliers.
    """
    prev, curr = _pairs(matches)
    idx = np.arange(len(prev)) if inlier_mask is None else np.nonzero(inlier_mask)[0]
    p, c = prev[idx], curr[idx]
    scored = []
    for order, cand in enumerate(essential_candidates(e)):
        both, count, total, z1 = _chirality(p, c, cand, k)
        scored.append((count, total, -order, cand, both, z1))
    scored.sort(key=lambda s: (s[0], s[1], s[2]), reverse=True)
    best, second = scored[0], scored[1]
    if best[0] - second[0] < CHIRALITY_MARGIN * len(idx) or best[0] == 0:
        raise ChiralityAmbiguous(
            f"chirality counts {best[0]} vs {second[0]} over {len(idx)} inliers"
        )
    motion, both, z1 = best[3], best[4], best[5]
    tri = [(int(i), float(z)) for i, z, ok in zip(idx, z1, both) if ok]
    return motion, tri


# --- homography ------------------------------------------------------------

def dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT homography mapping ``src`` to ``dst`` ((N, 2), N >= 4)."""
    t1 = hartley_transform(src)
    t2 = hartley_transform(dst)
    a = _apply_h(t1, src)
    b = _apply_h(t2, dst)
    n = len(a)
    m = np.zeros((2 * n, 9))
    m[0::2, 0:2] = a
    m[0::2, 2] = 1.0
    m[0::2, 6:8] = -b[:, 0:1] * a
    m[0::2, 8] = -b[:, 0]
    m[1::2, 3:5] = a
    m[1::2, 5] = 1.0
    m[1::2, 6:8] = -b[:, 1:2] * a
    m[1::2, 8] = -b[:, 1]
    _, _, vt = np.linalg.svd(m)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t2) @ hn @ t1
    return h / h[2, 2] if abs(h[2, 2]) > 1e-15 else h / np.linalg.norm(h)


def _map(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    q = np.column_stack([pts, np.ones(len(pts))]) @ h.T
    with np.errstate(divide="ignore", invalid="ignore"):
        return q[:, :2] / q[:, 2:3]


def transfer_sq(h: np.ndarray, prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
    """Squared symmetric transfer error d(curr, H prev)^2 + d(prev, H^-1 curr)^2."""
    try:
        hinv = np.linalg.inv(h)
    except np.linalg.LinAlgError:
        return np.full(len(prev), np.inf)
    fwd = np.sum((_map(h, prev) - curr) ** 2, axis=1)
    back = np.sum((_map(hinv, curr) - prev) ** 2, axis=1)
    out = fwd + back
    return np.where(np.isfinite(out), out, np.inf)


def _collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    """True if any three of the four points are (nearly) collinear."""
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        d1x, d1y = pts[j, 0] - pts[i, 0], pts[j, 1] - pts[i, 1]
        d2x, d2y = pts[k, 0] - pts[i, 0], pts[k, 1] - pts[i, 1]
        area = abs(d1x * d2y - d1y * d2x)
        scale = max(d1x * d1x + d1y * d1y, d2x * d2x + d2y * d2y, 1e-300)
        if area <= tol * scale:
            return True
    return False


def estimate_homography(matches, cfg: RansacConfig = RansacConfig()) -> HomographyResult:
    prev, curr = _pairs(matches)
    n = len(prev)
    if n < 4:
        raise InsufficientMatches(f"{n} matches, need at least 4")
    thr2 = cfg.threshold ** 2

    x1 = np.column_stack([prev, np.ones(n)])
    x2 = np.column_stack([curr, np.ones(n)])
    best_h, best_mask, best_count, best_cost = None, None, -1, np.inf
    it = 0
    done = False
    while it < cfg.max_iterations and not done:
        stop = min(it + _CHUNK, cfg.max_iterations)
        idx = _samples(cfg, it, stop, n, 4)
        usable = ~(_collinear_batch(prev[idx]) | _collinear_batch(curr[idx]))
        hs = np.full((len(idx), 3, 3), np.nan)
        if usable.any():
            hs[usable] = _homography_batch(prev[idx[usable]], curr[idx[usable]])
        usable &= np.all(np.isfinite(hs), axis=(1, 2))
        res = np.full((len(idx), n), np.inf)
        if usable.any():
            res[usable] = _transfer_sq_batch(hs[usable], x1, x2)
        masks = res < thr2
        counts = masks.sum(axis=1)
        costs = _truncated_costs(res, thr2)
        for j in range(len(idx)):
            it += 1
            if not usable[j]:
                continue
            if costs[j] < best_cost:
                best_h, best_mask, best_count, best_cost = hs[j], masks[j], int(counts[j]), costs[j]
            if it >= ransac_iterations_needed(best_count / n, 4, cfg.confidence):
                done = True
                break

    if best_h is None:
        raise DegenerateConfiguration("every homography sample was collinear")
    if best_count >= 4:
        h = dlt_homography(prev[best_mask], curr[best_mask])
        if np.all(np.isfinite(h)):
            mask = transfer_sq(h, prev, curr) < thr2
            if mask.sum() >= best_count:
                best_h, best_mask = h, mask
    return HomographyResult(best_h, best_mask, transfer_sq(best_h, prev, curr))


# --- GRIC ------------------------------------------------------------------

def gric_score(residuals, model: str, n: Optional[int] = None, sigma: float = 1.0) -> float:
    """Geometric robust information criterion; lower explains the data better.

    ``residuals`` are squared errors in px^2 (Sampson for F, symmetric
    transfer for H). Logs are natural.
    """
    d, k = GRIC_MODELS[model]
    e2 = np.asarray(residuals, dtype=np.float64)
    if n is None:
        n = len(e2)
    if n < 1 or len(e2) != n:
        raise ValueError("n must equal the residual count and be >= 1")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rho = np.minimum(e2 / sigma**2, 2.0 * (GRIC_DATA_DIM - d))
    return float(np.sum(rho) + np.log(4.0) * d * n + np.log(4.0 * n) * k)


def essential_from_motion(motion: Pose) -> np.ndarray:
    return skew(motion.translation) @ motion.rotation
