"""Independent brute-force reference implementations used by the tests.

These are deliberately written differently from the library code: plain
loops, 4x4 homogeneous matrices, explicit arithmetic. They are slow and only
meant for small inputs.
"""
from __future__ import annotations

import math

import numpy as np

CIRCLE16 = [
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
]


def fast_score_at(img: np.ndarray, r: int, c: int, t: int) -> int:
    """Segment-test score of one pixel: sum |ring - center| over every ring
    pixel that belongs to some contiguous run of >= 9 brighter (or darker)
    pixels; 0 if no such run exists."""
    h, w = img.shape
    if r < 3 or c < 3 or r >= h - 3 or c >= w - 3:
        return 0
    p = int(img[r, c])
    ring = [int(img[r + dy, c + dx]) for dx, dy in CIRCLE16]
    total = 0
    for sign in (1, -1):
        flags = "".join("1" if sign * (x - p) > t else "0" for x in ring)
        if flags.count("1") < 9:
            continue
        wrapped = flags + flags[:8]
        member = [False] * 16
        for start in range(16):
            if wrapped[start:start + 9] == "111111111":
                for j in range(9):
                    member[(start + j) % 16] = True
        total += sum(abs(ring[i] - p) for i in range(16) if member[i])
    return total


def fast_brute(img: np.ndarray, t: int, radius: float):
    """Exhaustive segment test plus suppression; returns sorted (row, col, score).

    A candidate survives unless another candidate within ``radius`` ranks
    ahead of it in (score desc, row asc, col asc) order.
    """
    h, w = img.shape
    cands = {}
    for r in range(h):
        for c in range(w):
            s = fast_score_at(img, r, c, t)
            if s > 0:
                cands[(r, c)] = s
    reach = int(math.floor(radius))
    keep = []
    for (r, c), s in cands.items():
        dominated = False
        for dr in range(-reach, reach + 1):
            for dc in range(-reach, reach + 1):
                if (dr, dc) == (0, 0) or dr * dr + dc * dc > radius * radius:
                    continue
                s2 = cands.get((r + dr, c + dc))
                if s2 is not None and (-s2, r + dr, c + dc) < (-s, r, c):
                    dominated = True
        if not dominated:
            keep.append((r, c, s))
    return sorted(keep)


def hom(rot, trans) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = trans
    return m


def cross(a, b):
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def random_rotation(rng) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def angle_of(r: np.ndarray) -> float:
    c = (r[0, 0] + r[1, 1] + r[2, 2] - 1.0) / 2.0
    return math.acos(max(-1.0, min(1.0, c)))


def ate_brute(est_mats, gt_mats) -> float:
    acc = 0.0
    for a, b in zip(est_mats, gt_mats):
        acc += sum((a[i, 3] - b[i, 3]) ** 2 for i in range(3))
    return math.sqrt(acc / len(est_mats))


def rpe_brute(est_mats, gt_mats):
    ts, rs = 0.0, 0.0
    n = len(est_mats) - 1
    for i in range(n):
        ge = np.linalg.inv(gt_mats[i]) @ gt_mats[i + 1]
        ee = np.linalg.inv(est_mats[i]) @ est_mats[i + 1]
        d = np.linalg.inv(ge) @ ee
        ts += math.sqrt(d[0, 3] ** 2 + d[1, 3] ** 2 + d[2, 3] ** 2)
        rs += math.degrees(angle_of(d[:3, :3]))
    return ts / n, rs / n


def seg_errors_brute(est_mats, gt_mats, lengths=(100, 200, 300, 400, 500, 600, 700, 800)):
    """Devkit-style loop: every start frame, first end frame at least L metres
    further along the ground-truth path."""
    n = len(gt_mats)
    dist = [0.0]
    for i in range(1, n):
        d = gt_mats[i][:3, 3] - gt_mats[i - 1][:3, 3]
        dist.append(dist[-1] + math.sqrt(float(d @ d)))
    t_sum, r_sum, count = 0.0, 0.0, 0
    for start in range(n):
        for length in lengths:
            end = -1
            for j in range(start, n):
                if dist[j] - dist[start] >= length:
                    end = j
                    break
            if end < 0:
                continue
            pg = np.linalg.inv(gt_mats[start]) @ gt_mats[end]
            pe = np.linalg.inv(est_mats[start]) @ est_mats[end]
            err = np.linalg.inv(pe) @ pg
            t = math.sqrt(err[0, 3] ** 2 + err[1, 3] ** 2 + err[2, 3] ** 2)
            t_sum += t / length
            r_sum += angle_of(err[:3, :3]) * 180.0 / math.pi / length
            count += 1
    if count == 0:
        return None
    return 100.0 * t_sum / count, 100.0 * r_sum / count


def numeric_jacobian(fn, x0: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of a vector function."""
    x0 = np.asarray(x0, dtype=np.float64)
    f0 = np.asarray(fn(x0))
    jac = np.zeros((f0.size, x0.size))
    for i in range(x0.size):
        dx = np.zeros_like(x0)
        dx[i] = step
        jac[:, i] = (np.asarray(fn(x0 + dx)).ravel() - np.asarray(fn(x0 - dx)).ravel()) / (2 * step)
    return jac
