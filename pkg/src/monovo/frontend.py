"""FAST corner detection and pyramidal Lucas-Kanade tracking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import FeatureMatch, Point2
from .dataio import GrayImage
from .errors import InsufficientFeatures, TooSmall

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy).
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
ARC_LENGTH = 9
BORDER = 3
MIN_LEVEL_SIZE = 32


class Corner(NamedTuple):
    position: Point2
    score: float


class Track(NamedTuple):
    id: int
    position: Point2


@dataclass(frozen=True)
class FrontendConfig:
    fast_threshold: int = 20
    nms_radius: int = 3
    window: int = 21
    levels: int = 3
    max_iterations: int = 30
    epsilon: float = 0.01
    min_eigenvalue: float = 1e-4
    fb_threshold: float = 1.0
    min_features: int = 1500

    def __post_init__(self):
        if self.fast_threshold < 1:
            raise ValueError("fast_threshold must be >= 1")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be an odd size >= 3")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


def _as_array(img) -> np.ndarray:
    return np.asarray(img.data if isinstance(img, GrayImage) else img)


# --- FAST ------------------------------------------------------------------

def segment_test(img, threshold: int) -> np.ndarray:
    """Per-pixel FAST-9 score; 0 where the segment test fails.

    The score sums |circle pixel - center| over the contiguous run (>= 9 of
    16) of brighter or darker circle pixels. Pixels within 3 of the border
    always score 0.
    """
    a = _as_array(img).astype(np.int32)
    h, w = a.shape
    score = np.zeros((h, w), dtype=np.int64)
    if h <= 2 * BORDER or w <= 2 * BORDER:
        return score
    c = a[BORDER:h - BORDER, BORDER:w - BORDER]
    ring = np.stack([
        a[BORDER + dy:h - BORDER + dy, BORDER + dx:w - BORDER + dx] for dx, dy in CIRCLE
    ])
    diff = np.abs(ring - c)
    inner = np.zeros(c.shape, dtype=np.int64)
    for flags in (ring > c + threshold, ring < c - threshold):
        # run of ARC_LENGTH set flags starting at each circle index
        arc = flags.copy()
        for o in range(1, ARC_LENGTH):
            arc &= np.roll(flags, -o, axis=0)
        member = arc.copy()
        for o in range(1, ARC_LENGTH):
            member |= np.roll(arc, o, axis=0)
        inner += np.sum(np.where(member, diff, 0), axis=0)
    score[BORDER:h - BORDER, BORDER:w - BORDER] = inner
    return score


def _nms_offsets(radius: float):
    r = int(np.floor(radius))
    return [
        (dx, dy)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if (dx or dy) and dx * dx + dy * dy <= radius * radius
    ]


def nms_mask(score: np.ndarray, radius: float) -> np.ndarray:
    """Keep pixels whose score beats every other candidate within ``radius``.

    Ordering is (score desc, row asc, col asc), so of any two candidates
    within the radius exactly one dominates.
    """
    h, w = score.shape
    keep = score > 0
    if radius <= 0:
        return keep
    r = int(np.floor(radius))
    padded = np.full((h + 2 * r, w + 2 * r), -1, dtype=np.int64)
    padded[r:r + h, r:r + w] = score
    for dx, dy in _nms_offsets(radius):
        nb = padded[r + dy:r + dy + h, r + dx:r + dx + w]
        earlier = dy < 0 or (dy == 0 and dx < 0)
        beaten = (nb > score) | ((nb == score) if earlier else False)
        keep &= ~beaten
    return keep


def fast_detect(img, threshold: int = 20, nms_radius: float = 3) -> list[Corner]:
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    score = segment_test(img, threshold)
    keep = nms_mask(score, nms_radius)
    rows, cols = np.nonzero(keep)
    return [
        Corner(Point2(float(c), float(r)), float(score[r, c])) for r, c in zip(rows, cols)
    ]


# --- pyramid ---------------------------------------------------------------

def downsample(img) -> np.ndarray:
    a = _as_array(img).astype(np.int32)
    h, w = a.shape[0] // 2, a.shape[1] // 2
    a = a[:2 * h, :2 * w]
    s = a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2]
    return ((s + 2) // 4).astype(np.uint8)


def max_levels(shape, requested: int) -> int:
    h, w = shape
    n = 1
    while n < requested and min(h >> n, w >> n) >= MIN_LEVEL_SIZE:
        n += 1
    return n


def build_pyramid(img, levels: int) -> list[GrayImage]:
    if levels < 1:
        raise ValueError("levels must be >= 1")
    a = _as_array(img)
    h, w = a.shape
    if min(h >> (levels - 1), w >> (levels - 1)) < MIN_LEVEL_SIZE:
        raise TooSmall(f"{w}x{h} image cannot hold {levels} levels of >= {MIN_LEVEL_SIZE}px")
    out = [GrayImage(a)]
    for _ in range(levels - 1):
        out.append(GrayImage(downsample(out[-1])))
    return out


# --- Lucas-Kanade ----------------------------------------------------------

def bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample ``img`` at float coordinates with edge clamping."""
    h, w = img.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), w - 2)
    y0 = np.minimum(np.floor(y).astype(np.int64), h - 2)
    fx = x - x0
    fy = y - y0
    a = img[y0, x0]
    b = img[y0, x0 + 1]
    c = img[y0 + 1, x0]
    d = img[y0 + 1, x0 + 1]
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


def sample_windows(img: np.ndarray, centers: np.ndarray, half: int) -> np.ndarray:
    """Bilinear (2*half+1)^2 windows around each (x, y) center, shape (N, S, S).

    All pixels of one window share the same fractional offset, so a single
    integer block gather per point suffices. Coordinates are edge-clamped.
    """
    h, w = img.shape
    size = 2 * half + 1
    cx = centers[:, 0]
    cy = centers[:, 1]
    bx = np.floor(cx)
    by = np.floor(cy)
    fx = (cx - bx)[:, None, None]
    fy = (cy - by)[:, None, None]
    r = np.arange(-half, half + 2)
    cols = np.clip(bx.astype(np.int64)[:, None] + r, 0, w - 1)
    rows = np.clip(by.astype(np.int64)[:, None] + r, 0, h - 1)
    blk = img[rows[:, :, None], cols[:, None, :]]
    top = blk[:, :size, :size] * (1 - fx) + blk[:, :size, 1:] * fx
    bot = blk[:, 1:, :size] * (1 - fx) + blk[:, 1:, 1:] * fx
    return top * (1 - fy) + bot * fy


def klt_track(prev_pyr, curr_pyr, points, cfg: FrontendConfig = FrontendConfig(),
              initial=None) -> tuple[np.ndarray, np.ndarray]:
    """Track ``points`` (N, 2) from the previous pyramid into the current one.

    Returns ``(tracked, ok)`` with ``tracked`` of shape (N, 2) in level-0
    pixels and a boolean status per point. ``initial`` optionally seeds the
    level-0 displacement guess.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    nlev = min(len(prev_pyr), len(curr_pyr))
    h0, w0 = np.asarray(prev_pyr[0]).shape
    ok = np.ones(n, dtype=bool)
    if n == 0:
        return pts.copy(), ok
    half = cfg.window // 2
    area = cfg.window * cfg.window

    guess = np.zeros((n, 2))
    if initial is not None:
        guess = (np.asarray(initial, dtype=np.float64).reshape(-1, 2) - pts) / (1 << (nlev - 1))

    for level in range(nlev - 1, -1, -1):
        I = np.asarray(prev_pyr[level], dtype=np.float64)
        J = np.asarray(curr_pyr[level], dtype=np.float64)
        h, w = I.shape
        p = pts / (1 << level)
        outside = (p[:, 0] < 0) | (p[:, 0] > w - 1) | (p[:, 1] < 0) | (p[:, 1] > h - 1)
        ok &= ~outside

        # window plus one pixel ring for central differences
        patch = sample_windows(I, p, half + 1)
        ix = 0.5 * (patch[:, 1:-1, 2:] - patch[:, 1:-1, :-2])
        iy = 0.5 * (patch[:, 2:, 1:-1] - patch[:, :-2, 1:-1])
        tmpl = patch[:, 1:-1, 1:-1]
        gxx = np.sum(ix * ix, axis=(1, 2))
        gxy = np.sum(ix * iy, axis=(1, 2))
        gyy = np.sum(iy * iy, axis=(1, 2))
        tr = 0.5 * (gxx + gyy)
        min_eig = (tr - np.sqrt(np.maximum(tr * tr - (gxx * gyy - gxy * gxy), 0.0))) / area
        ok &= min_eig >= cfg.min_eigenvalue
        det = gxx * gyy - gxy * gxy

        v = np.zeros((n, 2))
        active = ok.copy()
        for _ in range(cfg.max_iterations):
            idx = np.nonzero(active)[0]
            if len(idx) == 0:
                break
            q = p[idx] + guess[idx] + v[idx]
            jw = sample_windows(J, q, half)
            diff = tmpl[idx] - jw
            bx = np.sum(diff * ix[idx], axis=(1, 2))
            by = np.sum(diff * iy[idx], axis=(1, 2))
            d = det[idx]
            ex = (gyy[idx] * bx - gxy[idx] * by) / d
            ey = (gxx[idx] * by - gxy[idx] * bx) / d
            v[idx, 0] += ex
            v[idx, 1] += ey
            step = np.hypot(ex, ey)
            diverged = ~(step <= cfg.window)
            ok[idx[diverged]] = False
            active[idx[diverged | (step < cfg.epsilon)]] = False

        q = p + guess + v
        left = (q[:, 0] < 0) | (q[:, 0] > w - 1) | (q[:, 1] < 0) | (q[:, 1] > h - 1)
        ok &= ~left
        guess = guess + v
        if level > 0:
            guess = 2.0 * guess

    tracked = pts + guess
    tracked[~ok] = pts[~ok]
    return tracked, ok


# --- matching --------------------------------------------------------------

def _track_fb(prev_pyr, curr_pyr, pts, cfg):
    fwd, ok_f = klt_track(prev_pyr, curr_pyr, pts, cfg)
    back, ok_b = klt_track(curr_pyr, prev_pyr, fwd, cfg)
    err = np.hypot(*(back - pts).T) if len(pts) else np.zeros(0)
    return fwd, ok_f & ok_b & (err <= cfg.fb_threshold)


def match_frames(prev_img, curr_img, existing_tracks: Optional[Sequence[Track]] = None,
                 cfg: FrontendConfig = FrontendConfig(), next_id: int = 0) -> list[FeatureMatch]:
    """Track features from ``prev_img`` into ``curr_img``.

    Existing tracks (positions in ``prev_img``) are followed first; if fewer
    than ``cfg.min_features`` survive the forward-backward check, FAST
    corners from ``prev_img`` away from the survivors are added. New tracks
    take ids starting at ``max(next_id, max existing id + 1)``.

    Raises InsufficientFeatures when fewer than 8 matches survive.
    """
    a = _as_array(prev_img)
    b = _as_array(curr_img)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    nlev = max_levels(a.shape, cfg.levels)
    prev_pyr = build_pyramid(a, nlev)
    curr_pyr = build_pyramid(b, nlev)

    existing = list(existing_tracks or [])
    ids = np.array([t.id for t in existing], dtype=np.int64)
    pts = np.array([t.position for t in existing], dtype=np.float64).reshape(-1, 2)
    fwd, good = _track_fb(prev_pyr, curr_pyr, pts, cfg)
    keep_prev, keep_curr, keep_ids = pts[good], fwd[good], ids[good]

    if len(keep_prev) < cfg.min_features:
        corners = fast_detect(a, cfg.fast_threshold, cfg.nms_radius)
        corners.sort(key=lambda c: (-c.score, c.position.v, c.position.u))
        cand = np.array([c.position for c in corners], dtype=np.float64).reshape(-1, 2)
        if len(cand) and len(keep_prev):
            d2 = np.min(
                np.sum((cand[:, None, :] - keep_prev[None, :, :]) ** 2, axis=2), axis=1
            )
            cand = cand[d2 > cfg.nms_radius ** 2]
        cand = cand[: cfg.min_features - len(keep_prev)]
        start = max(next_id, int(ids.max()) + 1 if len(ids) else 0)
        new_ids = np.arange(start, start + len(cand), dtype=np.int64)
        nf, ngood = _track_fb(prev_pyr, curr_pyr, cand, cfg)
        keep_prev = np.vstack([keep_prev, cand[ngood]])
        keep_curr = np.vstack([keep_curr, nf[ngood]])
        keep_ids = np.concatenate([keep_ids, new_ids[ngood]])

    if len(keep_prev) < 8:
        raise InsufficientFeatures(f"only {len(keep_prev)} matches survived tracking")
    return [
        FeatureMatch(Point2(*map(float, p)), Point2(*map(float, c)), int(i))
        for p, c, i in zip(keep_prev, keep_curr, keep_ids)
    ]
