"""Metric scale from triangulated-vs-external depth ratios."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Pose, RansacConfig, ransac_iterations_needed
from .dataio import DepthMap
from .errors import NoConsensus, NoValidSamples
from .twoview import DEPTH_GATE, _pairs


class DepthRatioSample(NamedTuple):
    triangulated: float
    external: float
    ratio: float


@dataclass(frozen=True)
class ScaleEstimate:
    scale: float
    inlier_count: int
    total: int


@dataclass(frozen=True)
class ScaleConfig:
    relative_gate: float = 0.1
    min_inliers: int = 10
    min_inlier_fraction: float = 0.2
    depth_gate: tuple = DEPTH_GATE


def collect_ratios(triangulated, depth_map: DepthMap, matches,
                   depth_gate: tuple = DEPTH_GATE) -> list[DepthRatioSample]:
    """Pair each gated triangulated depth with the map depth at its frame k-1 pixel."""
    prev, _ = _pairs(matches)
    lo, hi = depth_gate
    out = []
    for idx, d_tri in triangulated:
        if not lo < d_tri < hi:
            continue
        d_ext = float(depth_map.sample_nearest(prev[idx])[0])
        if not d_ext > 0:
            continue
        r = d_tri / d_ext
        if np.isfinite(r) and r > 0:
            out.append(DepthRatioSample(float(d_tri), d_ext, float(r)))
    if not out:
        raise NoValidSamples("no triangulated point has a valid external depth")
    return out


def estimate_scale(samples, cfg: RansacConfig = RansacConfig(),
                   scfg: ScaleConfig = ScaleConfig()) -> ScaleEstimate:
    """One-parameter RANSAC over depth ratios.

    Each hypothesis is a single ratio; inliers lie within a relative gate of
    it. The returned ``scale`` inverts the median inlier ratio, so it
    multiplies a unit-baseline translation into metric units.
    """
    ratios = np.sort(np.array([s.ratio if isinstance(s, DepthRatioSample) else float(s) for s in samples]))
    n = len(ratios)
    if n < 1:
        raise NoValidSamples("no samples")
    gate = scfg.relative_gate
    best_h, best_count = None, -1
    it = 0
    while it < cfg.max_iterations:
        h = ratios[cfg.rng(it).integers(n)]
        count = int(np.count_nonzero(np.abs(ratios - h) < gate * h))
        if count > best_count:
            best_h, best_count = h, count
        it += 1
        if it >= ransac_iterations_needed(best_count / n, 1, cfg.confidence):
            break
    needed = max(scfg.min_inliers, scfg.min_inlier_fraction * n)
    if best_count < needed:
        raise NoConsensus(f"best consensus {best_count} of {n} below {needed:g}")
    inliers = ratios[np.abs(ratios - best_h) < gate * best_h]
    return ScaleEstimate(float(1.0 / np.median(inliers)), int(len(inliers)), n)


def apply_scale(motion: Pose, est) -> Pose:
    s = est.scale if isinstance(est, ScaleEstimate) else float(est)
    return Pose(motion.rotation, motion.translation * s)
