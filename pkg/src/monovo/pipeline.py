"""Frame-by-frame monocular VO loop: track, score F vs H with GRIC, estimate
motion by essential matrix + depth-ratio scale or by PnP, accumulate poses."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from .core import CameraIntrinsics, Pose, RansacConfig, compose, inverse, match_arrays, normalize
from .dataio import DepthMap, SequenceSource, Trajectory
from .errors import DegenerateConfiguration, MonoVOError
from .frontend import FrontendConfig, Track, match_frames
from .pnp import LMConfig, solve_pnp
from .scale import ScaleConfig, apply_scale, collect_ratios, estimate_scale
from .twoview import decompose_essential, estimate_homography, gric_score, ransac_essential

log = logging.getLogger(__name__)


class Method(str, Enum):
    ESSENTIAL = "Essential"
    PNP = "Pnp"
    CONSTANT_VELOCITY = "ConstantVelocity"


@dataclass
class FrameDecision:
    frame: int
    method: Method
    gric_f: Optional[float] = None
    gric_h: Optional[float] = None
    match_count: int = 0
    inlier_count: int = 0
    scale: float = 1.0
    essential_error: Optional[str] = None
    notes: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["method"] = self.method.value
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "FrameDecision":
        d = json.loads(line)
        d["method"] = Method(d["method"])
        return cls(**d)


def write_decisions(decisions: Iterable[FrameDecision], path):
    with open(path, "w", newline="\n") as fh:
        for d in decisions:
            fh.write(d.to_json() + "\n")


def read_decisions(path) -> list[FrameDecision]:
    with open(path) as fh:
        return [FrameDecision.from_json(line) for line in fh if line.strip()]


@dataclass(frozen=True)
class PipelineConfig:
    frontend: FrontendConfig = FrontendConfig()
    essential: RansacConfig = RansacConfig(threshold=1.0)
    homography: RansacConfig = RansacConfig(threshold=1.0)
    scale_ransac: RansacConfig = RansacConfig()
    scale: ScaleConfig = ScaleConfig()
    pnp: RansacConfig = RansacConfig(threshold=2.0)
    lm: LMConfig = LMConfig()
    gric_sigma: float = 1.0
    depth_scale: float = 1.0
    use_depth: bool = True
    seed: int = 0

    def seeded(self, cfg: RansacConfig, frame: int, stream: int) -> RansacConfig:
        """Copy of ``cfg`` with a seed derived from (master seed, frame, stream)."""
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, frame, stream])
        return replace(cfg, seed=int(ss.generate_state(1, np.uint64)[0]))


@dataclass
class PipelineState:
    intrinsics: CameraIntrinsics
    frame: int = 0
    global_pose: Pose = field(default_factory=Pose.identity)
    prev_motion: Pose = field(default_factory=Pose.identity)
    scale: float = 1.0
    tracks: list = field(default_factory=list)
    next_id: int = 0


def _error_text(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _gric_or_inf(x):
    return math.inf if x is None else x


class _Frame:
    """Per-frame working set shared by the estimation branches."""

    def __init__(self, state, cfg, decision, prev, curr, prev_depth):
        self.state = state
        self.cfg = cfg
        self.decision = decision
        self.prev = prev
        self.curr = curr
        self.prev_depth = prev_depth
        self.k = state.intrinsics

    def scale_for(self, tri) -> float:
        cfg, d = self.cfg, self.decision
        if not cfg.use_depth:
            return 1.0
        if self.prev_depth is None:
            d.notes.append("scale: depth map missing, keeping previous scale")
            return self.state.scale
        try:
            samples = collect_ratios(tri, self.prev_depth, (self.prev, self.curr), cfg.scale.depth_gate)
            est = estimate_scale(samples, cfg.seeded(cfg.scale_ransac, d.frame, 2), cfg.scale)
        except MonoVOError as exc:
            d.notes.append(f"scale: {_error_text(exc)}; keeping previous scale")
            return self.state.scale
        return est.scale

    def pnp(self):
        cfg, d = self.cfg, self.decision
        if not cfg.use_depth or self.prev_depth is None:
            d.notes.append("pnp: no depth map for this frame")
            return None
        depth = self.prev_depth.sample_nearest(self.prev)
        ok = depth > 0
        if ok.sum() < 6:
            d.notes.append("pnp: fewer than 6 matches with valid depth")
            return None
        pts = normalize(self.prev[ok], self.k) * depth[ok, None]
        try:
            return solve_pnp((pts, self.curr[ok]), self.k, self.state.prev_motion,
                             cfg.seeded(cfg.pnp, d.frame, 3), cfg.lm)
        except MonoVOError as exc:
            d.notes.append(f"pnp: {_error_text(exc)}")
            return None


def _estimate_motion(fr: _Frame) -> Optional[Pose]:
    cfg, d, k = fr.cfg, fr.decision, fr.k
    prev, curr = fr.prev, fr.curr

    e = mask = None
    try:
        e, mask, sampson = ransac_essential((prev, curr), k, cfg.seeded(cfg.essential, d.frame, 0))
        d.gric_f = gric_score(sampson, "F", len(sampson), cfg.gric_sigma)
    except MonoVOError as exc:
        d.essential_error = _error_text(exc)
    try:
        hom = estimate_homography((prev, curr), cfg.seeded(cfg.homography, d.frame, 1))
        d.gric_h = gric_score(hom.transfer_sq, "H", len(prev), cfg.gric_sigma)
    except MonoVOError as exc:
        d.notes.append(f"homography: {_error_text(exc)}")

    unit_motion = tri = None
    if e is not None:
        try:
            if mask.sum() < 8:
                raise DegenerateConfiguration(f"best essential model has {int(mask.sum())} inliers")
            unit_motion, tri = decompose_essential(e, (prev, curr), k, inlier_mask=mask)
        except MonoVOError as exc:
            d.essential_error = _error_text(exc)

    def essential_motion():
        s = fr.scale_for(tri)
        d.method = Method.ESSENTIAL
        d.inlier_count = int(mask.sum())
        d.scale = s
        if cfg.use_depth:
            fr.state.scale = s
        return apply_scale(unit_motion, s)

    # ties go to the essential path
    if unit_motion is not None and _gric_or_inf(d.gric_f) <= _gric_or_inf(d.gric_h):
        return essential_motion()

    result = fr.pnp()
    if result is not None:
        d.method = Method.PNP
        d.inlier_count = int(result.inlier_mask.sum())
        d.scale = 1.0
        # PnP motion is metric; its baseline seeds the next scale fallback
        fr.state.scale = float(np.linalg.norm(result.motion.translation))
        return result.motion
    if unit_motion is not None:
        d.notes.append("pnp unavailable, using essential motion")
        return essential_motion()
    return None


def process_frame(state: PipelineState, prev_img, curr_img, prev_depth: Optional[DepthMap],
                  cfg: PipelineConfig = PipelineConfig()) -> tuple[Pose, FrameDecision]:
    """Advance ``state`` by one frame.

    Estimation failures never propagate: they degrade to repeating the
    previous motion and are recorded in the returned decision.
    """
    decision = FrameDecision(frame=state.frame + 1, method=Method.CONSTANT_VELOCITY)
    try:
        matches = match_frames(prev_img, curr_img, state.tracks, cfg.frontend, state.next_id)
    except MonoVOError as exc:
        decision.notes.append(f"frontend: {_error_text(exc)}")
        matches = []
    state.tracks = [Track(m.id, m.curr) for m in matches]
    if matches:
        state.next_id = max(state.next_id, max(m.id for m in matches) + 1)
    decision.match_count = len(matches)

    motion = None
    if matches:
        prev, curr = match_arrays(matches)
        motion = _estimate_motion(_Frame(state, cfg, decision, prev, curr, prev_depth))
    if motion is None:
        motion = state.prev_motion
        decision.method = Method.CONSTANT_VELOCITY
        decision.inlier_count = 0
        decision.scale = 1.0

    for key in ("gric_f", "gric_h"):
        v = getattr(decision, key)
        if v is not None and not math.isfinite(v):
            setattr(decision, key, None)
    motion = motion.orthonormalized()
    state.prev_motion = motion
    state.global_pose = compose(state.global_pose, inverse(motion)).orthonormalized()
    state.frame = decision.frame
    log.debug("frame %d: %s (%d matches)", decision.frame, decision.method.value, decision.match_count)
    return state.global_pose, decision


def run_frames(images: Iterable, depth_for: Callable[[int], Optional[DepthMap]],
               intrinsics: CameraIntrinsics, cfg: PipelineConfig = PipelineConfig()):
    """Run the loop over an iterable of images; ``depth_for(i)`` supplies frame i's depth.

    Returns ``(trajectory, decisions)``.
    """
    it = iter(images)
    try:
        prev_img = next(it)
    except StopIteration:
        raise ValueError("need at least 2 frames") from None
    state = PipelineState(intrinsics)
    traj = Trajectory([0], [Pose.identity()])
    decisions = []
    for curr_img in it:
        depth = depth_for(state.frame) if cfg.use_depth else None
        pose, decision = process_frame(state, prev_img, curr_img, depth, cfg)
        traj.append(state.frame, pose)
        decisions.append(decision)
        prev_img = curr_img
    if len(traj) < 2:
        raise ValueError("need at least 2 frames")
    return traj, decisions


def process_sequence(src: SequenceSource, cfg: PipelineConfig = PipelineConfig()):
    """Run the full loop over a KITTI-layout sequence."""
    if src.n_frames < 2:
        raise ValueError("sequence needs at least 2 frames")
    use_depth = cfg.use_depth and src.depth_dir is not None
    if cfg.use_depth and not use_depth:
        log.warning("no depth directory; running unscaled")
    cfg = replace(cfg, use_depth=use_depth)

    def depth_for(i):
        d = src.depth(i)
        if d is not None and cfg.depth_scale != 1.0:
            d = d.scaled(cfg.depth_scale)
        return d

    images = (src.image(i) for i in range(src.n_frames))
    return run_frames(images, depth_for, src.calib, cfg)
