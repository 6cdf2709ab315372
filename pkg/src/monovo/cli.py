"""``monovo`` command line: run, eval, synth, plot.

Every command writes a JSON manifest next to its outputs. Passing that file
back with ``--manifest`` repeats the command with the recorded arguments
(and, for ``run``, the recorded configuration snapshot); flags given
explicitly on the command line still win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import config_from_dict, config_to_dict, load_config
from .core import CameraIntrinsics
from .dataio import load_sequence, read_kitti_poses, write_kitti_poses
from .errors import MonoVOError
from .evaluation import AlignMode, evaluate, umeyama_align
from .pipeline import PipelineConfig, process_sequence, write_decisions
from .plotting import Series, save_report_figure, write_trajectory_svg
from .synth import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    FAR,
    NEAR,
    SceneMode,
    export_kitti,
    generate_scene,
)

log = logging.getLogger("monovo")

# Per-command defaults. Parser defaults are None so that values recorded in
# a manifest can be told apart from values typed on the command line.
DEFAULTS = {
    "run": {"seq": "00", "depth_scale": None, "seed": None, "frames": None, "depth": None,
            "config": None},
    "eval": {"align": "none", "gt": None, "dataset": None, "seq": None, "out": None},
    "synth": {"seq": "00", "mode": "general", "points": 200, "frames": 100, "seed": 0,
              "speed": 1.0, "yaw_rate": 0.5, "near": NEAR, "far": FAR,
              "width": DEFAULT_WIDTH, "height": DEFAULT_HEIGHT, "depth": None},
    "plot": {"gt": None, "dataset": None, "seq": None, "labels": None},
}
# Arguments persisted in manifests (inputs only; "out" can be redirected on rerun).
RECORDED = {
    "run": ("dataset", "seq", "depth", "depth_scale", "seed", "frames"),
    "eval": ("estimate", "gt", "dataset", "seq", "align"),
    "synth": ("seq", "mode", "points", "frames", "seed", "speed", "yaw_rate", "near", "far",
              "width", "height"),
    "plot": ("poses", "gt", "dataset", "seq", "labels"),
}


class CliError(Exception):
    """Input or runtime failure reported with exit code 1."""


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monovo", description="Monocular visual odometry toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the odometry pipeline on a KITTI-layout sequence")
    r.add_argument("--dataset", help="dataset root containing sequences/<seq>/image_0")
    r.add_argument("--seq", help="sequence id (default 00)")
    r.add_argument("--depth", help="depth root holding <seq>/NNNNNN.pfm; omit to run unscaled")
    r.add_argument("--depth-scale", type=_positive_float, help="multiplier applied to depth maps")
    r.add_argument("--seed", type=_u64, help="master RNG seed")
    r.add_argument("--frames", type=int, help="process only the first N frames")
    r.add_argument("--config", help="TOML configuration file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--manifest", help="repeat a previous run from its manifest")

    e = sub.add_parser("eval", help="compare an estimated trajectory with ground truth")
    e.add_argument("estimate", nargs="?", help="estimated KITTI pose file")
    e.add_argument("--gt", help="ground-truth KITTI pose file")
    e.add_argument("--dataset", help="dataset root; ground truth read from poses/<seq>.txt")
    e.add_argument("--seq", help="sequence id used with --dataset")
    e.add_argument("--align", choices=[m.value for m in AlignMode])
    e.add_argument("--out", help="report directory (metrics.csv, metrics.json, trajectory.png)")
    e.add_argument("--manifest", help="repeat a previous evaluation from its manifest")

    s = sub.add_parser("synth", help="export a synthetic sequence in KITTI layout")
    s.add_argument("--out", required=True, help="dataset root to write")
    s.add_argument("--seq", help="sequence id (default 00)")
    s.add_argument("--mode", choices=[m.value for m in SceneMode])
    s.add_argument("--points", type=int, help="co-visible points per frame")
    s.add_argument("--frames", type=int, help="number of frames")
    s.add_argument("--seed", type=_u64)
    s.add_argument("--speed", type=_positive_float, help="metres per frame")
    s.add_argument("--yaw-rate", type=float, help="degrees per frame")
    s.add_argument("--near", type=_positive_float, help="nearest point depth (m)")
    s.add_argument("--far", type=_positive_float, help="visibility horizon (m)")
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--depth", help="depth root (default <out>/depth)")
    s.add_argument("--manifest", help="repeat a previous export from its manifest")

    pl = sub.add_parser("plot", help="top-down SVG of one or more trajectories")
    pl.add_argument("poses", nargs="*", help="KITTI pose files")
    pl.add_argument("--gt", help="ground-truth pose file (drawn dashed)")
    pl.add_argument("--dataset", help="dataset root; ground truth read from poses/<seq>.txt")
    pl.add_argument("--seq", help="sequence id used with --dataset")
    pl.add_argument("--labels", help="comma-separated legend labels")
    pl.add_argument("--out", required=True, help="SVG file to write")
    pl.add_argument("--manifest", help="repeat a previous plot from its manifest")
    return p


def _resolve(args: argparse.Namespace) -> dict:
    """Merge command-line values over manifest values over defaults."""
    cmd = args.command
    manifest = {}
    if getattr(args, "manifest", None):
        manifest = _read_manifest(args.manifest, cmd)
    merged = dict(DEFAULTS[cmd])
    merged.update({k: v for k, v in manifest.get("args", {}).items() if k in RECORDED[cmd]})
    for key, value in vars(args).items():
        if (value is not None and value != []) or key not in merged:
            merged[key] = value
    merged["_manifest"] = manifest
    return merged


def _read_manifest(path, cmd: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: not a JSON manifest ({exc})") from None
    if data.get("command") != cmd:
        raise CliError(f"{path}: manifest is for '{data.get('command')}', not '{cmd}'")
    return data


def _write_json(path: Path, data: dict):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", newline="\n")


def _abs(p):
    return None if p is None else str(Path(p).resolve())


def _recorded(cmd: str, a: dict) -> dict:
    return {k: a.get(k) for k in RECORDED[cmd]}


def _gt_path(a: dict):
    if a.get("gt"):
        return Path(a["gt"])
    if a.get("dataset"):
        if not a.get("seq"):
            raise CliError("--dataset needs --seq to locate ground truth")
        return Path(a["dataset"]) / "poses" / f"{a['seq']}.txt"
    return None


# --- commands ----------------------------------------------------------------

def cmd_run(a: dict) -> int:
    if not a.get("dataset"):
        raise CliError("run needs --dataset (or --manifest)")
    manifest = a["_manifest"]
    cfg = PipelineConfig()
    if a.get("config"):
        cfg = load_config(a["config"])
    elif manifest.get("config"):
        cfg = config_from_dict(manifest["config"])
    if a.get("seed") is not None:
        cfg = replace(cfg, seed=a["seed"])
    if a.get("depth_scale") is not None:
        cfg = replace(cfg, depth_scale=a["depth_scale"])

    seq = a["seq"]
    src = load_sequence(a["dataset"], seq, a.get("depth"))
    if a.get("depth") and not src.depth_dir.is_dir():
        log.warning("depth directory %s not found; running unscaled", src.depth_dir)
        src = replace(src, depth_dir=None)
    if a.get("frames") is not None:
        if a["frames"] < 2:
            raise CliError("--frames must be at least 2")
        src = replace(src, n_frames=min(src.n_frames, a["frames"]))

    out = Path(a["out"])
    out.mkdir(parents=True, exist_ok=True)
    poses_path = out / f"{seq}_poses.txt"
    decisions_path = out / f"{seq}_decisions.jsonl"
    manifest_path = out / f"{seq}_manifest.json"

    t0 = time.perf_counter()
    traj, decisions = process_sequence(src, cfg)
    duration = time.perf_counter() - t0
    write_kitti_poses(traj, poses_path)
    write_decisions(decisions, decisions_path)

    recorded = _recorded("run", a)
    recorded.update(dataset=_abs(a["dataset"]), depth=_abs(a.get("depth")))
    _write_json(manifest_path, {
        "command": "run",
        "version": __version__,
        "args": recorded,
        "sequence": seq,
        "seed": cfg.seed,
        "config": config_to_dict(cfg),
        "outputs": {"poses": str(poses_path), "decisions": str(decisions_path),
                    "manifest": str(manifest_path)},
        "decision_log": str(decisions_path),
        "frames": len(traj),
        "duration_s": round(duration, 3),
    })
    methods = {}
    for d in decisions:
        methods[d.method.value] = methods.get(d.method.value, 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(methods.items()))
    print(f"{seq}: {len(traj)} poses -> {poses_path} ({summary})")
    return 0


def _metrics_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = report.as_dict()
    w.writerow(list(d))
    w.writerow([f"{v:.6f}" for v in d.values()])
    return buf.getvalue()


def cmd_eval(a: dict) -> int:
    if not a.get("estimate"):
        raise CliError("eval needs an estimated pose file")
    gt_path = _gt_path(a)
    if gt_path is None:
        raise CliError("eval needs --gt or --dataset/--seq")
    est = read_kitti_poses(a["estimate"])
    gt = read_kitti_poses(gt_path)
    report = evaluate(est, gt, a["align"])
    text = _metrics_csv(report)
    sys.stdout.write(text)
    if a.get("out"):
        out = Path(a["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(text, newline="\n")
        _write_json(out / "metrics.json", {"align": a["align"], **report.as_dict()})
        aligned = umeyama_align(est, gt, a["align"])
        save_report_figure(
            [Series("estimate", aligned), Series("ground truth", gt, dashed=True)],
            out / "trajectory.png", gt=gt,
        )
        recorded = _recorded("eval", a)
        recorded.update(estimate=_abs(a["estimate"]), gt=_abs(gt_path), dataset=None, seq=None)
        _write_json(out / "eval_manifest.json", {
            "command": "eval", "version": __version__, "args": recorded,
            "outputs": {"csv": str(out / "metrics.csv"), "json": str(out / "metrics.json"),
                        "figure": str(out / "trajectory.png")},
        })
    return 0


def cmd_synth(a: dict) -> int:
    if a["points"] < 50 or a["frames"] < 2:
        raise CliError("synth needs --points >= 50 and --frames >= 2")
    if a["near"] >= a["far"]:
        raise CliError("--near must be smaller than --far")
    k = CameraIntrinsics(
        fx=250.0 * a["width"] / DEFAULT_WIDTH, fy=250.0 * a["width"] / DEFAULT_WIDTH,
        cx=(a["width"] - 1) / 2.0, cy=(a["height"] - 1) / 2.0,
    )
    scene = generate_scene(
        a["mode"], a["points"], a["frames"], a["seed"], speed=a["speed"], yaw_rate=a["yaw_rate"],
        depth_range=(a["near"], a["far"]), intrinsics=k, width=a["width"], height=a["height"],
    )
    out = Path(a["out"])
    try:
        paths = export_kitti(scene, out, a["seq"], a.get("depth"))
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}") from None
    _write_json(out / f"synth_{a['seq']}_manifest.json", {
        "command": "synth", "version": __version__, "args": _recorded("synth", a),
        "outputs": {k: str(v) for k, v in paths.items()},
    })
    print(f"wrote {a['frames']} frames of a {a['mode']} scene to {out}")
    return 0


def cmd_plot(a: dict) -> int:
    poses = list(a.get("poses") or [])
    gt_path = _gt_path(a)
    if not poses and gt_path is None:
        raise CliError("plot needs at least one pose file")
    labels = a["labels"].split(",") if a.get("labels") else [Path(p).stem for p in poses]
    if len(labels) != len(poses):
        raise CliError(f"{len(labels)} labels for {len(poses)} pose files")
    series = [Series(lbl, read_kitti_poses(p)) for lbl, p in zip(labels, poses)]
    if gt_path is not None:
        series.append(Series("ground truth", read_kitti_poses(gt_path), dashed=True))
    out = Path(a["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_svg(series, out)
    recorded = _recorded("plot", a)
    recorded.update(poses=[_abs(p) for p in poses], gt=_abs(gt_path), dataset=None, seq=None)
    _write_json(out.with_name(out.stem + "_manifest.json"), {
        "command": "plot", "version": __version__, "args": recorded, "outputs": {"svg": str(out)},
    })
    return 0


COMMANDS = {"run": cmd_run, "eval": cmd_eval, "synth": cmd_synth, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](_resolve(args))
    except (CliError, MonoVOError, OSError, ValueError) as exc:
        msg = str(exc)
        if isinstance(exc, FileNotFoundError) and exc.filename and str(exc.filename) not in msg:
            msg = f"{msg}: {exc.filename}"
        print(f"monovo {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
