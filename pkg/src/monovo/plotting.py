"""Top-down (XZ) trajectory figures.

``trajectory_svg`` hand-writes the SVG so the bytes depend only on the input
poses. ``save_report_figure`` renders the same view, plus per-frame position
error when ground truth is given, to a raster file through matplotlib.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dataio import Trajectory

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
GT_COLOR = "#000000"


@dataclass(frozen=True)
class Series:
    label: str
    trajectory: Trajectory
    dashed: bool = False


def _xz(traj: Trajectory) -> np.ndarray:
    p = traj.positions()
    return np.column_stack([p[:, 0], p[:, 2]])


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _nice_step(span: float, target: int = 5) -> float:
    raw = span / max(target, 1)
    mag = 10 ** np.floor(np.log10(raw))
    for m in (1, 2, 5, 10):
        if m * mag >= raw:
            return float(m * mag)
    return float(10 * mag)


def trajectory_svg(series: Sequence[Series], size: int = 600, margin: int = 60) -> str:
    """SVG document with one polyline per series in the XZ plane (z up).

    Both axes share one scale so the aspect ratio is preserved.
    """
    if not series:
        raise ValueError("need at least one trajectory")
    pts = [_xz(s.trajectory) for s in series]
    allp = np.vstack(pts)
    lo = allp.min(axis=0)
    hi = allp.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    center = (lo + hi) / 2.0
    plot = size - 2 * margin
    scale = plot / span

    def to_px(p):
        x = size / 2.0 + (p[..., 0] - center[0]) * scale
        y = size / 2.0 - (p[..., 1] - center[1]) * scale
        return x, y

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
        f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
        'fill="none" stroke="#888888" stroke-width="1"/>',
    ]

    # ticks on the shared scale
    step = _nice_step(span)
    half = span / 2.0
    for axis in (0, 1):
        first = np.ceil((center[axis] - half) / step) * step
        v = first
        while v <= center[axis] + half + 1e-9:
            if axis == 0:
                x, _ = to_px(np.array([v, center[1]]))
                out.append(
                    f'<text x="{_fmt(x)}" y="{size - margin + 16}" font-size="10" '
                    f'text-anchor="middle">{_fmt(v)}</text>'
                )
            else:
                _, y = to_px(np.array([center[0], v]))
                out.append(
                    f'<text x="{margin - 6}" y="{_fmt(y)}" font-size="10" '
                    f'text-anchor="end">{_fmt(v)}</text>'
                )
            v += step
    out.append(f'<text x="{size / 2:.0f}" y="{size - 12}" font-size="12" text-anchor="middle">x [m]</text>')
    out.append(
        f'<text x="14" y="{size / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {size / 2:.0f})">z [m]</text>'
    )

    color_i = 0
    colors = []
    for s, p in zip(series, pts):
        if s.dashed:
            color = GT_COLOR
        else:
            color = PALETTE[color_i % len(PALETTE)]
            color_i += 1
        colors.append(color)
        x, y = to_px(p)
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(x, y))
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
            f'data-label="{escape(s.label, {chr(34): "&quot;"})}" points="{coords}"/>'
        )

    lx, ly = margin + 10, margin + 16
    for i, (s, color) in enumerate(zip(series, colors)):
        y = ly + 16 * i
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(
            f'<line x1="{lx}" y1="{y - 4}" x2="{lx + 24}" y2="{y - 4}" stroke="{color}" '
            f'stroke-width="1.5"{dash}/>'
        )
        out.append(f'<text x="{lx + 30}" y="{y}" font-size="11">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_trajectory_svg(series: Sequence[Series], path) -> Path:
    path = Path(path)
    path.write_text(trajectory_svg(series), newline="\n")
    return path


def save_report_figure(series: Sequence[Series], path, gt: Optional[Trajectory] = None) -> Path:
    """Matplotlib rendering of the XZ view; adds a position-error panel when ``gt`` is given."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = 2 if gt is not None else 1
    fig, axes = plt.subplots(1, panels, figsize=(6 * panels, 5), squeeze=False)
    ax = axes[0, 0]
    for s in series:
        p = _xz(s.trajectory)
        ax.plot(p[:, 0], p[:, 1], "k--" if s.dashed else "-", label=s.label, lw=1.2)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", frameon=False)
    ax.set_title("Trajectory (top view)")

    if gt is not None:
        ax2 = axes[0, 1]
        g = gt.positions()
        for s in series:
            if s.dashed or len(s.trajectory) != len(gt):
                continue
            err = np.linalg.norm(s.trajectory.positions() - g, axis=1)
            ax2.plot(list(gt.frames), err, label=s.label, lw=1.2)
        ax2.set_xlabel("frame")
        ax2.set_ylabel("position error [m]")
        ax2.set_title("Absolute position error")
        ax2.legend(loc="best", frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
