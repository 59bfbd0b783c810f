"""Static SVG overlays of truth, estimates and measurements.

Hand-rolled SVG so the output bytes are fully deterministic; ellipses are
drawn at the 2-sigma boundary of a Gaussian with the extent as covariance.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ggiwtrack import simulate
from ggiwtrack.experiment import ExperimentConfig

TRUTH_COLOR = "#9aa5b1"
TARGET_COLORS = ("#1f6fb2", "#d95f02", "#2a9d54", "#8b5cf6", "#c02d4e")

_CANVAS_W = 900.0
_MARGIN = 30.0


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    """Scene-to-pixel mapping with the y axis flipped."""

    def __init__(self, region):
        x0, x1, y0, y1 = region
        self.x0, self.y0 = x0, y0
        self.scale = (_CANVAS_W - 2 * _MARGIN) / (x1 - x0)
        self.height = (y1 - y0) * self.scale + 2 * _MARGIN
        self.y1 = y1

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return (_MARGIN + (x - self.x0) * self.scale,
                _MARGIN + (self.y1 - y) * self.scale)


def _ellipse_svg(canvas, cx, cy, major, minor, angle, color, width, dashed=False):
    px, py = canvas.pt(cx, cy)
    rx = 2.0 * major * canvas.scale
    ry = 2.0 * minor * canvas.scale
    deg = -math.degrees(angle)
    dash = ' stroke-dasharray="4 3"' if dashed else ""
    return (f'<ellipse cx="0" cy="0" rx="{_fmt(rx)}" ry="{_fmt(ry)}" '
            f'fill="none" stroke="{color}" stroke-width="{width}"{dash} '
            f'transform="translate({_fmt(px)} {_fmt(py)}) rotate({_fmt(deg)})"/>')


def _extent_ellipse(xx, xy, yy):
    w, q = np.linalg.eigh(np.array([[xx, xy], [xy, yy]]))
    w = np.clip(w, 0.0, None)
    return float(np.sqrt(w[1])), float(np.sqrt(w[0])), float(np.arctan2(q[1, 1], q[0, 1]))


def render_overlay(config: ExperimentConfig, estimates_by_step, run: int,
                   stride: int) -> str:
    """SVG text with one group per rendered step."""
    scenario = config.scenario
    canvas = _Canvas(scenario.region)
    truth = simulate.generate_truth(scenario)
    frames = simulate.generate_run(scenario, run=run, truth=truth)
    steps = range(0, scenario.duration_steps, stride)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(_CANVAS_W)}" '
        f'height="{_fmt(canvas.height)}" viewBox="0 0 {_fmt(_CANVAS_W)} {_fmt(canvas.height)}">',
        f'<rect width="{_fmt(_CANVAS_W)}" height="{_fmt(canvas.height)}" fill="white"/>',
    ]
    for step in steps:
        group = [f'<g id="step{step}">']
        for x, y in frames[step].points:
            px, py = canvas.pt(x, y)
            group.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="1.2" '
                         f'fill="#c9ced6"/>')
        for tgt, track in enumerate(truth):
            e = track.extents[step]
            major, minor, angle = _extent_ellipse(e[0, 0], e[0, 1], e[1, 1])
            cx, cy = track.centers[step]
            group.append(_ellipse_svg(canvas, cx, cy, major, minor, angle,
                                      TRUTH_COLOR, 1.0, dashed=True))
        for tgt, row in enumerate(estimates_by_step.get(step, [])):
            color = TARGET_COLORS[tgt % len(TARGET_COLORS)]
            major, minor, angle = _extent_ellipse(row["vxx"] / (row["v"] - 6.0),
                                                  row["vxy"] / (row["v"] - 6.0),
                                                  row["vyy"] / (row["v"] - 6.0))
            group.append(_ellipse_svg(canvas, row["mx"], row["my"], major, minor,
                                      angle, color, 1.5))
        group.append("</g>")
        parts.extend(group)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def load_estimates(artifact_dir: Path, run: int) -> dict:
    """Per-step estimate rows of one run from estimates.csv."""
    by_step: dict[int, list] = {}
    with open(artifact_dir / "estimates.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["run"]) != run:
                continue
            step = int(row["step"])
            by_step.setdefault(step, []).append(
                {key: float(row[key]) for key in ("mx", "my", "v", "vxx", "vxy", "vyy")})
    return by_step


def plot_overlay(artifact_dir, stride: int = 3) -> list[Path]:
    """Write an overlay SVG for the first completed run of an artifact.

    Returns the written paths; an artifact without any completed run is a
    no-op with a warning.
    """
    artifact_dir = Path(artifact_dir)
    config = ExperimentConfig.from_json((artifact_dir / "experiment.json").read_text())
    summary = json.loads((artifact_dir / "summary.json").read_text())
    if summary.get("completed_runs", 0) < 1:
        print("warning: artifact has no completed runs; nothing to plot")
        return []
    failed = set(int(k) for k in summary.get("failed_runs", {}))
    run = next(r for r in range(config.mc_runs) if r not in failed)
    estimates = load_estimates(artifact_dir, run)
    svg = render_overlay(config, estimates, run, stride)
    path = artifact_dir / f"overlay_run{run}.svg"
    path.write_text(svg)
    return [path]
