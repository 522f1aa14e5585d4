"""SVG rendering of a planned step: terrain, obstacles, traces and stick
figures at the decile phases.  Fixed scale of 100 px per meter; purely
illustrative output."""

from __future__ import annotations

import numpy as np

from .environment import ObstacleBox
from .kinematics import ExoModel
from .planner import GaitPlan

__all__ = ["render_plan_svg"]

SCALE = 100.0  # px per meter


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, x_range, y_range, pad=0.15):
        self.x0 = x_range[0] - pad
        self.y1 = y_range[1] + pad
        self.width = (x_range[1] - x_range[0] + 2 * pad) * SCALE
        self.height = (y_range[1] - y_range[0] + 2 * pad) * SCALE
        self.parts: list[str] = []

    def pt(self, x, y):
        return (x - self.x0) * SCALE, (self.y1 - y) * SCALE

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        coords = " ".join(
            f"{_fmt(px)},{_fmt(py)}" for px, py in (self.pt(x, y) for x, y in zip(xs, ys))
        )
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{dash_attr}/>'
        )

    def line(self, a, b, color, width=2.0):
        (x1, y1), (x2, y2) = self.pt(*a), self.pt(*b)
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{width}"/>'
        )

    def rect(self, x, y, w, h, color):
        px, py = self.pt(x, y + h)
        self.parts.append(
            f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(w * SCALE)}" '
            f'height="{_fmt(h * SCALE)}" fill="{color}" fill-opacity="0.5"/>'
        )

    def circle(self, x, y, r, color):
        px, py = self.pt(x, y)
        self.parts.append(
            f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{_fmt(r)}" fill="{color}"/>'
        )

    def to_svg(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
            f"{body}\n</svg>\n"
        )


def render_plan_svg(
    plan: GaitPlan,
    model: ExoModel,
    ground,
    obstacles: list[tuple[ObstacleBox, float]] = (),
) -> str:
    """Render terrain line, obstacle boxes, foot/CoM traces and 10 stick figures.

    ``ground`` maps x to terrain height; ``obstacles`` are (box, base_y)
    pairs.
    """
    foot = plan.foot
    com = plan.com
    xs = np.concatenate([foot[:, 0], com[:, 0], [0.0]])
    ys = np.concatenate([foot[:, 1], com[:, 1], [0.0]])
    canvas = _Canvas((float(xs.min()), float(xs.max())), (float(ys.min()) - 0.05, float(ys.max()) + 0.1))

    gx = np.linspace(xs.min() - 0.1, xs.max() + 0.1, 200)
    gy = np.asarray(ground(gx))
    canvas.polyline(gx, gy, "#555555", width=2.0)
    for box, base in obstacles:
        canvas.rect(box.x_start, base, box.length, box.height, "#cc6666")

    canvas.polyline(foot[:, 0], foot[:, 1], "#1f77b4", width=2.0)
    canvas.polyline(com[:, 0], com[:, 1], "#2ca02c", width=2.0, dash="4,3")

    deciles = np.linspace(0, plan.phases.size - 1, 10).astype(int)
    for i in deciles:
        hip = com[i]
        # support leg: hip -> knee -> fixed ankle at the origin
        th, tk = plan.support_angles[i]
        knee_s = hip + model.l1 * np.array([np.sin(th), -np.cos(th)])
        ankle_s = knee_s + model.l2 * np.array([np.sin(th + tk), -np.cos(th + tk)])
        canvas.line(hip, knee_s, "#888888", width=1.2)
        canvas.line(knee_s, ankle_s, "#888888", width=1.2)
        # swing leg
        th, tk = plan.swing_angles[i]
        knee_w = hip + model.l1 * np.array([np.sin(th), -np.cos(th)])
        ankle_w = knee_w + model.l2 * np.array([np.sin(th + tk), -np.cos(th + tk)])
        canvas.line(hip, knee_w, "#d62728", width=1.2)
        canvas.line(knee_w, ankle_w, "#d62728", width=1.2)
        canvas.circle(hip[0], hip[1], 2.5, "#2ca02c")
    return canvas.to_svg()
