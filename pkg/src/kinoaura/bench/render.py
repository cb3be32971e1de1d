"""SVG 1.1 rendering of a workspace and execution traces (top-down projection)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from kinoaura.world import Box, Environment

WIDTH = 800.0
MARGIN = 20.0
_STYLE = """
.workspace { fill: #ffffff; stroke: #444444; stroke-width: 1 }
.obstacle { fill: #111111; stroke: none }
.inflated { fill: none; stroke: #888888; stroke-width: 1; stroke-dasharray: 4 3 }
.goal { fill: #2ca02c; fill-opacity: 0.25; stroke: #2ca02c; stroke-width: 1.5 }
.start { fill: #1f77b4 }
.nominal { fill: none; stroke: #1f77b4; stroke-width: 1.5; stroke-dasharray: 6 3 }
.executed { fill: none; stroke: #d62728; stroke-width: 2 }
.replanned { fill: none; stroke: #ff7f0e; stroke-width: 1.5 }
"""


class RenderError(ValueError):
    """The trace or environment cannot be drawn."""


@dataclass
class Trace:
    """State sequences to draw; any of them may be empty."""

    executed: np.ndarray
    nominal: np.ndarray | None = None
    replanned: np.ndarray | None = None

    @classmethod
    def from_report(cls, report) -> "Trace":
        return cls(
            report.executed_states,
            report.nominal_plan.states if report.nominal_plan is not None else None,
            report.final_plan.states if report.final_plan is not None else None,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "Trace":
        def arr(key):
            v = d.get(key)
            return np.asarray(v, dtype=float) if v else None
        executed = arr("executed")
        if executed is None:
            start = d.get("start")
            executed = np.asarray([start], dtype=float) if start else np.zeros((0, 0))
        return cls(executed, arr("nominal_plan"), arr("final_plan"))


class _Frame:
    """Maps workspace (x, y) to pixel coordinates, clamping to the viewport."""

    def __init__(self, lower, upper):
        self.x0, self.y0 = float(lower[0]), float(lower[1])
        self.x1, self.y1 = float(upper[0]), float(upper[1])
        self.scale = (WIDTH - 2 * MARGIN) / (self.x1 - self.x0)
        self.width = WIDTH
        self.height = (self.y1 - self.y0) * self.scale + 2 * MARGIN

    def px(self, x, y) -> tuple[float, float]:
        x = min(max(x, self.x0), self.x1)
        y = min(max(y, self.y0), self.y1)
        return MARGIN + (x - self.x0) * self.scale, MARGIN + (self.y1 - y) * self.scale

    def length(self, d: float) -> float:
        return d * self.scale


def _num(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") if math.isfinite(v) else "0"


def _rect(frame: _Frame, lo, hi, cls: str) -> str:
    xa, ya = frame.px(lo[0], hi[1])
    xb, yb = frame.px(hi[0], lo[1])
    return (f'<rect class="{cls}" x="{_num(xa)}" y="{_num(ya)}" width="{_num(xb - xa)}" '
            f'height="{_num(yb - ya)}"/>')


def _circle(frame: _Frame, c, r, cls: str) -> str:
    cx, cy = frame.px(c[0], c[1])
    return f'<circle class="{cls}" cx="{_num(cx)}" cy="{_num(cy)}" r="{_num(frame.length(r))}"/>'


def _polyline(frame: _Frame, pts: np.ndarray, cls: str) -> str | None:
    pts = pts[np.all(np.isfinite(pts), axis=1)] if len(pts) else pts
    if len(pts) < 2:
        return None
    coords = " ".join(f"{_num(a)},{_num(b)}" for a, b in (frame.px(p[0], p[1]) for p in pts))
    return f'<polyline class="{cls}" points="{coords}"/>'


def render_svg(env: Environment, trace: Trace | None = None, space=None, title: str = "") -> str:
    """Top-down view of the first two position dimensions.

    Obstacles are filled, their inflated outlines dashed. The goal circle's
    radius is the goal radius divided by the position weight when the state
    space is given. Points outside the workspace are clamped to its border.
    """
    dims = tuple(env.position_dims)
    if len(dims) < 2:
        raise RenderError("rendering needs at least two position dimensions")
    frame = _Frame(env.lower, env.upper)
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(frame.width)}" '
        f'height="{_num(frame.height)}" viewBox="0 0 {_num(frame.width)} {_num(frame.height)}">',
    ]
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    out.append(f"<style type=\"text/css\"><![CDATA[{_STYLE}]]></style>")
    out.append(_rect(frame, env.lower, env.upper, "workspace"))
    infl = env.inflation
    for o in env.obstacles:
        if isinstance(o, Box):
            out.append(_rect(frame, o.lower, o.upper, "obstacle"))
            if infl > 0:
                lo = np.asarray(o.lower[:2]) - infl
                hi = np.asarray(o.upper[:2]) + infl
                out.append(_rect(frame, lo, hi, "inflated"))
        else:
            out.append(_circle(frame, o.center, o.radius, "obstacle"))
            if infl > 0:
                out.append(_circle(frame, o.center, o.radius + infl, "inflated"))
    g = env.goal
    if g is not None:
        center = np.asarray(g.center)[list(dims[:2])]
        r = g.radius
        if space is not None:
            w = np.asarray(space.weights)[list(dims[:2])]
            r = r / float(np.max(w))
        out.append(_circle(frame, center, r, "goal"))
    if trace is not None:
        for pts, cls in ((trace.nominal, "nominal"), (trace.replanned, "replanned"), (trace.executed, "executed")):
            if pts is None or not len(pts):
                continue
            pts = np.asarray(pts, dtype=float)
            if pts.ndim != 2 or pts.shape[1] <= max(dims[:2]):
                raise RenderError(f"{cls} states have too few dimensions for the position projection")
            line = _polyline(frame, pts[:, list(dims[:2])], cls)
            if line:
                out.append(line)
        ex = np.asarray(trace.executed, dtype=float)
        if ex.ndim == 2 and len(ex) and ex.shape[1] > max(dims[:2]):
            p0 = ex[0, list(dims[:2])]
            if np.all(np.isfinite(p0)):
                out.append(_circle(frame, p0, 4.0 / frame.scale, "start"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return quoteattr(text)[1:-1]
