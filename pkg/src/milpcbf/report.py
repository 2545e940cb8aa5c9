"""Run artifacts: trajectory CSV, JSON summary and SVG figures.

CSV columns, in order::

    t, px, py[, vx, vy], u_ref_x, u_ref_y, u_star_x, u_star_y, h_1 .. h_K

with one row per logged step. Floats are written with ``repr`` (shortest
round-trip form), so identical runs give byte-identical files.
"""

from __future__ import annotations

import io
import json
import math
from xml.sax.saxutils import escape

import numpy as np

from .geometry import configuration_obstacle
from .scenario import Scenario
from .sim import TrajectoryLog

COLORS = {
    "MilpMpcCbf": "#1f5fbf",
    "MilpMpcOnly": "#d03c9a",
    "ClfCbfQp": "#e07b00",
}


def csv_header(lg: TrajectoryLog) -> list[str]:
    state = ["px", "py"] if lg.x.shape[1] == 2 else ["px", "py", "vx", "vy"]
    K = lg.h.shape[1]
    return (["t"] + state + ["u_ref_x", "u_ref_y", "u_star_x", "u_star_y"]
            + [f"h_{j + 1}" for j in range(K)])


def _fmt(v) -> str:
    v = float(v)
    if v == 0.0:
        return "0.0"  # no signed zeros
    return repr(v)


def to_csv(lg: TrajectoryLog) -> str:
    out = io.StringIO()
    out.write(",".join(csv_header(lg)) + "\n")
    for k in range(len(lg)):
        row = [lg.t[k], *lg.x[k], *lg.u_ref[k], *lg.u_star[k], *lg.h[k]]
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def summary_dict(lg: TrajectoryLog, sc: Scenario | None = None) -> dict:
    d = {k: _jsonable(v) for k, v in lg.summary.items()}
    d["controller"] = lg.controller
    d["scenario"] = lg.scenario
    if sc is not None:
        d["dynamics"] = sc.dynamics.value
    d["events"] = [list(e) for e in lg.events[:50]]
    return d


def to_json(lg: TrajectoryLog, sc: Scenario | None = None) -> str:
    return json.dumps(summary_dict(lg, sc), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------- SVG

class _Canvas:
    def __init__(self, workspace, px_per_unit: float = 50.0, margin: float = 20.0):
        self.x0, self.y0, self.x1, self.y1 = (float(v) for v in workspace)
        self.s = px_per_unit
        self.m = margin
        self.w = (self.x1 - self.x0) * self.s + 2 * margin
        self.h = (self.y1 - self.y0) * self.s + 2 * margin
        self.parts: list[str] = []

    def xy(self, p) -> str:
        x = self.m + (p[0] - self.x0) * self.s
        y = self.m + (self.y1 - p[1]) * self.s
        return f"{x:.2f},{y:.2f}"

    def polygon(self, V, **style):
        pts = " ".join(self.xy(v) for v in V)
        self.parts.append(f'<polygon points="{pts}"{_style(style)}/>')

    def polyline(self, P, **style):
        if len(P) < 2:
            return
        pts = " ".join(self.xy(p) for p in P)
        self.parts.append(f'<polyline points="{pts}" fill="none"{_style(style)}/>')

    def circle(self, p, r_px: float, **style):
        x, y = self.xy(p).split(",")
        self.parts.append(f'<circle cx="{x}" cy="{y}" r="{r_px:.1f}"{_style(style)}/>')

    def text(self, p, s: str, size: int = 12, **style):
        x, y = self.xy(p).split(",")
        self.parts.append(f'<text x="{x}" y="{y}" font-size="{size}" '
                          f'font-family="sans-serif"{_style(style)}>{escape(s)}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" '
                f'height="{self.h:.0f}" viewBox="0 0 {self.w:.0f} {self.h:.0f}">')
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


def _style(style: dict) -> str:
    return "".join(f' {k.replace("_", "-")}="{v}"' for k, v in style.items())


def _segments(mask):
    """(start, stop) index pairs of the True runs in ``mask``."""
    out, start = [], None
    for k, v in enumerate(mask):
        if v and start is None:
            start = k
        elif not v and start is not None:
            out.append((start, k))
            start = None
    if start is not None:
        out.append((start, len(mask)))
    return out


def _scene(sc: Scenario) -> _Canvas:
    cv = _Canvas(sc.workspace)
    x0, y0, x1, y1 = sc.workspace
    cv.polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], fill="white", stroke="#444")
    for j, o in enumerate(sc.obstacles):
        co = configuration_obstacle(sc.robot, o, j)
        cv.polygon(co.vertices0, fill="none", stroke="#999", stroke_dasharray="4,3")
        cv.polygon(o.vertices, fill="#8c8c8c", stroke="#555")
        c = o.vertices.mean(axis=0)
        cv.text(c, str(j + 1), size=11, fill="white", text_anchor="middle")
    cv.circle(sc.x_s[:2], 4, fill="black")
    cv.circle(sc.x_g[:2], 5, fill="none", stroke="#2a9d2a", stroke_width=2)
    return cv


def _draw_run(cv: _Canvas, sc: Scenario, lg: TrajectoryLog, color: str, robots: int = 6):
    P = lg.x[:, :2]
    cv.polyline(P, stroke=color, stroke_width=2)
    for a, b in _segments(lg.intervened):
        cv.polyline(P[a:b + 1], stroke="#22aa44", stroke_width=4, stroke_opacity=0.8)
    idx = np.unique(np.linspace(0, len(lg) - 1, robots).round().astype(int))
    for k in idx:
        cv.polygon(sc.robot.vertices + P[k], fill=color, fill_opacity=0.25, stroke=color)


def run_svg(sc: Scenario, lg: TrajectoryLog) -> str:
    cv = _scene(sc)
    _draw_run(cv, sc, lg, COLORS.get(lg.controller, "#1f5fbf"))
    s = lg.summary
    label = (f"{lg.controller}  reached={s['reached']}  min_h={s['min_h']:.3g}  "
             f"intervention={s['intervention_time']:.2f}s")
    cv.text((sc.workspace[0] + 0.1, sc.workspace[3] - 0.3), label, size=12)
    return cv.render()


def compare_svg(sc: Scenario, logs: dict) -> str:
    cv = _scene(sc)
    for name, lg in logs.items():
        _draw_run(cv, sc, lg, COLORS.get(name, "#333"), robots=4)
    y = sc.workspace[3] - 0.3
    for name in logs:
        cv.text((sc.workspace[0] + 0.1, y), name, size=12, fill=COLORS.get(name, "#333"))
        y -= 0.35
    return cv.render()


def compare_table(logs: dict) -> str:
    """Plain-text comparison; ``min_h`` is the true signed distance."""
    head = f"{'controller':<12} {'reached':>7} {'t_reach':>8} {'min_h':>10} {'stall':>6} {'interv_s':>9}"
    lines = [head, "-" * len(head)]
    for name, lg in logs.items():
        s = lg.summary
        t = "-" if s["t_reach"] is None else f"{s['t_reach']:.2f}"
        lines.append(f"{name:<12} {str(s['reached']):>7} {t:>8} {s['min_h']:>10.3g} "
                     f"{str(s['stall']):>6} {s['intervention_time']:>9.2f}")
    return "\n".join(lines) + "\n"
