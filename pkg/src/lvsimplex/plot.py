"""Ternary SVG rendering of trajectories on S^2."""

from __future__ import annotations

import math

import numpy as np

from .simplex import face_center, iter_faces

WIDTH, HEIGHT = 800, 693
MARGIN_X = 40.0
SIDE = WIDTH - 2 * MARGIN_X
TRI_H = SIDE * math.sqrt(3) / 2
MARGIN_Y = (HEIGHT - TRI_H) / 2
VERTICES = np.array([
    [MARGIN_X, HEIGHT - MARGIN_Y],           # e1 bottom left
    [WIDTH - MARGIN_X, HEIGHT - MARGIN_Y],   # e2 bottom right
    [WIDTH / 2, MARGIN_Y],                   # e3 top
])

PALETTE = {
    "background": "#ffffff",
    "edge": "#333333",
    "center": "#9e9e9e",
    "path": "#1f77b4",
    "start": "#2ca02c",
    "end": "#d62728",
    "text": "#333333",
}
MAX_ITERATE_MARKERS = 2000


def to_canvas(points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates ``(n, 3)`` to canvas pixels ``(n, 2)``."""
    return np.asarray(points, dtype=float) @ VERTICES


def _f(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _circle(xy, r, color, cls):
    return (f'<circle class="{cls}" cx="{_f(xy[0])}" cy="{_f(xy[1])}" r="{r}" '
            f'fill="{color}"/>')


def render_ternary(points: np.ndarray, title: str = "") -> str:
    """Deterministic SVG: triangle, face centers, path, start and end markers.

    Iterates that land on the same pixel (to 1e-3) share one marker, so a
    fixed point draws a single marker and a 2-cycle draws two.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("ternary plots need points with exactly 3 coordinates")
    xy = to_canvas(pts)
    keys = [(_f(a), _f(b)) for a, b in xy]
    unique: list[int] = []
    seen = set()
    for i, k in enumerate(keys):
        if k not in seen:
            seen.add(k)
            unique.append(i)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="{PALETTE["background"]}"/>']
    tri = " ".join(f"{_f(x)},{_f(y)}" for x, y in VERTICES)
    out.append(f'<polygon class="simplex" points="{tri}" fill="none" '
               f'stroke="{PALETTE["edge"]}" stroke-width="1.5"/>')
    labels = [("e1", VERTICES[0] + (-22, 20)), ("e2", VERTICES[1] + (6, 20)),
              ("e3", VERTICES[2] + (10, 0))]
    for text, (x, y) in labels:
        out.append(f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="14" '
                   f'fill="{PALETTE["text"]}">{text}</text>')
    for face in iter_faces(3):
        out.append(_circle(to_canvas(face_center(face)[None])[0], 3, PALETTE["center"],
                           "center"))
    if title:
        out.append(f'<text x="{_f(MARGIN_X)}" y="20" font-family="sans-serif" '
                   f'font-size="14" fill="{PALETTE["text"]}">{_escape(title)}</text>')

    if len(unique) == 1:
        out.append(_circle(xy[0], 6, PALETTE["end"], "traj point"))
    else:
        path = " ".join(f"{a},{b}" for a, b in keys)
        out.append(f'<polyline class="traj path" points="{path}" fill="none" '
                   f'stroke="{PALETTE["path"]}" stroke-width="1.2"/>')
        if len(unique) <= MAX_ITERATE_MARKERS:
            for i in unique:
                out.append(_circle(xy[i], 2.5, PALETTE["path"], "traj iterate"))
        out.append(_circle(xy[0], 6, PALETTE["start"], "traj start"))
        out.append(_circle(xy[-1], 6, PALETTE["end"], "traj end"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
