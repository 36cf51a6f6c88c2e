"""Plain SVG drawings of planar partitions.

Cells are clipped to a bounding box (or polygonized ball) with
Sutherland-Hodgman; output is byte-deterministic for fixed inputs.
"""
from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .geometry import ConvexCell
from .measures import Measure

__all__ = ["clip_polygon", "cell_polygon", "render_svg"]

PALETTE = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
           "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"]
BALL_SEGMENTS = 128
MAX_DOTS = 400


def clip_polygon(poly: np.ndarray, a, b: float) -> np.ndarray:
    """Part of a convex polygon with ``<y, a> >= b``."""
    if len(poly) == 0:
        return poly
    a = np.asarray(a, dtype=float)
    s = poly @ a - b
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        sp, sq = s[i], s[(i + 1) % k]
        if sp >= 0:
            out.append(p)
        if (sp >= 0) != (sq >= 0):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def _box(bbox) -> np.ndarray:
    x0, x1, y0, y1 = bbox
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def cell_polygon(cell: ConvexCell, bbox) -> np.ndarray:
    if cell.dim != 2:
        raise ValueError("only planar cells can be drawn")
    if cell.is_empty_by_construction:
        return np.zeros((0, 2))
    if cell.ball is not None:
        t = 2 * math.pi * np.arange(BALL_SEGMENTS) / BALL_SEGMENTS
        c, r = np.asarray(cell.ball.center), cell.ball.radius
        poly = c + r * np.c_[np.cos(t), np.sin(t)]
        for a, b in zip(*_box_constraints(bbox)):
            poly = clip_polygon(poly, a, b)
    else:
        poly = _box(bbox)
    A, b = cell._arrays
    for ak, bk in zip(A, b):
        if bk == -math.inf:
            continue
        poly = clip_polygon(poly, ak, bk)
    if len(poly) >= 3 and _area(poly) > 1e-12:
        return poly
    return np.zeros((0, 2))


def _box_constraints(bbox):
    x0, x1, y0, y1 = bbox
    A = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    return A, np.array([x0, -x1, y0, -y1])


def _area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def _centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    a = cross.sum() / 2
    if abs(a) < 1e-15:
        return poly.mean(axis=0)
    return np.array([((x + np.roll(x, -1)) * cross).sum(), ((y + np.roll(y, -1)) * cross).sum()]) / (6 * a)


def _auto_bbox(cells, measures) -> tuple[float, float, float, float]:
    pts = [np.asarray(mu.points) for mu in measures or []]
    for c in cells:
        if c.ball is not None:
            ctr, r = np.asarray(c.ball.center), c.ball.radius
            pts.append(np.array([ctr - r, ctr + r]))
    if not pts:
        return (-1.5, 1.5, -1.5, 1.5)
    allp = np.vstack(pts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    pad = 0.05 * max(float((hi - lo).max()), 1e-9)
    return (lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad)


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def render_svg(cells: Sequence[ConvexCell], measures: Sequence[Measure] | None = None,
               labels: Mapping[int, str] | None = None, bbox=None, size: int = 480) -> str:
    """SVG text: cell outlines, sample dots per measure and one label per cell."""
    if any(c.dim != 2 for c in cells):
        raise ValueError("only planar partitions can be drawn")
    bbox = _auto_bbox(cells, measures) if bbox is None else tuple(bbox)
    x0, x1, y0, y1 = bbox
    scale = size / max(x1 - x0, y1 - y0)
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def px(p):
        return _f((p[0] - x0) * scale), _f((y1 - p[1]) * scale)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(W)}" height="{_f(H + 20 * len(cells))}" '
           f'viewBox="0 0 {_f(W)} {_f(H + 20 * len(cells))}">',
           f'<rect x="0" y="0" width="{_f(W)}" height="{_f(H)}" fill="#ffffff" stroke="#cccccc"/>']
    polys = [cell_polygon(c, bbox) for c in cells]
    for i, poly in enumerate(polys):
        if len(poly):
            pts = " ".join(",".join(px(p)) for p in poly)
            out.append(f'<polygon points="{pts}" fill="{PALETTE[i % len(PALETTE)]}" fill-opacity="0.15" '
                       f'stroke="#333333" stroke-width="1"/>')
    for j, mu in enumerate(measures or []):
        idx = np.unique(np.linspace(0, len(mu) - 1, min(MAX_DOTS, len(mu))).astype(int))
        color = PALETTE[(j + 5) % len(PALETTE)]
        out.append(f'<g fill="{color}" fill-opacity="0.35">')
        out.extend(f'<circle cx="{px(p)[0]}" cy="{px(p)[1]}" r="1.5"/>' for p in mu.points[idx])
        out.append("</g>")
    for i, poly in enumerate(polys):
        text = f"{i}" + (f": {labels[i]}" if labels and i in labels else "")
        if len(poly):
            cx, cy = px(_centroid(poly))
            out.append(f'<text x="{cx}" y="{cy}" font-family="sans-serif" font-size="14" '
                       f'text-anchor="middle">{text}</text>')
        legend = f"cell {text}" + ("" if len(poly) else " (empty)")
        out.append(f'<text x="6" y="{_f(H + 15 + 20 * i)}" font-family="sans-serif" font-size="12" '
                   f'fill="{PALETTE[i % len(PALETTE)]}">{legend}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
