"""Deterministic text artifacts: JSON, CSV and SVG, written atomically."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import contourpy
import numpy as np

FLOAT_FORMAT = "%.17g"


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return FLOAT_FORMAT % x


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float printed to 17 significant digits; key order is kept."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float, bool, str)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return write_text(path, dumps(obj) + "\n")


def csv_text(header, rows) -> str:
    """Rows of numbers and strings; floats at 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            v = _plain(v)
            if isinstance(v, bool):
                cells.append("1" if v else "0")
            elif isinstance(v, float):
                cells.append(_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- SVG

_SIZE = 480.0


class _Canvas:
    def __init__(self, lo, hi, pad: float = 10.0):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        span = float(max(self.hi - self.lo))
        self.k = (_SIZE - 2 * pad) / span
        self.pad = pad
        self.w = self.k * (self.hi[0] - self.lo[0]) + 2 * pad
        self.h = self.k * (self.hi[1] - self.lo[1]) + 2 * pad
        self.items: list[str] = []

    def xy(self, x, y):
        return self.pad + self.k * (x - self.lo[0]), self.pad + self.k * (self.hi[1] - y)

    def cells(self, pts, side, fill):
        s = side * self.k
        for x, y in pts:
            px, py = self.xy(x, y)
            self.items.append(
                f'<rect x="{px - s / 2:.3f}" y="{py - s / 2:.3f}" width="{s:.3f}" height="{s:.3f}" fill="{fill}"/>'
            )

    def dots(self, pts, r, fill):
        for x, y in pts:
            px, py = self.xy(x, y)
            self.items.append(f'<circle cx="{px:.3f}" cy="{py:.3f}" r="{r:.2f}" fill="{fill}"/>')

    def polyline(self, pts, stroke):
        coords = " ".join("%.3f,%.3f" % self.xy(x, y) for x, y in pts)
        self.items.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="1.5"/>')

    def text(self, x, y, s):
        self.items.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="11" font-family="monospace">{s}</text>')

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" height="{self.h + 20:.0f}" '
            f'viewBox="0 0 {self.w:.3f} {self.h + 20:.3f}">'
        )
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def _bounds(grid):
    return grid.points.min(axis=0), grid.points.max(axis=0)


def hull_svg(grid, hull, S) -> str:
    """Domain cells in grey, hull members in blue, escaping members in red, samples in black."""
    lo, hi = _bounds(grid)
    cv = _Canvas(lo, hi)
    side = grid.spacing
    cv.cells(grid.points[grid.inside], side, "#e6e6e6")
    pts = hull.points
    cv.cells(pts[hull.members & ~hull.escape_candidates], side, "#4a78b0")
    cv.cells(pts[hull.members & hull.escape_candidates], side, "#d62728")
    cv.dots(np.asarray(S)[:, :2], 1.5, "#000000")
    cv.text(cv.pad, cv.h + 12, f"mode={hull.mode} C={hull.C:g} members={int(hull.members.sum())} escape={hull.escape}")
    return cv.render()


def contour_svg(grid, values, levels) -> str:
    """Level lines ``{p = t}`` of grid values over the dense lattice."""
    lo, hi = _bounds(grid)
    cv = _Canvas(lo, hi)
    cv.cells(grid.points[grid.inside], grid.spacing, "#eeeeee")
    dense = np.full(grid.shape, np.nan)
    dense[tuple(grid.lattice.T)] = values
    origin = grid.points[0] - grid.spacing * grid.lattice[0]
    xs = origin[0] + grid.spacing * np.arange(grid.shape[0])
    ys = origin[1] + grid.spacing * np.arange(grid.shape[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    gen = contourpy.contour_generator(X, Y, np.ma.masked_invalid(dense), name="serial")
    palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"]
    for k, t in enumerate(levels):
        for line in gen.lines(float(t)):
            cv.polyline(line, palette[k % len(palette)])
    cv.text(cv.pad, cv.h + 12, "levels " + " ".join(f"{t:g}" for t in levels))
    return cv.render()
