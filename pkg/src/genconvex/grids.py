"""Lattice grids over model domains and nested compact chains on them.

A grid is the set of lattice points of a box that lie in a carrier region.
Each grid point is flagged as inside the open domain or outside it. Inside
points within ``margin_cells`` lattice steps of the domain boundary form the
outer margin layer. A hull member in the margin or outside the domain is the
discrete signal that a hull leaves every compact subset of the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .families import complex_points

GRID_KINDS = ("rect", "disc", "annulus", "bidisc", "hartogs", "points")


class ChainError(ValueError):
    """A compact chain violates nesting, interior or margin requirements."""


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    points: np.ndarray
    inside: np.ndarray
    margin: np.ndarray
    labels: np.ndarray
    n_real: int
    n_complex: int
    spacing: float
    lattice: np.ndarray | None = None
    shape: tuple[int, ...] = ()
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def escape_zone(self) -> np.ndarray:
        """Points whose hull membership counts as escape evidence."""
        return self.margin | ~self.inside

    @property
    def working(self) -> np.ndarray:
        return self.inside & ~self.margin

    @property
    def n_components(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def complex_coords(self) -> np.ndarray:
        """Complex coordinates, shape ``(N, n_complex)``."""
        r, n = self.n_real, self.n_complex
        return self.points[:, r : r + n] + 1j * self.points[:, r + n : r + 2 * n]

    def _dense(self, mask: np.ndarray) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=bool)
        dense[tuple(self.lattice.T)] = mask
        return dense

    def _structure(self):
        return ndimage.generate_binary_structure(len(self.shape), 1)

    def erode(self, mask: np.ndarray, cells: int = 1) -> np.ndarray:
        """Points of ``mask`` whose axis neighbours up to ``cells`` steps all lie in ``mask``."""
        if self.lattice is None:
            raise ValueError("interior operations need a lattice grid")
        if cells <= 0:
            return mask.copy()
        out = ndimage.binary_erosion(self._dense(mask), self._structure(), iterations=cells, border_value=0)
        return out[tuple(self.lattice.T)]

    def dilate(self, mask: np.ndarray, cells: int = 1) -> np.ndarray:
        """Grid points within ``cells`` axis steps of ``mask``."""
        if self.lattice is None:
            raise ValueError("interior operations need a lattice grid")
        if cells <= 0:
            return mask.copy()
        out = ndimage.binary_dilation(self._dense(mask), self._structure(), iterations=cells)
        return out[tuple(self.lattice.T)]

    def nearest(self, point) -> int:
        """Index of the grid point closest to ``point`` (lowest index on ties)."""
        d = np.linalg.norm(self.points - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def subset(self, mask: np.ndarray) -> np.ndarray:
        return self.points[np.asarray(mask, dtype=bool)]


def _lattice(lo, hi, resolution: int):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if resolution < 8:
        raise ValueError(f"resolution must be at least 8 cells per axis, got {resolution}")
    h = float(np.max(hi - lo)) / resolution
    counts = [int(round(w / h)) + 1 for w in hi - lo]
    axes = [lo[k] + h * np.arange(c) for k, c in enumerate(counts)]
    idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1)
    idx = idx.reshape(-1, len(counts))
    pts = np.stack([axes[k][idx[:, k]] for k in range(len(counts))], axis=1)
    # snap lattice values like 0.30000000000000004 onto clean decimals
    pts = np.round(pts, 12)
    return pts, idx, tuple(counts), h


def _finish(kind, pts, idx, shape, h, carrier, inside, margin_cells, n_real, n_complex, params) -> Grid:
    if margin_cells < 1:
        raise ValueError(f"margin_cells must be at least 1, got {margin_cells}")
    pts, idx, inside = pts[carrier], idx[carrier], inside[carrier]
    dense = np.zeros(shape, dtype=bool)
    dense[tuple(idx.T)] = inside
    struct = ndimage.generate_binary_structure(len(shape), 1)
    core = ndimage.binary_erosion(dense, struct, iterations=margin_cells, border_value=0)
    margin = inside & ~core[tuple(idx.T)]
    lab, _ = ndimage.label(dense, struct)
    labels = lab[tuple(idx.T)].astype(np.int64)
    return Grid(kind, pts, inside, margin, labels, n_real, n_complex, h, idx, shape, dict(params))


def rect_grid(lo, hi, resolution: int, margin_cells: int = 1) -> Grid:
    """Lattice over the closed box ``[lo, hi]``; the domain is the whole box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError("rect bounds must satisfy lo < hi componentwise")
    pts, idx, shape, h = _lattice(lo, hi, resolution)
    everything = np.ones(len(pts), dtype=bool)
    params = {"lo": lo.tolist(), "hi": hi.tolist()}
    return _finish("rect", pts, idx, shape, h, everything, everything, margin_cells, len(lo), 0, params)


def disc_grid(centers=(0j,), radius: float = 1.0, resolution: int = 60, margin_cells: int = 1) -> Grid:
    """Union of open discs in the plane, one component per disc when they are apart."""
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    if radius <= 0:
        raise ValueError("radius must be positive")
    lo = [centers.real.min() - radius, centers.imag.min() - radius]
    hi = [centers.real.max() + radius, centers.imag.max() + radius]
    pts, idx, shape, h = _lattice(lo, hi, resolution)
    z = pts[:, 0] + 1j * pts[:, 1]
    dist = np.min(np.abs(z[:, None] - centers[None, :]), axis=1)
    inside = dist < radius - 1e-12
    params = {"centers": [[c.real, c.imag] for c in centers], "radius": radius}
    return _finish("disc", pts, idx, shape, h, inside, inside, margin_cells, 0, 1, params)


def annulus_grid(inner: float = 0.5, outer: float = 1.0, floor: float = 0.25, resolution: int = 60, margin_cells: int = 1) -> Grid:
    """Open annulus ``inner < |z| < outer``; grid points down to ``|z| >= floor`` fill part of the hole."""
    if not 0 < floor <= inner < outer:
        raise ValueError("annulus radii must satisfy 0 < floor <= inner < outer")
    pts, idx, shape, h = _lattice([-outer, -outer], [outer, outer], resolution)
    r = np.hypot(pts[:, 0], pts[:, 1])
    carrier = (r >= floor - 1e-12) & (r < outer - 1e-12)
    inside = (r > inner + 1e-12) & (r < outer - 1e-12)
    params = {"inner": inner, "outer": outer, "floor": floor}
    return _finish("annulus", pts, idx, shape, h, carrier, inside, margin_cells, 0, 1, params)


def _bidisc_lattice(radii, resolution):
    r1, r2 = radii
    pts, idx, shape, h = _lattice([-r1, -r2, -r1, -r2], [r1, r2, r1, r2], resolution)
    z = np.hypot(pts[:, 0], pts[:, 2])
    w = np.hypot(pts[:, 1], pts[:, 3])
    carrier = (z < r1 - 1e-12) & (w < r2 - 1e-12)
    return pts, idx, shape, h, z, w, carrier


def bidisc_grid(radii=(1.0, 1.0), resolution: int = 16, margin_cells: int = 1) -> Grid:
    """Open bidisc ``|z| < r1, |w| < r2`` in C^2."""
    pts, idx, shape, h, _, _, carrier = _bidisc_lattice(radii, resolution)
    params = {"radii": list(radii)}
    return _finish("bidisc", pts, idx, shape, h, carrier, carrier, margin_cells, 0, 2, params)


def hartogs_grid(a: float = 0.5, b: float = 0.5, radii=(1.0, 1.0), resolution: int = 16, margin_cells: int = 1) -> Grid:
    """Hartogs figure ``{|z| < a or |w| > b}`` inside the bidisc; the rest of the bidisc is outside."""
    pts, idx, shape, h, z, w, carrier = _bidisc_lattice(radii, resolution)
    inside = carrier & ((z < a - 1e-12) | (w > b + 1e-12))
    params = {"a": a, "b": b, "radii": list(radii)}
    return _finish("hartogs", pts, idx, shape, h, carrier, inside, margin_cells, 0, 2, params)


def points_grid(points, n_real: int = 0, n_complex: int = 0, margin=(), outside=(), spacing: float = 0.0) -> Grid:
    """Explicit point list; margin and outside points are given by index."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != n_real + 2 * n_complex:
        raise ValueError("points must be an (N, n_real + 2*n_complex) array")
    inside = np.ones(len(pts), dtype=bool)
    inside[list(outside)] = False
    mask = np.zeros(len(pts), dtype=bool)
    mask[list(margin)] = True
    labels = inside.astype(np.int64)
    return Grid("points", pts, inside, mask & inside, labels, n_real, n_complex, spacing)


def circle_samples(radius: float, n: int, center: complex = 0j) -> np.ndarray:
    """``n`` equally spaced points of a circle, as real point rows."""
    t = 2 * np.pi * np.arange(n) / n
    return complex_points(center + radius * np.exp(1j * t))


def torus_samples(r1: float, r2: float, n: int) -> np.ndarray:
    """``n * n`` points of the torus ``|z| = r1, |w| = r2``."""
    t = np.exp(2j * np.pi * np.arange(n) / n)
    z, w = np.meshgrid(r1 * t, r2 * t, indexing="ij")
    return complex_points(np.stack([z.ravel(), w.ravel()], axis=1))


@dataclass(frozen=True, eq=False)
class CompactChain:
    """Nested compacts ``K_1 ⊂ ... ⊂ K_N`` given as boolean masks on a grid.

    ``samples[i]`` optionally holds extra points of ``K_{i+1}`` (typically its
    distinguished boundary) used alongside the mask when taking sups and
    when the compact serves as the generating set of a hull.
    """

    grid: Grid
    masks: tuple[np.ndarray, ...]
    samples: tuple[np.ndarray | None, ...]
    labels: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.masks)

    def points(self, i: int) -> np.ndarray:
        """Mask points and samples of ``K_i`` (1-based)."""
        pts = self.grid.points[self.masks[i - 1]]
        extra = self.samples[i - 1]
        if extra is not None and len(extra):
            pts = np.concatenate([pts, extra], axis=0)
        return pts

    def generators(self, i: int) -> np.ndarray:
        """Points standing for ``K_i`` as the generating set of a hull: samples when present."""
        extra = self.samples[i - 1]
        if extra is not None and len(extra):
            return extra
        return self.grid.points[self.masks[i - 1]]

    def mask(self, i: int) -> np.ndarray:
        return self.masks[i - 1]

    def coverage(self) -> float:
        """Fraction of working grid points inside ``K_N``."""
        work = self.grid.working
        return float((self.masks[-1] & work).sum() / max(work.sum(), 1))

    def validate(self) -> None:
        g = self.grid
        if len(self.masks) < 1:
            raise ChainError("chain is empty")
        for i, m in enumerate(self.masks, start=1):
            if not m.any():
                raise ChainError(f"K_{i} contains no grid point")
            if (m & g.escape_zone).any():
                k = int(np.flatnonzero(m & g.escape_zone)[0])
                raise ChainError(f"K_{i} meets the margin or the outside at grid point {k}")
        for i in range(1, len(self.masks)):
            inner, outer = self.masks[i - 1], self.masks[i]
            if (inner & ~outer).any():
                raise ChainError(f"K_{i} is not contained in K_{i + 1}")
            if not (outer & ~inner).any():
                raise ChainError(f"K_{i + 1} adds no grid point to K_{i}")
            if g.lattice is not None and (inner & ~g.erode(outer, 1)).any():
                k = int(np.flatnonzero(inner & ~g.erode(outer, 1))[0])
                raise ChainError(f"K_{i} is not one cell inside K_{i + 1} (grid point {k})")


def radial_chain(grid: Grid, radii, samples: int = 0, center=None) -> CompactChain:
    """Concentric compacts sized by ``radii``.

    disc: ``|z - c| <= r``; annulus: ``r_in <= |z| <= r_out`` from pairs;
    bidisc and hartogs: ``|z| <= r1, |w| <= r2`` from pairs; rect: boxes of
    half-width ``r`` around the box center. ``samples > 0`` adds circle or
    torus samples on the distinguished boundary of each compact.
    """
    eps = 1e-9
    masks, extra, labels = [], [], []
    if grid.kind == "disc":
        c = complex(*grid.params["centers"][0]) if center is None else complex(center)
        z = grid.complex_coords()[:, 0]
        for r in radii:
            r = float(r)
            masks.append(np.abs(z - c) <= r + eps)
            extra.append(circle_samples(r, samples, c) if samples else None)
            labels.append(f"|z-{c:g}|<={r:g}")
    elif grid.kind == "annulus":
        z = np.abs(grid.complex_coords()[:, 0])
        for r_in, r_out in radii:
            masks.append((z >= r_in - eps) & (z <= r_out + eps))
            extra.append(
                np.concatenate([circle_samples(r_in, samples), circle_samples(r_out, samples)])
                if samples else None
            )
            labels.append(f"{r_in:g}<=|z|<={r_out:g}")
    elif grid.kind in ("bidisc", "hartogs"):
        zw = np.abs(grid.complex_coords())
        for r1, r2 in radii:
            masks.append((zw[:, 0] <= r1 + eps) & (zw[:, 1] <= r2 + eps))
            extra.append(torus_samples(r1, r2, samples) if samples else None)
            labels.append(f"|z|<={r1:g},|w|<={r2:g}")
    elif grid.kind == "rect":
        mid = (np.asarray(grid.params["lo"]) + np.asarray(grid.params["hi"])) / 2
        for r in radii:
            masks.append(np.all(np.abs(grid.points - mid) <= float(r) + eps, axis=1))
            extra.append(None)
            labels.append(f"box half-width {float(r):g}")
    else:
        raise ChainError(f"radial chains are not defined on {grid.kind} grids")
    chain = CompactChain(grid, tuple(masks), tuple(extra), tuple(labels))
    chain.validate()
    return chain


def box_mask(grid: Grid, box) -> np.ndarray:
    """Points whose coordinates (moduli for complex grids) lie in the given intervals."""
    if grid.n_complex:
        vals = np.abs(grid.complex_coords())
    else:
        vals = grid.points
    if len(box) != vals.shape[1]:
        raise ChainError(f"box needs {vals.shape[1]} intervals, got {len(box)}")
    mask = np.ones(len(grid), dtype=bool)
    for k, (lo, hi) in enumerate(box):
        mask &= (vals[:, k] >= lo - 1e-9) & (vals[:, k] <= hi + 1e-9)
    return mask


def explicit_chain(grid: Grid, levels, samples=None) -> CompactChain:
    """Each level is a union of boxes; ``samples`` optionally lists point arrays per level."""
    masks, labels = [], []
    for boxes in levels:
        m = np.zeros(len(grid), dtype=bool)
        for box in boxes:
            m |= box_mask(grid, box)
        masks.append(m)
        labels.append(" u ".join("x".join(f"[{lo:g},{hi:g}]" for lo, hi in box) for box in boxes))
    extra = tuple(samples) if samples is not None else (None,) * len(masks)
    if len(extra) != len(masks):
        raise ChainError("samples must list one entry per level")
    chain = CompactChain(grid, tuple(masks), extra, tuple(labels))
    chain.validate()
    return chain


def mask_chain(grid: Grid, masks, samples=None) -> CompactChain:
    masks = tuple(np.asarray(m, dtype=bool) for m in masks)
    extra = tuple(samples) if samples is not None else (None,) * len(masks)
    chain = CompactChain(grid, masks, extra, tuple(f"K_{i + 1}" for i in range(len(masks))))
    chain.validate()
    return chain
