"""Exhaustion functions and polygon exhaustions built from compact chains.

Two constructions are provided.

Symmetric path. For a symmetric family, level ``i`` covers the shell
``K_{i+3} minus K_{i+2}`` by sets ``{|a| > 4^i max|a|(K_i)}`` and sets

    p_i = max_l |a_l| / (2^i max|a_l|(K_i)),

so ``p_i <= 2^-i`` on ``K_i`` and ``p_i > 2^i`` on its shell; ``p = max_i p_i``.

Cone path. For each window ``K_i, ..., K_{i+3}`` an annulus function
``q_i = max_f (f - max f(K_i)) / (max f(K_{i+1}) - max f(K_i)) v 0`` vanishes
on ``K_i``, stays ``<= 1`` on ``K_{i+1}`` and exceeds 1 on ``K_{i+3}`` outside
``K_{i+2}``; ``p = max_i i * q_i``. The last window uses every grid point as
its outer set, which keeps ``p`` large beyond the chain.

Every function here is a finite maximum of terms ``s * (g - c)`` with ``g``
a basis function or its absolute value, so sublevel sets are polygons cut out
by finitely many elements of the span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .families import Combination, FunctionFamily, as_points, cone_sample
from .grids import CompactChain, Grid

COVER_BASE = 4.0
LEVEL_BASE = 2.0


class ConstructionError(RuntimeError):
    """A shell could not be covered: the hull of an inner compact reaches it.

    ``points`` holds the uncovered shell points, ``ratios`` the best ratio any
    candidate function attains there (against the required threshold).
    """

    def __init__(self, message, level=None, points=None, ratios=None, component=None):
        super().__init__(message)
        self.level = level
        self.points = np.zeros((0, 0)) if points is None else points
        self.ratios = np.zeros(0) if ratios is None else ratios
        self.component = component


@dataclass(frozen=True)
class ScaledFunction:
    """The term ``scale * (g - shift)``, ``g`` = basis function ``index`` or its absolute value."""

    index: int
    description: str
    absolute: bool
    scale: float
    shift: float = 0.0

    def apply(self, row: np.ndarray) -> np.ndarray:
        g = np.abs(row) if self.absolute else row
        return self.scale * (g - self.shift)

    def describe(self) -> str:
        g = f"|{self.description}|" if self.absolute else self.description
        if self.shift:
            g = f"({g} - {self.shift:.6g})"
        return f"{self.scale:.6g}*{g}"


@dataclass(frozen=True, eq=False)
class LevelFunction:
    """``max(0, max_f f)`` over its scaled functions (zero when there are none)."""

    index: int
    functions: tuple[ScaledFunction, ...]
    checks: dict = field(default_factory=dict)

    def values(self, V: np.ndarray) -> np.ndarray:
        out = np.zeros(V.shape[1])
        for f in self.functions:
            np.maximum(out, f.apply(V[f.index]), out=out)
        return out

    def evaluate(self, family: FunctionFamily, points) -> np.ndarray:
        return self.values(family.evaluate(points))


@dataclass(frozen=True, eq=False)
class ExhaustionFunction:
    """``max_j (alpha_j * base + beta_j)`` where ``base = offset + combined levels``.

    ``combiner`` is ``max`` (``max_i p_i``) or ``indexed_max`` (``max_i i*p_i``).
    A glued function keeps one exhaustion per component and adds the component
    number on each; grid labels pick the component.
    """

    family: FunctionFamily
    levels: tuple[LevelFunction, ...]
    combiner: str
    path: str
    base_family: FunctionFamily | None = None
    offset: float = 0.0
    pieces: tuple[tuple[float, float], ...] = ((1.0, 0.0),)
    components: tuple["ExhaustionFunction", ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def weight(self, level: LevelFunction) -> float:
        return float(level.index) if self.combiner == "indexed_max" else 1.0

    def level_values(self, points) -> np.ndarray:
        """Weighted level values, shape ``(levels, N)``; not defined for glued functions."""
        V = self.family.evaluate(points)
        if not self.levels:
            return np.zeros((0, V.shape[1]))
        return np.array([self.weight(l) * l.values(V) for l in self.levels])

    def _base(self, points) -> np.ndarray:
        L = self.level_values(points)
        core = L.max(axis=0) if L.shape[0] else np.zeros(as_points(points, self.family.dim).shape[0])
        return core + self.offset

    def _post(self, base: np.ndarray) -> np.ndarray:
        return np.max([a * base + b for a, b in self.pieces], axis=0)

    def evaluate(self, points, labels=None) -> np.ndarray:
        if not self.components:
            return self._post(self._base(points))
        if labels is None:
            raise ValueError("a glued exhaustion needs component labels")
        pts = as_points(points, self.family.dim)
        labels = np.asarray(labels)
        out = np.full(len(pts), np.inf)
        for c, part in enumerate(self.components, start=1):
            sel = labels == c
            if sel.any():
                out[sel] = part._base(pts[sel])
        return self._post(out)

    def evaluate_grid(self, grid: Grid) -> np.ndarray:
        return self.evaluate(grid.points, grid.labels if self.components else None)

    def describe(self) -> dict:
        out = {"path": self.path, "combiner": self.combiner, "offset": self.offset,
               "pieces": [list(p) for p in self.pieces]}
        if self.components:
            out["components"] = [c.describe() for c in self.components]
        else:
            out["degree"] = self.family.max_degree
            out["levels"] = [
                {"index": l.index, "weight": self.weight(l),
                 "functions": [f.describe() for f in l.functions]}
                for l in self.levels
            ]
        return out


@dataclass(frozen=True)
class CoverResult:
    selected: tuple[tuple[int, float], ...]  # (basis index, sup over the inner set)
    covered: int


def _row_lookup(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Boolean mask of rows of ``A`` that also occur in ``B``."""
    if len(B) == 0:
        return np.zeros(len(A), dtype=bool)
    keys = {row.tobytes() for row in np.ascontiguousarray(B)}
    return np.array([row.tobytes() in keys for row in np.ascontiguousarray(A)], dtype=bool)


def _greedy_cover(exceed: np.ndarray) -> list[int]:
    """Rows of ``exceed`` (candidates x points) covering every point, most-new-first."""
    uncovered = np.ones(exceed.shape[1], dtype=bool)
    chosen = []
    while uncovered.any():
        gains = (exceed & uncovered).sum(axis=1)
        best = int(np.argmax(gains))  # argmax keeps the lowest index on ties
        if gains[best] == 0:
            break
        chosen.append(best)
        uncovered &= ~exceed[best]
    return chosen


def select_covering_subfamily(family: FunctionFamily, K_inner, shell, threshold: float, level=None) -> CoverResult:
    """Greedy cover of ``shell`` by sets ``{|f| > threshold * max|f|(K_inner)}``.

    Basis functions that vanish on ``K_inner`` are not candidates (they cannot
    be normalized). Raises :class:`ConstructionError` listing uncovered points.
    """
    family.require_nondegenerate()
    K_inner = as_points(K_inner, family.dim)
    shell = as_points(shell, family.dim) if len(shell) else np.zeros((0, family.dim))
    if len(K_inner) == 0:
        raise ValueError("the inner compact is empty")
    if len(shell) == 0:
        return CoverResult((), 0)
    cand = [i for i, f in enumerate(family.basis) if not f.is_constant]
    sup = np.abs(family.evaluate(K_inner)[cand]).max(axis=1)
    usable = sup > 1e-12
    cand = [c for c, u in zip(cand, usable) if u]
    sup = sup[usable]
    vals = np.abs(family.evaluate(shell)[cand])
    ratio = vals / sup[:, None]
    exceed = ratio > threshold
    chosen = _greedy_cover(exceed)
    covered = exceed[chosen].any(axis=0) if chosen else np.zeros(len(shell), dtype=bool)
    if not covered.all():
        miss = np.flatnonzero(~covered)
        raise ConstructionError(
            f"{miss.size} shell point(s) cannot be covered at threshold {threshold:g}; "
            f"best ratio {ratio[:, miss].max(axis=0).max():.4g}",
            level=level, points=shell[miss], ratios=ratio[:, miss].max(axis=0),
        )
    return CoverResult(tuple((cand[c], float(sup[c])) for c in chosen), int(len(shell)))


def build_level(family: FunctionFamily, K_i, selected, i: int, base: float = LEVEL_BASE, shell=None) -> LevelFunction:
    """``p_i = max_l |a_l| / (base^i max|a_l|(K_i))``; bounds on ``K_i`` and the shell are checked."""
    K_i = as_points(K_i, family.dim)
    funcs = []
    V = family.evaluate(K_i)
    for idx, _ in selected:
        s = float(np.abs(V[idx]).max())
        if s <= 0.0:
            raise ZeroDivisionError(f"{family.basis[idx].describe()} vanishes on K_{i}")
        funcs.append(ScaledFunction(idx, family.basis[idx].describe(), True, 1.0 / (base ** i * s)))
    level = LevelFunction(i, tuple(funcs))
    on_K = float(level.values(V).max()) if len(K_i) else 0.0
    checks = {"max_on_K": on_K, "bound_on_K": base ** -i, "inner_ok": on_K <= base ** -i + 1e-12}
    if shell is not None and len(shell):
        on_shell = float(level.evaluate(family, shell).min())
        checks.update(min_on_shell=on_shell, bound_on_shell=base ** i, shell_ok=on_shell >= base ** i)
    object.__setattr__(level, "checks", checks)
    return level


def _shell(chain: CompactChain, outer: int, inner: int) -> np.ndarray:
    g = chain.grid
    return g.points[chain.mask(outer) & ~chain.mask(inner)]


def build_exhaustion_symmetric(family: FunctionFamily, chain: CompactChain, cover_base: float = COVER_BASE, level_base: float = LEVEL_BASE) -> ExhaustionFunction:
    """``p = max_i p_i`` with levels covering the shells ``K_{i+3} minus K_{i+2}``.

    Levels whose shell would lie beyond ``K_N`` are kept as zero functions, so
    the function has one level per chain member.
    """
    if family.structure not in ("linear_span", "algebra_real_parts") or not family.symmetric:
        raise ValueError("the symmetric path needs a symmetric linear_span or algebra family")
    family.require_nondegenerate()
    N = len(chain)
    levels = []
    for i in range(1, N + 1):
        K_i = chain.points(i)
        if i + 3 <= N:
            shell = _shell(chain, i + 3, i + 2)
            cover = select_covering_subfamily(family, K_i, shell, cover_base ** i, level=i)
            levels.append(build_level(family, K_i, cover.selected, i, level_base, shell))
        else:
            levels.append(build_level(family, K_i, (), i, level_base))
    p = ExhaustionFunction(family, tuple(levels), "max", "symmetric", base_family=family)
    V = family.evaluate(chain.grid.points)
    L = np.array([l.values(V) for l in levels])
    total = L.max(axis=0)
    locality = {}
    for j in range(1, N + 1):
        on = chain.mask(j)
        head = L[:j, on].max(axis=0)
        tail = float((total[on] - head).max()) if on.any() else 0.0
        locality[j] = {"active_levels": list(range(1, j + 1)), "tail": tail,
                       "tail_bound": level_base ** -(j + 1), "ok": tail <= level_base ** -(j + 1) + 1e-12}
    on1 = chain.mask(1)
    diag = {
        "levels": [l.checks for l in levels],
        "locality": locality,
        "max_on_K1": float(total[on1].max()),
        "K1_bound_ok": float(total[on1].max()) <= 0.5 + 1e-12,
        "selected": [[l.functions[k].description for k in range(len(l.functions))] for l in levels],
    }
    return replace(p, diagnostics=diag)


def _as_cone(family: FunctionFamily) -> FunctionFamily:
    if family.structure == "cone_sample":
        return family
    return cone_sample(family)


def build_annulus_function(family: FunctionFamily, K1, K2, K3, K4, index: int = 1, margin: float = 1e-9) -> LevelFunction:
    """Annulus function for ``K1 ⊂ K2 ⊂ K3 ⊂ K4`` (point arrays; ``K3``, ``K4`` grid points).

    Vanishes on ``K1``, is at most 1 on ``K2``, and exceeds 1 on ``K4`` outside
    ``K3``. Candidates need the gap ``max f(K1) + margin < max f(K2)``.
    """
    cone = _as_cone(family)
    cone.require_nondegenerate()
    K1, K2, K3, K4 = (as_points(K, cone.dim) for K in (K1, K2, K3, K4))
    if len(K1) == 0 or len(K2) == 0:
        raise ValueError("K1 and K2 must be nonempty")
    cand = [i for i, f in enumerate(cone.basis) if not f.is_constant]
    s1 = cone.evaluate(K1)[cand].max(axis=1)
    s2 = cone.evaluate(K2)[cand].max(axis=1)
    gap_ok = s1 + margin < s2
    if not gap_ok.any():
        raise ConstructionError(
            "no function has a strictly larger maximum on K2 than on K1 "
            "(K1 = K2, or the maximum principle fails)", level=index,
        )
    cand = [c for c, ok in zip(cand, gap_ok) if ok]
    s1, s2 = s1[gap_ok], s2[gap_ok]
    shell = K4[~_row_lookup(K4, K3)]
    funcs_all = [
        ScaledFunction(c, cone.basis[c].describe(), False, 1.0 / (b - a), float(a))
        for c, a, b in zip(cand, s1, s2)
    ]
    if len(shell):
        Vs = cone.evaluate(shell)
        q = np.array([f.apply(Vs[f.index]) for f in funcs_all])
        exceed = q > 1.0
        chosen = _greedy_cover(exceed)
        covered = exceed[chosen].any(axis=0) if chosen else np.zeros(len(shell), dtype=bool)
        if not covered.all():
            miss = np.flatnonzero(~covered)
            raise ConstructionError(
                f"{miss.size} point(s) of K4 outside K3 stay in the sublevel {{p <= 1}}",
                level=index, points=shell[miss], ratios=q[:, miss].max(axis=0),
            )
        funcs = tuple(funcs_all[c] for c in chosen)
    else:
        funcs = ()
    level = LevelFunction(index, funcs)
    on1 = level.evaluate(cone, K1)
    on2 = level.evaluate(cone, K2)
    on_shell = level.evaluate(cone, shell) if len(shell) else np.zeros(0)
    checks = {
        "zero_on_K1": bool(np.all(on1 <= 1e-12)),
        "max_on_K2": float(on2.max()),
        "sandwich_ok": bool(np.all(on2 <= 1 + 1e-12) and np.all(on_shell > 1)),
        "shell_points": int(len(shell)),
    }
    object.__setattr__(level, "checks", checks)
    return level


def build_exhaustion_cone(family: FunctionFamily, chain: CompactChain, margin: float = 1e-9, region=None) -> ExhaustionFunction:
    """``p = max_i i * q_i`` over the windows ``K_i .. K_{i+3}``, ``i = 1 .. N-3``.

    ``region`` (a grid mask, default the whole grid) is the outer set of the
    last window.
    """
    N = len(chain)
    if N < 4:
        raise ValueError(
            f"the cone path needs a chain of length at least 4 (got {N}); "
            "add compacts or use the symmetric path"
        )
    cone = _as_cone(family)
    g = chain.grid
    region = np.ones(len(g), dtype=bool) if region is None else np.asarray(region, dtype=bool)
    levels = []
    for i in range(1, N - 2):
        outer = chain.mask(i + 3) if i + 3 < N else region
        levels.append(build_annulus_function(
            cone, chain.points(i), chain.points(i + 1),
            g.points[chain.mask(i + 2)], g.points[outer], index=i, margin=margin,
        ))
    base = family if family.structure != "cone_sample" else None
    p = ExhaustionFunction(cone, tuple(levels), "indexed_max", "cone", base_family=base)
    values = p.evaluate(g.points)
    bounds = {}
    for i in range(1, N - 2):
        out = region & ~chain.mask(i + 2)
        worst = float(values[out].min()) if out.any() else math.inf
        bounds[i] = {"min_outside": worst, "ok": worst >= i}
    diag = {"levels": [l.checks for l in levels], "lower_bounds": bounds,
            "selected": [[f.describe() for f in l.functions] for l in levels]}
    return replace(p, diagnostics=diag)


def build_exhaustion_components(families, components) -> ExhaustionFunction:
    """Glue per-component cone-path exhaustions with offset ``c`` on component ``c``.

    ``components`` lists ``(region_mask, chain)`` pairs on one shared grid;
    ``families`` is one family for all components or a list with one each.
    """
    if not components:
        raise ValueError("need at least one component")
    if isinstance(families, FunctionFamily):
        families = [families] * len(components)
    if len(families) != len(components):
        raise ValueError("one family per component is required")
    masks = [np.asarray(m, dtype=bool) for m, _ in components]
    for a in range(len(masks)):
        for b in range(a + 1, len(masks)):
            if (masks[a] & masks[b]).any():
                raise ValueError(f"components {a + 1} and {b + 1} overlap")
    parts = []
    for c, (fam, (mask, chain)) in enumerate(zip(families, components), start=1):
        try:
            part = build_exhaustion_cone(fam, chain, region=mask)
        except ConstructionError as exc:
            exc.component = c
            raise ConstructionError(f"component {c}: {exc}", exc.level, exc.points, exc.ratios, c) from None
        parts.append(replace(part, offset=float(c)))
    first = parts[0]
    return ExhaustionFunction(
        first.family, (), first.combiner, "components", base_family=first.base_family,
        components=tuple(parts),
        diagnostics={"components": [p.diagnostics for p in parts]},
    )


def convex_post_compose(p: ExhaustionFunction, pieces) -> ExhaustionFunction:
    """Compose with ``xi(t) = max_j (alpha_j t + beta_j)``, all ``alpha_j >= 0``."""
    pieces = [(float(a), float(b)) for a, b in pieces]
    if not pieces:
        raise ValueError("need at least one affine piece")
    for a, _ in pieces:
        if a < 0:
            raise ValueError(f"piece slope {a} is negative; xi must be nondecreasing")
    combined = tuple((a * a0, a * b0 + b) for a, b in pieces for a0, b0 in p.pieces)
    return replace(p, pieces=combined)


@dataclass(frozen=True)
class ProperReport:
    checks: tuple[dict, ...]
    skipped: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return all(c["ok"] for c in self.checks)

    @property
    def failures(self) -> list[dict]:
        return [c for c in self.checks if not c["ok"]]


def properness_check(p: ExhaustionFunction, chain: CompactChain, grid: Grid | None = None, ts=None, offset: float = 0.0, region=None) -> ProperReport:
    """Check ``{p <= t} ⊂ K_{ceil(t)+3}`` and that sublevels avoid the margin.

    Thresholds beyond ``N - 3`` have no chain member to compare with and are
    returned as skipped. ``offset`` and ``region`` restrict the check to one
    glued component, whose values carry that offset.
    """
    grid = chain.grid if grid is None else grid
    N = len(chain)
    values = p.evaluate_grid(grid)
    region = np.ones(len(grid), dtype=bool) if region is None else np.asarray(region, dtype=bool)
    ts = list(range(1, N - 2)) if ts is None else list(ts)
    checks, skipped = [], []
    for t in ts:
        k = math.ceil(t - offset) + 3
        if k > N or t - offset < 0:
            skipped.append(t)
            continue
        sub = region & (values <= t)
        outside = sub & ~chain.mask(max(k, 1))
        touching = sub & grid.escape_zone
        checks.append({
            "t": t, "compact": k, "outside_count": int(outside.sum()),
            "margin_count": int(touching.sum()), "ok": not outside.any() and not touching.any(),
        })
    return ProperReport(tuple(checks), tuple(skipped))


@dataclass(frozen=True, eq=False)
class Polygon:
    """``{w : h(w) <= 1 for every side h}``; sides are combinations of basis functions.

    A glued exhaustion yields one side list per component (``sides[c-1]``).
    """

    t: float
    sides: tuple[tuple[Combination, ...], ...]
    members: np.ndarray
    empty_reason: str | None = None


@dataclass(frozen=True, eq=False)
class PolygonExhaustion:
    polygons: tuple[Polygon, ...]
    nested: tuple[bool, ...]
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        d = self.diagnostics
        return (
            all(P.empty_reason is None for P in self.polygons)
            and all(self.nested)
            and all(d.get("matches_sublevels", []))
            and not any(d.get("touches_escape_zone", []))
        )


def _polygon_sides(p: ExhaustionFunction, t: float):
    """Normalized sides of ``{p <= t}``; returns (sides, infeasible constant)."""
    fam = p.family
    m = len(fam)
    sides = []
    for a, b in p.pieces:
        const = a * p.offset + b
        # the zero floor of every level contributes the constant term
        if const > t + 1e-12:
            return (), True
        for level in p.levels:
            w = p.weight(level)
            for f in level.functions:
                signs = (1.0, -1.0) if f.absolute else (1.0,)
                for s in signs:
                    coeffs = np.zeros(m)
                    coeffs[f.index] += a * w * f.scale * s / t
                    coeffs[0] += (const - a * w * f.scale * f.shift) / t
                    sides.append(Combination(fam, coeffs))
    return tuple(sides), False


def polygon_exhaustion(p: ExhaustionFunction, count: int, grid: Grid, tol: float = 1e-9) -> PolygonExhaustion:
    """Polygons ``P_t = {p <= t}``, ``t = 1..count``, each written as ``{h <= 1}`` sides."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    parts = p.components or (p,)
    values = p.evaluate_grid(grid)
    polys = []
    for t in range(1, count + 1):
        all_sides = []
        members = np.zeros(len(grid), dtype=bool)
        reason = None
        for c, part in enumerate(parts, start=1):
            merged = replace(part, pieces=p.pieces)
            sides, infeasible = _polygon_sides(merged, float(t))
            all_sides.append(sides)
            sel = grid.labels == c if p.components else np.ones(len(grid), dtype=bool)
            if infeasible or not sel.any():
                continue
            pts = grid.points[sel]
            inside = np.ones(len(pts), dtype=bool)
            for h in sides:
                inside &= h.evaluate(pts) <= 1 + tol
            members[np.flatnonzero(sel)[inside]] = True
        if not members.any():
            reason = f"no grid point has p <= {t} (min p = {values.min():.4g})"
        polys.append(Polygon(float(t), tuple(all_sides), members, reason))
    pairs = range(len(polys) - 1)
    nested = tuple(bool(np.all(~polys[k].members | polys[k + 1].members)) for k in pairs)
    # one-cell interior nesting needs the sublevels to sit a full cell apart,
    # which steep exhaustions on coarse grids do not always give
    interior = [
        int((polys[k].members & ~grid.erode(polys[k + 1].members, 1)).sum()) for k in pairs
    ]
    diag = {
        "matches_sublevels": [bool(np.array_equal(P.members, values <= P.t + tol)) for P in polys],
        "interior_violations": interior,
        "touches_escape_zone": [bool((P.members & grid.escape_zone).any()) for P in polys],
    }
    return PolygonExhaustion(tuple(polys), nested, diag)
