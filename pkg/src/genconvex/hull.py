"""Membership in generalized convex hulls, with barycentric witnesses or separating functions.

Four modes are offered:

cone
    direct check ``f(w) <= C * max f(S)`` over an explicit cone sample.
linear
    ``Phi(w)`` lies in the convex hull of the feature columns ``Phi(S)``.
    The constant row makes the weights sum to one, so this is the LP
    ``Phi(S) lam = Phi(w), lam >= 0``.
C
    ``a(w) <= C * max |a|(S)`` for every ``a`` in the span.
modulus
    ``|b(w)| <= C * max |b|(S)`` for every stored complex monomial ``b``.

The C-mode LP. ``a(w) <= C max|a|(S)`` for all ``a`` says that ``Phi(w) / C``
lies in the closed absolutely convex hull of the columns, i.e. in
``conv(Phi(S) u -Phi(S) u {0})``. With an extra row for the weights this is

    [ Phi  -Phi  0 ] [lam+; lam-; s] = [Phi(w)/C]
    [  1     1   1 ]                    [   1    ]

with all weights nonnegative. A Farkas vector ``(y, eta)`` of this system has
``y.Phi_j + eta <= 0`` and ``-y.Phi_j + eta <= 0`` for all j, ``eta <= 0``
and ``y.Phi(w)/C + eta > 0``. The function ``a = sum_i y_i basis_i`` then has
``max |a|(S) <= -eta < a(w)/C``, which is the separating function of the
C-hull. The constant row of ``Phi`` stays in the system, so the constants
enter ``a`` like every other basis element. At ``C = 1`` the C-hull equals
the ordinary hull, because adding a large constant to ``a`` turns
``max |a + t|`` into ``max a + t``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .families import Combination, FunctionFamily, as_points
from .gelfand import embed
from .grids import Grid
from .lp import FEAS_TOL, STRICT_PIVOT_TOL, IndeterminateError, phase_one

MODES = ("cone", "linear", "C", "modulus")
CHUNK = 64

__all__ = [
    "Certificate", "HullVerdict", "GridHull", "IndeterminateError",
    "membership_cone_direct", "membership_linear", "membership_C", "membership_modulus",
    "power_trick_refine", "compute_hull", "classical_hull_oracle", "ConvexPolygon",
]


def thread_count() -> int:
    raw = os.environ.get("GENCONVEX_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"GENCONVEX_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"GENCONVEX_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True, eq=False)
class Certificate:
    """A function that violates the hull inequality at the query point.

    kind ``linear``: ``a(w) > max a(S)``; kind ``symmetric``: ``a(w) > C max|a|(S)``;
    kind ``modulus``: ``|b(w)| > C max|b|(S)`` for the monomial ``z^alpha``.
    """

    kind: str
    description: str
    value: float
    bound: float
    coeffs: np.ndarray | None = None
    alpha: tuple[int, ...] | None = None
    C: float = 1.0

    @property
    def gap(self) -> float:
        return self.value - self.bound

    def recheck(self, family: FunctionFamily, S, omega) -> float:
        """Violation recomputed from scratch through basis evaluation."""
        S = as_points(S, family.dim)
        w = as_points(omega, family.dim)
        if self.kind == "modulus":
            pairs = {a: (r, i) for a, r, i in family.pairs()}
            r, i = pairs[self.alpha]
            vs, vw = family.evaluate(S), family.evaluate(w)
            return float(np.hypot(vw[r], vw[i])[0] - self.C * np.hypot(vs[r], vs[i]).max())
        a = Combination(family, self.coeffs)
        at_w = float(a.evaluate(w)[0])
        on_s = a.evaluate(S)
        if self.kind == "symmetric":
            return at_w - self.C * float(np.abs(on_s).max())
        return at_w - self.C * float(on_s.max())


@dataclass(frozen=True, eq=False)
class HullVerdict:
    member: bool
    gap: float
    mode: str
    C: float = 1.0
    coefficients: np.ndarray | None = None
    certificate: Certificate | None = None
    iterations: int = 0


def _check_C(C: float) -> float:
    C = float(C)
    if not C >= 1.0:
        raise ValueError(f"C must be at least 1, got {C}")
    return C


def _features(family: FunctionFamily, S, omega):
    family.require_nondegenerate()
    S = as_points(S, family.dim)
    if S.shape[0] == 0:
        raise ValueError("the generating set S is empty")
    w = as_points(omega, family.dim)
    return S, w, embed(family, S).entries, family.evaluate(w)[:, 0]


def _exact_match(S: np.ndarray, w: np.ndarray) -> int:
    hits = np.flatnonzero(np.all(S == w, axis=1))
    return int(hits[0]) if hits.size else -1


def membership_cone_direct(family: FunctionFamily, S, omega, C: float = 1.0, tol: float = FEAS_TOL) -> HullVerdict:
    """Check ``f(w) <= C max f(S) + tol`` for each non-constant cone element ``f``.

    Constants never separate at C = 1 and are skipped at every C.
    """
    C = _check_C(C)
    if family.structure != "cone_sample":
        raise ValueError("direct cone membership needs a cone_sample family")
    _, _, phi, v = _features(family, S, omega)
    worst, worst_i = -np.inf, -1
    for i, f in enumerate(family.basis):
        if f.is_constant:
            continue
        excess = v[i] - C * phi[i].max()
        if excess > worst:
            worst, worst_i = excess, i
    if worst <= tol:
        return HullVerdict(True, float(worst), "cone", C)
    coeffs = np.zeros(len(family))
    coeffs[worst_i] = 1.0
    cert = Certificate(
        "linear", family.basis[worst_i].describe(), float(v[worst_i]),
        float(C * phi[worst_i].max()), coeffs, C=C,
    )
    return HullVerdict(False, float(worst), "cone", C, certificate=cert)


def _linear_system(phi, v, C):
    if C is None:
        return phi, v
    m, k = phi.shape
    A = np.zeros((m + 1, 2 * k + 1))
    A[:m, :k] = phi
    A[:m, k : 2 * k] = -phi
    A[m, :] = 1.0
    b = np.append(v / C, 1.0)
    return A, b


def _certificate_from_duals(family, phi, v, y, C, tol, scale=None):
    """Turn LP duals into a separating function, or None if they do not certify.

    ``phi`` and ``v`` may be row-scaled by ``scale``; the returned coefficients
    refer to the unscaled basis.
    """
    m = phi.shape[0]
    coeffs = y[:m]
    vals = coeffs @ phi
    at_w = float(coeffs @ v)
    ymax = float(np.abs(coeffs).max())
    if ymax == 0.0:
        return None
    if C is None:
        bound = float(vals.max())
        kind, Cv = "linear", 1.0
    else:
        bound = C * float(np.abs(vals).max())
        kind, Cv = "symmetric", C
    # a residual of tol moves a(w) by at most max|y| * tol (per unit of C)
    if at_w - bound <= ymax * tol * (1.0 if C is None else C):
        return None
    if scale is not None:
        coeffs = coeffs / scale
    return Certificate(kind, Combination(family, coeffs).describe(), at_w, bound, coeffs.copy(), C=Cv)


def _decide(family, phi, v, C, tol, pool=None, S=None, w=None):
    """Shared LP decision for linear (``C is None``) and C modes."""
    mode = "linear" if C is None else "C"
    Cv = 1.0 if C is None else C
    if S is not None:
        j = _exact_match(S, w)
        if j >= 0:
            k = phi.shape[1]
            lam = np.zeros(k if C is None else 2 * k + 1)
            lam[j] = 1.0 / Cv
            if C is not None:
                lam[-1] = 1.0 - 1.0 / Cv
            return HullVerdict(True, 0.0, mode, Cv, coefficients=lam)
    # equilibrate rows so that the residual tolerance is relative to each function's size
    scale = np.maximum(np.abs(phi).max(axis=1), np.abs(v))
    # rows that vanish to working precision stay unscaled, so mapping duals back cannot overflow
    scale = np.where(scale > 1e-12, scale, 1.0)
    phi = phi / scale[:, None]
    v = v / scale
    if pool:
        for cert_coeffs in pool:
            cert = _certificate_from_duals(family, phi, v, cert_coeffs, C, tol, scale)
            if cert is not None:
                return HullVerdict(False, cert.gap, mode, Cv, certificate=cert)
    A, b = _linear_system(phi, v, C)
    res = phase_one(A, b, tol=tol)
    if res.feasible:
        return HullVerdict(True, -res.objective, mode, Cv, coefficients=res.x, iterations=res.iterations)
    cert = _certificate_from_duals(family, phi, v, res.y, C, tol, scale)
    if cert is None:
        # drift from small pivots; one stricter solve before giving up
        res = phase_one(A, b, tol=tol, pivot_tol=STRICT_PIVOT_TOL)
        if res.feasible:
            return HullVerdict(True, -res.objective, mode, Cv, coefficients=res.x, iterations=res.iterations)
        cert = _certificate_from_duals(family, phi, v, res.y, C, tol, scale)
    if cert is None:
        raise IndeterminateError(
            f"LP reports infeasibility (residual {res.objective:.3g}) but its duals do not separate"
        )
    if pool is not None:
        pool.append(cert.coeffs * scale)
    return HullVerdict(False, cert.gap, mode, Cv, certificate=cert, iterations=res.iterations)


def _phase_certificates(family, phi, vQ, C, tol):
    """``(j, certificate)`` for query columns excluded by a single monomial.

    If ``|b(w)| > C max|b|(S)`` then ``a = Re(theta b)`` with ``theta b(w) = |b(w)|``
    separates ``w``, since ``|a| <= |b|`` everywhere. No LP is needed for these points.
    """
    pairs = family.pairs()
    if not pairs:
        return []
    Cv = 1.0 if C is None else C
    re = np.array([r for _, r, _ in pairs])
    im = np.array([i for _, _, i in pairs])
    mS = np.hypot(phi[re], phi[im]).max(axis=1)
    mQ = np.hypot(vQ[re], vQ[im])
    excess = mQ - Cv * mS[:, None]
    best = np.argmax(excess, axis=0)
    out = []
    for j in np.flatnonzero(excess[best, np.arange(vQ.shape[1])] > 2 * Cv * tol):
        k = best[j]
        bw = complex(vQ[re[k], j], vQ[im[k], j])
        theta = np.conj(bw) / abs(bw)
        coeffs = np.zeros(len(family))
        coeffs[re[k]] = theta.real
        coeffs[im[k]] = -theta.imag
        vals = coeffs @ phi
        at_w = float(coeffs @ vQ[:, j])
        bound = float(vals.max()) if C is None else C * float(np.abs(vals).max())
        if at_w - bound <= Cv * tol:
            continue
        kind = "linear" if C is None else "symmetric"
        out.append((int(j), Certificate(kind, Combination(family, coeffs).describe(), at_w, bound, coeffs, C=Cv)))
    return out


def _require_linear(family: FunctionFamily):
    if family.structure not in ("linear_span", "algebra_real_parts"):
        raise ValueError("LP membership needs a linear_span or algebra_real_parts family")
    if len(family) < 2:
        raise ValueError("LP membership needs at least two basis functions")


def membership_linear(family: FunctionFamily, S, omega, tol: float = FEAS_TOL) -> HullVerdict:
    """Decide ``Phi(w) in conv Phi(S)`` by phase-one LP."""
    _require_linear(family)
    S, w, phi, v = _features(family, S, omega)
    return _decide(family, phi, v, None, tol, S=S, w=w[0])


def membership_C(family: FunctionFamily, S, omega, C: float = 1.0, tol: float = FEAS_TOL) -> HullVerdict:
    """Decide ``a(w) <= C max|a|(S)`` for the whole span by LP (see module docs)."""
    C = _check_C(C)
    _require_linear(family)
    S, w, phi, v = _features(family, S, omega)
    return _decide(family, phi, v, C, tol, S=S, w=w[0])


def _modulus_decide(alphas, mods_S, mods_w, C, tol):
    bound = C * mods_S.max(axis=1)
    excess = mods_w - bound
    i = int(np.argmax(excess)) if len(excess) else -1
    if i < 0 or excess[i] <= tol:
        return HullVerdict(True, float(excess[i]) if i >= 0 else 0.0, "modulus", C)
    a = alphas[i]
    names = ["z"] if len(a) == 1 else [f"z{j + 1}" for j in range(len(a))]
    desc = "|" + " ".join(n if e == 1 else f"{n}^{e}" for n, e in zip(names, a) if e) + "|"
    cert = Certificate("modulus", desc, float(mods_w[i]), float(bound[i]), alpha=a, C=C)
    return HullVerdict(False, float(excess[i]), "modulus", C, certificate=cert)


def membership_modulus(family: FunctionFamily, S, omega, C: float = 1.0, tol: float = FEAS_TOL) -> HullVerdict:
    """Check ``|b(w)| <= C max|b|(S) + tol`` for every stored complex monomial ``b``."""
    C = _check_C(C)
    if family.structure != "algebra_real_parts":
        raise ValueError("modulus membership needs an algebra_real_parts family")
    family.require_nondegenerate()
    alphas, mS = family.moduli(S)
    _, mw = family.moduli(omega)
    return _modulus_decide(alphas, mS, mw[:, 0], C, tol)


@dataclass(frozen=True)
class RefineStep:
    degree: int
    C: float
    member: bool
    modulus_member: bool
    gap: float
    certificate: str | None


@dataclass(frozen=True)
class RefineReport:
    steps: tuple[RefineStep, ...]
    flips: dict  # C -> first degree with a non-member verdict (None if never)
    stable: dict  # C -> True when every degree from the flip on is a non-member
    modulus_flips: dict

    def verdicts(self, C: float) -> list[tuple[int, bool]]:
        return [(s.degree, s.member) for s in self.steps if s.C == C]


def power_trick_refine(family_at, S, omega, Cs=(1.0,), start: int = 1, d_max: int = 16, tol: float = FEAS_TOL) -> RefineReport:
    """Run C-hull membership at degrees ``start, 2*start, 3*start, ... <= d_max``.

    ``family_at(d)`` returns the algebra family truncated at degree ``d``. Raising
    a separating function to powers is what drives each C to a flip: once a point
    is outside the C = 1 hull, a high enough degree excludes it at every C.
    """
    if d_max < start or start < 1:
        raise ValueError("need 1 <= start <= d_max")
    Cs = [_check_C(c) for c in Cs]
    steps = []
    for d in range(start, d_max + 1, start):
        fam = family_at(d)
        if fam.structure != "algebra_real_parts":
            raise ValueError("the power trick needs algebra families")
        for C in Cs:
            ver = membership_C(fam, S, omega, C, tol)
            mod = membership_modulus(fam, S, omega, C, tol)
            desc = ver.certificate.description if ver.certificate else None
            steps.append(RefineStep(d, C, ver.member, mod.member, ver.gap, desc))
    flips, stable, mflips = {}, {}, {}
    for C in Cs:
        seq = [s for s in steps if s.C == C]
        first = next((s.degree for s in seq if not s.member), None)
        flips[C] = first
        stable[C] = first is not None and all(not s.member for s in seq if s.degree >= first)
        mflips[C] = next((s.degree for s in seq if not s.modulus_member), None)
    return RefineReport(tuple(steps), flips, stable, mflips)


@dataclass(frozen=True, eq=False)
class GridHull:
    grid: Grid | None
    points: np.ndarray
    verdicts: tuple[HullVerdict, ...]
    members: np.ndarray
    escape_candidates: np.ndarray
    mode: str
    C: float
    n_samples: int
    max_degree: int | None
    query_index: np.ndarray = field(default=None)

    @property
    def escape(self) -> bool:
        return bool((self.members & self.escape_candidates).any())

    @property
    def escapes(self) -> np.ndarray:
        """Indices (into the queried points) of members that signal escape."""
        return np.flatnonzero(self.members & self.escape_candidates)


def _run_chunks(fn, n: int):
    """Apply ``fn(lo, hi)`` over fixed chunks; results come back in index order."""
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    workers = min(thread_count(), len(bounds)) or 1
    if workers == 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: fn(*b), bounds))
    return [v for part in parts for v in part]


def compute_hull(family: FunctionFamily, S, grid, C: float = 1.0, mode: str = "linear", tol: float = FEAS_TOL, query=None) -> GridHull:
    """Verdicts for grid points (all of them, or the indices in ``query``).

    ``grid`` is a :class:`Grid` or an array of points (no escape zone then).
    Certificates found by earlier LPs in a chunk are tried first on later
    points of the same chunk; chunks are fixed, so results do not depend on
    the number of threads.
    """
    if mode not in MODES:
        raise ValueError(f"unknown hull mode {mode!r}; choose from {MODES}")
    C = _check_C(C)
    family.require_nondegenerate()
    S = as_points(S, family.dim)
    if isinstance(grid, Grid):
        all_pts, zone = grid.points, grid.escape_zone
        g = grid
    else:
        all_pts = as_points(grid, family.dim)
        zone = np.zeros(len(all_pts), dtype=bool)
        g = None
    idx = np.arange(len(all_pts)) if query is None else np.asarray(query)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    idx = idx.astype(np.int64)
    # Laurent poles: no function of the family is defined there, so no membership
    defined = family.defined(all_pts[idx])
    if not defined.all():
        full = compute_hull(family, S, grid, C, mode, tol, idx[defined])
        verdicts = [HullVerdict(False, math.inf, "undefined", C)] * len(idx)
        for k, v in zip(np.flatnonzero(defined), full.verdicts):
            verdicts[k] = v
        members = np.zeros(len(idx), dtype=bool)
        members[defined] = full.members
        return GridHull(g, all_pts[idx], tuple(verdicts), members,
                        zone[idx], mode, C, full.n_samples, family.max_degree, idx)
    Q = all_pts[idx]

    if mode == "modulus":
        if family.structure != "algebra_real_parts":
            raise ValueError("modulus mode needs an algebra_real_parts family")
        alphas, mS = family.moduli(S)
        _, mQ = family.moduli(Q) if len(Q) else ([], np.zeros((len(alphas), 0)))
        verdicts = [_modulus_decide(alphas, mS, mQ[:, j], C, tol) for j in range(len(Q))]
    elif mode == "cone":
        verdicts = [membership_cone_direct(family, S, Q[j], C, tol) for j in range(len(Q))]
    else:
        _require_linear(family)
        phi = embed(family, S).entries
        vQ = family.evaluate(Q) if len(Q) else np.zeros((len(family), 0))
        Cl = None if (mode == "linear" and C == 1.0) else C
        verdicts = [None] * len(Q)
        if family.structure == "algebra_real_parts" and len(Q):
            for j, cert in _phase_certificates(family, phi, vQ, Cl, tol):
                verdicts[j] = HullVerdict(False, cert.gap, "linear" if Cl is None else "C", C, certificate=cert)
        todo = [j for j in range(len(Q)) if verdicts[j] is None]

        def work(lo, hi):
            pool = []
            return [_decide(family, phi, vQ[:, j], Cl, tol, pool, S, Q[j]) for j in todo[lo:hi]]

        for j, v in zip(todo, _run_chunks(work, len(todo))):
            verdicts[j] = v
    members = np.array([v.member for v in verdicts], dtype=bool)
    return GridHull(
        g, Q, tuple(verdicts), members, zone[idx], mode, C, S.shape[0], family.max_degree, idx,
    )


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex hull of planar points: a polygon, a segment or a single point."""

    vertices: np.ndarray  # counter-clockwise, no repeated points

    @property
    def kind(self) -> str:
        return {1: "point", 2: "segment"}.get(len(self.vertices), "polygon")

    def contains(self, p, tol: float = 1e-7) -> bool:
        p = np.asarray(p, dtype=float)
        V = self.vertices
        if len(V) == 1:
            return bool(np.linalg.norm(p - V[0]) <= tol)
        if len(V) == 2:
            return _segment_distance(p, V[0], V[1]) <= tol
        for i in range(len(V)):
            a, b = V[i], V[(i + 1) % len(V)]
            e = b - a
            # signed distance of p to the left of edge a->b
            if (e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / np.hypot(*e) < -tol:
                return False
        return True


def _segment_distance(p, a, b) -> float:
    e = b - a
    t = np.clip(np.dot(p - a, e) / np.dot(e, e), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * e)))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def classical_hull_oracle(points) -> ConvexPolygon:
    """Gift-wrapping (Jarvis march) convex hull of planar points."""
    P = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(P) == 0:
        raise ValueError("need at least one point")
    if len(P) == 1:
        return ConvexPolygon(P)
    start = int(np.lexsort((P[:, 1], P[:, 0]))[0])
    hull = [start]
    while True:
        cur = hull[-1]
        cand = (cur + 1) % len(P)
        for j in range(len(P)):
            if j == cur:
                continue
            c = _cross(P[cur], P[cand], P[j])
            farther = np.dot(P[j] - P[cur], P[j] - P[cur]) > np.dot(P[cand] - P[cur], P[cand] - P[cur])
            # j is clockwise of cand, or collinear and farther: wrap to j
            if c < 0 or (c == 0 and farther):
                cand = j
        if cand == start:
            break
        hull.append(cand)
        if len(hull) > len(P):
            break
    V = P[hull]
    if len(V) >= 3 and all(abs(_cross(V[0], V[1], V[k])) <= 1e-15 for k in range(2, len(V))):
        V = V[[0, int(np.argmax(np.linalg.norm(V - V[0], axis=1)))]]
    return ConvexPolygon(V)
