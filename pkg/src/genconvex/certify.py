"""Equivalence suite on a discretized domain.

Four stages are run in order, and every stage runs even after an earlier one fails.

1. hull_compactness: hulls of the chain compacts stay off the margin.
2. exhaustion_built: an exhaustion function is constructed from the chain.
3. polygons_built: its sublevel polygons are nonempty, nested and inside the domain.
4. witness_built: a series of functions that grows without bound along a
   sequence of points running out of the chain.

On a convex domain all four pass. On a non-convex one, the first two fail
together. The classification only says "consistent with" or "inconsistent
with" convexity, at the recorded degree and grid resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .exhaustion import (
    ConstructionError,
    ExhaustionFunction,
    build_exhaustion_components,
    build_exhaustion_cone,
    build_exhaustion_symmetric,
    polygon_exhaustion,
    properness_check,
)
from .families import FunctionFamily, affine_family, as_points, monomial_family, monomial_values, shifted_name
from .grids import CompactChain, Grid
from .hull import FEAS_TOL, _decide
from .gelfand import embed

STAGES = ("hull_compactness", "exhaustion_built", "polygons_built", "witness_built")
REPORT_VERSION = 1


@dataclass(frozen=True)
class FamilySpec:
    kind: str  # "affine" or "monomial"
    n_real: int = 0
    n_complex: int = 1
    max_degree: int = 1
    laurent: bool = False
    local: bool = False

    def build(self, degree: int | None = None, center=None) -> FunctionFamily:
        if self.kind == "affine":
            return affine_family(self.n_real)
        d = self.max_degree if degree is None else degree
        return monomial_family(self.n_complex, d, self.laurent, center=center)


@dataclass(frozen=True, eq=False)
class Component:
    """One connected piece of the domain with its own chain and local family."""

    region: np.ndarray
    chain: CompactChain
    center: tuple[complex, ...] | None = None


@dataclass(frozen=True, eq=False)
class DomainScenario:
    name: str
    grid: Grid
    components: tuple[Component, ...]
    family: FamilySpec
    options: dict = field(default_factory=dict)
    expected: str | None = None

    @property
    def chain(self) -> CompactChain:
        return self.components[0].chain

    def family_for(self, comp: Component, degree: int | None = None) -> FunctionFamily:
        center = comp.center if self.family.local else None
        return self.family.build(degree, center)

    def option(self, key, default):
        return self.options.get(key, default)


DEFAULT_OPTIONS = {
    "C": [1.0],
    "tol": FEAS_TOL,
    "max_degree_sweep": None,
    "k_cap": 512,
    "path": None,
    "polygons": 3,
    "witness_levels": None,
}


def _opt(scenario: DomainScenario, key):
    return scenario.options.get(key, DEFAULT_OPTIONS[key])


# ---------------------------------------------------------------- stage 1


def _escape_members(family, S, Q, C, tol, stop_first=True, priority=None):
    """Indices into ``Q`` of hull members, cheapest candidates first.

    Candidates with a smaller ``priority`` value are tried first.

    A monomial with ``|b(w)| > C max|b|(S)`` excludes ``w`` without an LP,
    because ``Re(theta b)`` is then a separating function of the C-hull.
    """
    if len(Q) == 0:
        return np.zeros(0, dtype=np.int64), {}
    survivors = np.arange(len(Q))
    if family.structure == "algebra_real_parts":
        alphas, mS = family.moduli(S)
        _, mQ = family.moduli(Q)
        ratio = (mQ / np.maximum(C * mS.max(axis=1), 1e-300)[:, None]).max(axis=0)
        survivors = np.flatnonzero(ratio <= 1.0 + tol)
        if priority is None:
            survivors = survivors[np.argsort(ratio[survivors], kind="stable")]
        else:
            survivors = survivors[np.lexsort((ratio[survivors], priority[survivors]))]
    phi = embed(family, S).entries
    vQ = family.evaluate(Q[survivors]) if len(survivors) else None
    Cl = None if C == 1.0 else C
    found, pool = [], []
    for k, j in enumerate(survivors):
        ver = _decide(family, phi, vQ[:, k], Cl, tol, pool, S, Q[j])
        if ver.member:
            found.append(int(j))
            if stop_first:
                break
    return np.asarray(found, dtype=np.int64), {"lp_queries": int(len(survivors))}


def fconvexity_certify(scenario: DomainScenario, Cs=None, tol=None) -> dict:
    """Check that no chain compact has a hull member in the margin or outside the domain.

    For algebra families an escape is re-tested at higher degrees (up to
    ``max_degree_sweep``); it counts only if it survives the largest degree.
    """
    Cs = [float(c) for c in (Cs if Cs is not None else _opt(scenario, "C"))]
    tol = float(tol if tol is not None else _opt(scenario, "tol"))
    sweep = _opt(scenario, "max_degree_sweep")
    g = scenario.grid
    records = []
    passed = True
    for ci, comp in enumerate(scenario.components, start=1):
        zone = g.escape_zone & comp.region if len(scenario.components) > 1 else g.escape_zone
        Q = g.points[zone]
        qidx = np.flatnonzero(zone)
        # points outside the domain are stronger evidence than margin points
        prio = g.inside[zone].astype(np.int64)
        base = scenario.family.max_degree if scenario.family.kind == "monomial" else None
        for i in range(1, len(comp.chain) + 1):
            S = comp.chain.generators(i)
            for C in Cs:
                trace = []
                degree = base
                fam = scenario.family_for(comp)
                hits, info = _escape_members(fam, S, Q, C, tol, priority=prio)
                trace.append({"degree": degree, "escapes": int(len(hits)), **info})
                while len(hits) and base is not None and sweep and degree < sweep:
                    degree += 1
                    fam = scenario.family_for(comp, degree)
                    hits, info = _escape_members(fam, S, Q, C, tol, priority=prio)
                    trace.append({"degree": degree, "escapes": int(len(hits)), **info})
                rec = {"component": ci, "compact": i, "label": comp.chain.labels[i - 1] if comp.chain.labels else f"K_{i}",
                       "C": C, "escape": bool(len(hits)), "trace": trace, "samples": int(len(S))}
                if len(hits):
                    passed = False
                    j = int(qidx[hits[0]])
                    rec["escape_point"] = g.points[j].tolist()
                    rec["escape_index"] = j
                    rec["outside_domain"] = bool(not g.inside[j])
                    rec["certificate"] = (
                        "every function of the truncated family satisfies the hull inequality "
                        f"at this point (LP feasible at degree {degree}, C={C:g})"
                    )
                records.append(rec)
    return {"passed": passed, "records": records}


# ---------------------------------------------------------------- stage 2/3


def build_scenario_exhaustion(scenario: DomainScenario, path: str | None = None) -> ExhaustionFunction:
    path = path or _opt(scenario, "path") or ("components" if len(scenario.components) > 1 else "symmetric")
    if path == "components":
        fams = [scenario.family_for(c) for c in scenario.components]
        return build_exhaustion_components(fams, [(c.region, c.chain) for c in scenario.components])
    if len(scenario.components) != 1:
        raise ValueError(f"path {path!r} needs a single-component scenario")
    comp = scenario.components[0]
    fam = scenario.family_for(comp)
    if path == "symmetric":
        return build_exhaustion_symmetric(fam, comp.chain)
    if path == "cone":
        return build_exhaustion_cone(fam, comp.chain)
    raise ValueError(f"unknown exhaustion path {path!r}")


def _exhaustion_stage(scenario, path=None):
    try:
        p = build_scenario_exhaustion(scenario, path)
    except ConstructionError as exc:
        pts = np.asarray(exc.points)
        return None, {
            "passed": False, "error": str(exc), "level": exc.level, "component": exc.component,
            "uncovered_count": int(len(pts)),
            "uncovered_points": pts[:5].tolist(),
            "best_ratios": np.asarray(exc.ratios)[:5].tolist(),
        }
    d = p.diagnostics
    ok = True
    info = {"path": p.path}
    if p.path == "symmetric":
        ok = d["K1_bound_ok"] and all(
            l.get("inner_ok", True) and l.get("shell_ok", True) for l in d["levels"]
        ) and all(v["ok"] for v in d["locality"].values())
        info["selected_level_1"] = d["selected"][0]
        info["max_on_K1"] = d["max_on_K1"]
        # the symmetric construction makes no claim beyond the last compact
        proper = properness_check(p, scenario.chain)
        info["properness_diagnostic"] = {"passed": proper.passed, "failures": proper.failures}
    elif p.path == "cone":
        ok = all(l["sandwich_ok"] and l["zero_on_K1"] for l in d["levels"]) and all(
            b["ok"] for b in d["lower_bounds"].values()
        )
        proper = properness_check(p, scenario.chain)
        ok = ok and proper.passed
        info["properness"] = {"passed": proper.passed, "failures": proper.failures}
    else:
        checks = []
        for c, (part, comp) in enumerate(zip(p.components, scenario.components), start=1):
            dd = part.diagnostics
            good = all(l["sandwich_ok"] and l["zero_on_K1"] for l in dd["levels"]) and all(
                b["ok"] for b in dd["lower_bounds"].values()
            )
            proper = properness_check(p, comp.chain, scenario.grid, ts=[c + t for t in range(1, len(comp.chain) - 2)],
                                      offset=float(c), region=comp.region)
            checks.append({"component": c, "levels_ok": good, "properness": proper.passed})
            ok = ok and good and proper.passed
        info["components"] = checks
    info["levels"] = len(p.levels) if not p.components else [len(c.levels) for c in p.components]
    info["passed"] = bool(ok)
    return p, info


def _polygon_stage(scenario, p):
    if p is None:
        return {"passed": False, "error": "no exhaustion function to slice"}
    count = int(_opt(scenario, "polygons"))
    offset = len(scenario.components) if p.components else 0
    polys = polygon_exhaustion(p, count + offset, scenario.grid)
    return {
        "passed": bool(polys.ok),
        "count": len(polys.polygons),
        "members": [int(P.members.sum()) for P in polys.polygons],
        "sides": [sum(len(s) for s in P.sides) for P in polys.polygons],
        "nested": list(polys.nested),
        **{k: v for k, v in polys.diagnostics.items()},
    }


# ---------------------------------------------------------------- stage 4


@dataclass(frozen=True)
class WitnessTerm:
    """``a_j = 2^-j Re(theta (b / M)^k)`` for the monomial ``b = (z - center)^alpha``."""

    j: int
    alpha: tuple[int, ...]
    M: float
    power: int
    theta: complex
    target: tuple[float, ...]
    sup_on_K: float
    value_at_target: float
    needed: float
    center: tuple[complex, ...] = ()

    def evaluate(self, points, n_real: int = 0) -> np.ndarray:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        u = monomial_values(X, self.alpha, n_real, self.center, laurent_floor=0.0) / self.M
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return 2.0 ** -self.j * (self.theta * u ** self.power).real

    @property
    def degree(self) -> int:
        return self.power * sum(abs(a) for a in self.alpha)

    def describe(self) -> str:
        names = ["z"] if len(self.alpha) == 1 else [f"z{i + 1}" for i in range(len(self.alpha))]
        if self.center:
            names = [shifted_name(n, c) for n, c in zip(names, self.center)]
        b = " ".join(n if e == 1 else f"{n}^{e}" for n, e in zip(names, self.alpha) if e)
        return (
            f"2^-{self.j} * Re(({self.theta.real:.6g}{self.theta.imag:+.6g}i) * "
            f"({b} / {self.M:.6g})^{self.power})"
        )


class WitnessError(RuntimeError):
    def __init__(self, message, step=None, required_degree=None):
        super().__init__(message)
        self.step = step
        self.required_degree = required_degree


@dataclass(frozen=True, eq=False)
class Witness:
    terms: tuple[WitnessTerm, ...]
    n_real: int = 0

    def partial(self, points, upto: int | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(X))
        for t in self.terms[: upto if upto is not None else len(self.terms)]:
            out += t.evaluate(X, self.n_real)
        return out

    def growth_table(self) -> list[dict]:
        total = self.partial(np.array([t.target for t in self.terms])) if self.terms else []
        return [
            {"j": t.j, "value": float(v), "bound": t.j - 2.0 ** -t.j}
            for t, v in zip(self.terms, total)
        ]


def _separating_monomial(family: FunctionFamily, K: np.ndarray, w: np.ndarray):
    """``(alpha, M, rho)``: the stored monomial with the largest ``|b(w)| / max|b|(K)``."""
    alphas, mK = family.moduli(K)
    _, mw = family.moduli(w)
    M = mK.max(axis=1)
    ratio = np.where(M > 0, mw[:, 0] / np.where(M > 0, M, 1.0), np.inf)
    i = int(np.argmax(ratio))
    return alphas[i], float(M[i]), float(ratio[i])


def witness_build(family: FunctionFamily, compacts, sequence, k_cap: int = 512, tol: float = 1e-12) -> Witness:
    """Build ``a = sum_j a_j`` with ``max|a_j|(K_j) <= 2^-j`` and ``a_j(w_j) > j + sum_{i<j} |a_i(w_j)|``.

    ``compacts[j-1]`` holds points of ``K_j`` (its distinguished boundary is
    enough) and ``sequence[j-1]`` is ``w_j``. Each term is
    ``2^-j Re(theta (b / max|b|(K_j))^k)`` for the monomial ``b`` separating ``w_j``
    from ``K_j``, the phase ``theta`` making its value at ``w_j`` positive, and the
    smallest power ``k`` that meets the growth requirement.
    """
    if family.structure != "algebra_real_parts":
        raise ValueError("witness series need an algebra family")
    seq = [as_points(w, family.dim) for w in sequence]
    if len(compacts) < len(seq):
        raise ValueError("need one compact per sequence point")
    center = family.basis[1].center if len(family.basis) > 1 else ()
    terms: list[WitnessTerm] = []
    for j, w in enumerate(seq, start=1):
        K = as_points(compacts[j - 1], family.dim)
        alpha, M, rho = _separating_monomial(family, K, w)
        if not rho > 1.0 + tol:
            raise WitnessError(
                f"step {j}: no stored monomial separates the point from K_{j} "
                f"(best modulus ratio {rho:.6g}); the point lies in the truncated hull",
                step=j, required_degree=None,
            )
        prior = sum(abs(float(t.evaluate(w, family.n_real)[0])) for t in terms)
        needed = j + prior
        # 2^-j rho^k > needed  <=>  k > log(needed 2^j) / log(rho)
        k = max(1, int(math.floor(math.log(needed * 2.0 ** j) / math.log(rho))) + 1)
        while k > 1 and 2.0 ** -j * rho ** (k - 1) > needed:
            k -= 1
        while 2.0 ** -j * rho ** k <= needed:
            k += 1
        if k > k_cap:
            raise WitnessError(
                f"step {j}: power {k} needed, above the cap {k_cap}", step=j,
                required_degree=k * sum(abs(a) for a in alpha),
            )
        bw = monomial_values(w, alpha, family.n_real, center)[0]
        theta = complex(np.conj(bw / abs(bw)) ** k)
        probe = WitnessTerm(j, alpha, M, k, theta, tuple(w[0].tolist()), 0.0, 0.0, needed, center)
        sup = float(np.abs(probe.evaluate(K, family.n_real)).max())
        val = float(probe.evaluate(w, family.n_real)[0])
        terms.append(WitnessTerm(j, alpha, M, k, theta, tuple(w[0].tolist()), sup, val, needed, center))
    return Witness(tuple(terms), family.n_real)


def witness_invariants(witness: Witness) -> list[dict]:
    """Term-by-term check of the two witness invariants."""
    rows = []
    for t in witness.terms:
        rows.append({
            "j": t.j, "power": t.power, "sup_on_K": t.sup_on_K,
            "sup_ok": t.sup_on_K <= 2.0 ** -t.j * (1 + 1e-9),
            "value": t.value_at_target, "needed": t.needed,
            "growth_ok": t.value_at_target > t.needed,
        })
    return rows


def divergence_check(witness: Witness, sequence=None, tol: float = 1e-9) -> dict:
    """Partial sums along the sequence must exceed ``j - 2^-j``."""
    if not witness.terms:
        return {"passed": True, "table": []}
    seq = [t.target for t in witness.terms] if sequence is None else sequence
    X = np.atleast_2d(np.asarray(seq, dtype=float))
    vals = witness.partial(X)
    table = [
        {"j": j, "value": float(v), "bound": j - 2.0 ** -j, "ok": bool(v >= j - 2.0 ** -j - tol)}
        for j, v in enumerate(vals, start=1)
    ]
    return {"passed": all(r["ok"] for r in table), "table": table}


def escalator(scenario: DomainScenario, comp: Component, family: FunctionFamily, levels: int):
    """Boundary sequence ``w_j in K_{j+1} outside hull(K_j)``, farthest from ``K_j``.

    When a window has no such point the chain window is shifted forward, and
    the shift is logged.
    """
    chain = comp.chain
    g = scenario.grid
    seq, compacts, log = [], [], []
    i = 1
    while len(seq) < levels and i < len(chain):
        K = chain.points(i)
        cand = np.flatnonzero(chain.mask(i + 1) & ~chain.mask(i))
        if cand.size:
            alphas, mK = family.moduli(K)
            _, mc = family.moduli(g.points[cand])
            outside = (mc > mK.max(axis=1)[:, None] * (1 + 1e-9)).any(axis=0)
            cand = cand[outside]
        if cand.size == 0:
            log.append(f"window {i}: no point of K_{i + 1} outside the hull of K_{i}; shifted")
            i += 1
            continue
        dist, _ = cKDTree(g.points[chain.mask(i)]).query(g.points[cand])
        order = np.lexsort(tuple(g.points[cand].T[::-1]) + (-dist,))
        seq.append(g.points[cand[order[0]]])
        compacts.append(K)
        i += 1
    return seq, compacts, log


def _witness_stage(scenario: DomainScenario):
    if scenario.family.kind != "monomial":
        return {"passed": False, "error": "witness series need an algebra family"}
    k_cap = int(_opt(scenario, "k_cap"))
    out = {"components": []}
    ok = True
    for ci, comp in enumerate(scenario.components, start=1):
        fam = scenario.family_for(comp)
        levels = _opt(scenario, "witness_levels") or (len(comp.chain) - 1)
        seq, compacts, log = escalator(scenario, comp, fam, levels)
        entry = {"component": ci, "sequence": [s.tolist() for s in seq], "relabel_log": log}
        if not seq:
            entry.update(passed=False, error="no boundary sequence could be generated")
            ok = False
        else:
            try:
                wit = witness_build(fam, compacts, seq, k_cap=k_cap)
            except WitnessError as exc:
                entry.update(passed=False, error=str(exc), step=exc.step)
                ok = False
            else:
                inv = witness_invariants(wit)
                div = divergence_check(wit)
                good = all(r["sup_ok"] and r["growth_ok"] for r in inv) and div["passed"]
                entry.update(passed=good, powers=[t.power for t in wit.terms],
                             terms=[t.describe() for t in wit.terms], invariants=inv,
                             growth=div["table"])
                ok = ok and good
        out["components"].append(entry)
    out["passed"] = ok
    return out


# ---------------------------------------------------------------- report


@dataclass(frozen=True)
class CertReport:
    scenario: str
    stages: dict
    classification: str
    coherent: bool
    options: dict
    coherence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "scenario": self.scenario,
            "classification": self.classification,
            "coherent": self.coherent,
            "coherence": self.coherence,
            "options": self.options,
            "stages": self.stages,
        }

    def render_text(self) -> str:
        lines = [f"scenario: {self.scenario}", f"classification: {self.classification}"]
        for name in STAGES:
            st = self.stages[name]
            lines.append(f"  {name:<18} {'pass' if st['passed'] else 'FAIL'}")
            if not st["passed"] and "error" in st:
                lines.append(f"    {st['error']}")
        lines.append(f"hull and exhaustion stages agree: {'yes' if self.coherent else 'no'}")
        return "\n".join(lines) + "\n"


def classify(verdicts: dict) -> str:
    return "consistent-with-convex" if all(verdicts[s] for s in STAGES) else "inconsistent"


def cartan_thullen_report(scenario: DomainScenario, options: dict | None = None) -> CertReport:
    """Run all four stages; the result depends only on the scenario and options."""
    if options:
        scenario = DomainScenario(scenario.name, scenario.grid, scenario.components, scenario.family,
                                  {**scenario.options, **options}, scenario.expected)
    stages = {}
    stages["hull_compactness"] = fconvexity_certify(scenario)
    p, info = _exhaustion_stage(scenario)
    stages["exhaustion_built"] = info
    stages["polygons_built"] = _polygon_stage(scenario, p)
    stages["witness_built"] = _witness_stage(scenario)
    verdicts = {k: bool(v["passed"]) for k, v in stages.items()}
    coherent = verdicts["hull_compactness"] == verdicts["exhaustion_built"]
    escaping = [r for r in stages["hull_compactness"]["records"] if r["escape"]]
    coherence = {
        "first_escaping_compact": escaping[0]["compact"] if escaping else None,
        "exhaustion_failed_level": stages["exhaustion_built"].get("level"),
    }
    opts = {k: scenario.options.get(k, DEFAULT_OPTIONS[k]) for k in DEFAULT_OPTIONS}
    return CertReport(scenario.name, stages, classify(verdicts), coherent, opts, coherence)
