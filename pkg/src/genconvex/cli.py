"""Command-line front end.

Exit codes: 0 success, 2 evidence (escape, construction failure or an
inconsistent report), 1 error. Stderr lines start with ``error:`` or
``evidence:``.

Point-set specs for ``hull --set`` and ``hull --query``::

    grid                  every grid point (query only)
    escape                margin and outside points (query only)
    chain:I               compact K_I of the scenario chain
    circle:R:N[:X,Y]      N samples of the circle |z - (X+iY)| = R
    torus:R1,R2:N         N*N samples of the torus |z| = R1, |w| = R2
    points:X,Y;X,Y        explicit points (for a query, the nearest grid points)
    near:X,Y              the grid point nearest to the given point (query only)
    file:PATH             CSV or JSON list of points
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import export
from .certify import STAGES, build_scenario_exhaustion, cartan_thullen_report
from .exhaustion import ConstructionError, polygon_exhaustion
from .families import cone_sample
from .grids import ChainError, circle_samples, torus_samples
from .hull import MODES, compute_hull
from .lp import IndeterminateError
from .scenarios import ScenarioError, builtin, load

EXIT_OK, EXIT_ERROR, EXIT_EVIDENCE = 0, 1, 2


class SpecError(ValueError):
    """A point-set spec could not be parsed."""


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise SpecError(f"expected comma-separated numbers, got {text!r}") from None


def _read_points(path: str) -> np.ndarray:
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = [[float(v) for v in row] for row in csv.reader(text.splitlines()) if row and not row[0].startswith("#")]
    pts = np.atleast_2d(np.asarray(data, dtype=float))
    return pts


def parse_set(spec: str, scenario, component: int = 1) -> np.ndarray:
    """Points of the generating set ``S``."""
    head, _, rest = spec.partition(":")
    chain = scenario.components[component - 1].chain
    try:
        if head == "chain":
            i = int(rest)
            if not 1 <= i <= len(chain):
                raise SpecError(f"chain index {i} out of range 1..{len(chain)}")
            return chain.generators(i)
        if head == "circle":
            parts = rest.split(":")
            center = complex(*_floats(parts[2])) if len(parts) > 2 else 0j
            return circle_samples(float(parts[0]), int(parts[1]), center)
        if head == "torus":
            r, n = rest.split(":")
            r1, r2 = _floats(r)
            return torus_samples(r1, r2, int(n))
        if head == "points":
            return np.array([_floats(p) for p in rest.split(";")])
        if head == "file":
            return _read_points(rest)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"malformed set spec {spec!r}: {exc}") from None
    raise SpecError(f"unknown set spec {spec!r}")


def parse_query(spec: str, scenario, component: int = 1) -> np.ndarray:
    """Grid indices to query."""
    g = scenario.grid
    head, _, rest = spec.partition(":")
    if head == "grid":
        return np.arange(len(g))
    if head == "escape":
        return np.flatnonzero(g.escape_zone)
    if head == "chain":
        chain = scenario.components[component - 1].chain
        try:
            return np.flatnonzero(chain.mask(int(rest)))
        except (ValueError, IndexError):
            raise SpecError(f"bad chain index in {spec!r}") from None
    if head == "near":
        pts = [_floats(rest)]
    else:
        pts = parse_set(spec, scenario, component)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != g.dim:
        raise SpecError(f"query points need {g.dim} coordinates, got {pts.shape[1]}")
    return np.unique([g.nearest(p) for p in pts])


def _load(ref: str):
    if ref.startswith("builtin:"):
        return builtin(ref.split(":", 1)[1])
    path = Path(ref)
    if not path.is_file():
        raise FileNotFoundError(f"scenario file not found: {ref}")
    return load(path)


def _coord_names(g) -> list[str]:
    names = [f"x{i + 1}" for i in range(g.n_real)]
    names += [f"re_z{i + 1}" for i in range(g.n_complex)]
    names += [f"im_z{i + 1}" for i in range(g.n_complex)]
    return names


# ---------------------------------------------------------------- commands


def cmd_hull(args) -> int:
    sc = _load(args.scenario)
    comp = sc.components[args.component - 1]
    fam = sc.family_for(comp, args.degree)
    if args.mode == "cone":
        fam = cone_sample(fam)
    S = parse_set(args.set, sc, args.component)
    query = parse_query(args.query, sc, args.component)
    hull = compute_hull(fam, S, sc.grid, C=args.C, mode=args.mode, query=query)
    out = Path(args.out)
    g = sc.grid
    rows = []
    for k, (j, v) in enumerate(zip(hull.query_index, hull.verdicts)):
        rows.append([int(j), *g.points[j].tolist(), bool(v.member), bool(hull.escape_candidates[k]),
                     bool(g.inside[j]), float(v.gap)])
    header = ["index", *_coord_names(g), "member", "escape_zone", "inside", "gap"]
    export.write_text(out / "hull.csv", export.csv_text(header, rows))
    certs = []
    for j, v in zip(hull.query_index, hull.verdicts):
        if v.certificate is not None:
            c = v.certificate
            certs.append({"index": int(j), "kind": c.kind, "function": c.description,
                          "value": c.value, "bound": c.bound, "C": c.C})
    escapes = [int(hull.query_index[k]) for k in hull.escapes]
    doc = {
        "scenario": sc.name, "mode": hull.mode, "C": hull.C, "family": fam.fingerprint,
        "degree": fam.max_degree, "samples": int(len(S)), "queried": int(len(query)),
        "members": int(hull.members.sum()), "escape": hull.escape,
        "escape_points": [{"index": j, "point": g.points[j].tolist(), "outside_domain": bool(not g.inside[j])}
                          for j in escapes],
        "certificates": certs,
    }
    export.write_json(out / "certificates.json", doc)
    if g.dim == 2:
        export.write_text(out / "hull.svg", export.hull_svg(g, hull, S))
    if hull.escape:
        j = escapes[0]
        where = "outside the domain" if not g.inside[j] else "in the boundary margin"
        print(f"evidence: hull of the set escapes at grid point {j} {g.points[j].tolist()} ({where}); "
              f"{len(escapes)} escaping point(s)", file=sys.stderr)
        return EXIT_EVIDENCE
    return EXIT_OK


def cmd_exhaust(args) -> int:
    sc = _load(args.scenario)
    out = Path(args.out)
    try:
        p = build_scenario_exhaustion(sc, args.path)
    except ConstructionError as exc:
        pts = np.asarray(exc.points)
        export.write_json(out / "exhaustion.json", {
            "scenario": sc.name, "built": False, "error": str(exc), "level": exc.level,
            "component": exc.component, "uncovered_points": pts.tolist(),
            "best_ratios": np.asarray(exc.ratios).tolist(),
        })
        print(f"evidence: construction failed at level {exc.level}: {exc}", file=sys.stderr)
        for row in pts[:5]:
            print(f"evidence: uncovered shell point {row.tolist()}", file=sys.stderr)
        return EXIT_EVIDENCE
    g = sc.grid
    values = p.evaluate_grid(g)
    export.write_json(out / "exhaustion.json", {"scenario": sc.name, "built": True, **p.describe(),
                                                "diagnostics": p.diagnostics})
    rows = [[j, *g.points[j].tolist(), float(values[j])] for j in range(len(g))]
    export.write_text(out / "values.csv", export.csv_text(["index", *_coord_names(g), "p"], rows))
    count = int(sc.option("polygons", 3))
    offset = len(sc.components) if p.components else 0
    polys = polygon_exhaustion(p, count + offset, g)
    export.write_json(out / "polygons.json", {
        "ok": polys.ok,
        "nested": list(polys.nested),
        "diagnostics": polys.diagnostics,
        "polygons": [
            {"t": P.t, "members": int(P.members.sum()), "empty_reason": P.empty_reason,
             "sides": [[h.describe() for h in side] for side in P.sides]}
            for P in polys.polygons
        ],
    })
    if g.dim == 2:
        levels = [offset + t for t in range(1, count + 1)]
        export.write_text(out / "contours.svg", export.contour_svg(g, values, levels))
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = _load(args.scenario)
    report = cartan_thullen_report(sc)
    out = Path(args.out)
    export.write_json(out / "report.json", report.to_dict())
    export.write_text(out / "report.txt", report.render_text())
    if report.classification == "consistent-with-convex":
        return EXIT_OK
    for name in STAGES:
        st = report.stages[name]
        if not st["passed"]:
            detail = st.get("error", "")
            if name == "hull_compactness":
                rec = next(r for r in st["records"] if r["escape"])
                detail = f"K_{rec['compact']} at C={rec['C']:g} reaches {rec['escape_point']}"
            print(f"evidence: {name} failed: {detail}".rstrip(), file=sys.stderr)
    return EXIT_EVIDENCE


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; exit code 2 is reserved for evidence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="genconvex", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    scen_help = "scenario JSON file, or builtin:NAME"

    h = sub.add_parser("hull", help="hull of a point set over the scenario grid")
    h.add_argument("scenario", help=scen_help)
    h.add_argument("--set", default="chain:1", help="generating set spec (default chain:1)")
    h.add_argument("--query", default="grid", help="query spec (default grid)")
    h.add_argument("--mode", choices=MODES, default="linear")
    h.add_argument("--C", type=float, default=1.0)
    h.add_argument("--degree", type=int, default=None, help="override the family degree")
    h.add_argument("--component", type=int, default=1)
    h.add_argument("--out", default="out")
    h.set_defaults(func=cmd_hull)

    e = sub.add_parser("exhaust", help="build an exhaustion function and its polygons")
    e.add_argument("scenario", help=scen_help)
    e.add_argument("--path", choices=("symmetric", "cone", "components"), default=None)
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_exhaust)

    c = sub.add_parser("certify", help="run the four-stage equivalence report")
    c.add_argument("scenario", help=scen_help)
    c.add_argument("--out", default="out")
    c.set_defaults(func=cmd_certify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "component", 1) < 1:
            raise ValueError("--component must be at least 1")
        return args.func(args)
    except (ScenarioError, SpecError, ChainError, IndeterminateError, OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
