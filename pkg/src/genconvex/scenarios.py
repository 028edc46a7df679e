"""Scenario files: schema, loading, and the bundled model domains."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .certify import Component, DomainScenario, FamilySpec
from .grids import (
    annulus_grid,
    bidisc_grid,
    circle_samples,
    disc_grid,
    explicit_chain,
    hartogs_grid,
    points_grid,
    radial_chain,
    rect_grid,
    torus_samples,
)

BUILTIN = ("disc", "annulus", "polydisc", "hartogs", "two_disc")

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "grid", "chain", "family"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "expected": {"enum": ["consistent-with-convex", "inconsistent"]},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["rect", "disc", "annulus", "bidisc", "hartogs", "points"]},
                "params": {"type": "object"},
                "resolution": {"type": "integer", "minimum": 8},
                "margin_cells": {"type": "integer", "minimum": 1},
            },
        },
        "chain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "params"],
            "properties": {
                "kind": {"enum": ["radial", "explicit"]},
                "params": {"type": "object"},
            },
        },
        "family": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["affine", "monomial"]},
                "n_real": {"type": "integer", "minimum": 1},
                "n_complex": {"type": "integer", "minimum": 1},
                "max_degree": {"type": "integer", "minimum": 1},
                "laurent": {"type": "boolean"},
                "local": {"type": "boolean"},
            },
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "C": {"type": "array", "items": {"type": "number", "minimum": 1}, "minItems": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_degree_sweep": {"type": "integer", "minimum": 1},
                "k_cap": {"type": "integer", "minimum": 1},
                "path": {"enum": ["symmetric", "cone", "components"]},
                "polygons": {"type": "integer", "minimum": 0},
                "witness_levels": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ScenarioError(ValueError):
    """The scenario document is malformed or describes an invalid domain."""


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"scenario schema violation at {where}: {exc.message}") from None


def _grid(spec: dict):
    kind = spec["kind"]
    p = dict(spec.get("params", {}))
    res = spec.get("resolution", 16 if kind in ("bidisc", "hartogs") else 60)
    margin = spec.get("margin_cells", 1)
    try:
        if kind == "rect":
            return rect_grid(p["lo"], p["hi"], res, margin)
        if kind == "disc":
            centers = [complex(*c) for c in p.get("centers", [[0.0, 0.0]])]
            return disc_grid(centers, p.get("radius", 1.0), res, margin)
        if kind == "annulus":
            return annulus_grid(p.get("inner", 0.5), p.get("outer", 1.0), p.get("floor", 0.25), res, margin)
        if kind == "bidisc":
            return bidisc_grid(tuple(p.get("radii", (1.0, 1.0))), res, margin)
        if kind == "hartogs":
            return hartogs_grid(p.get("a", 0.5), p.get("b", 0.5), tuple(p.get("radii", (1.0, 1.0))), res, margin)
        return points_grid(p["points"], p.get("n_real", 0), p.get("n_complex", 0),
                           p.get("margin", ()), p.get("outside", ()))
    except KeyError as exc:
        raise ScenarioError(f"grid params missing key {exc.args[0]!r}") from None


def _sample_points(specs):
    """Concatenate circle and torus samples described as ``{"circle": [r], ...}`` or ``{"torus": [r1, r2], ...}``."""
    parts = []
    for spec in specs:
        n = int(spec.get("n", 16))
        if "torus" in spec:
            parts.append(torus_samples(*spec["torus"], n))
        elif "circle" in spec:
            center = complex(*spec.get("center", (0.0, 0.0)))
            parts.append(circle_samples(spec["circle"][0], n, center))
        else:
            raise ScenarioError(f"sample spec needs 'circle' or 'torus': {spec}")
    return np.concatenate(parts) if parts else None


def _components(grid, chain_spec: dict, local: bool):
    kind = chain_spec["kind"]
    p = chain_spec["params"]
    if kind == "explicit":
        if "levels" not in p:
            raise ScenarioError("explicit chain params need 'levels'")
        samples = p.get("samples")
        if samples is not None:
            samples = [_sample_points(level) for level in samples]
        chain = explicit_chain(grid, p["levels"], samples)
        return (Component(np.ones(len(grid), dtype=bool), chain),)
    if "radii" not in p:
        raise ScenarioError("radial chain params need 'radii'")
    samples = int(p.get("samples", 0))
    if grid.kind == "disc" and len(grid.params["centers"]) > 1:
        comps = []
        for c, (x, y) in enumerate(grid.params["centers"], start=1):
            center = complex(x, y)
            chain = radial_chain(grid, p["radii"], samples, center=center)
            comps.append(Component(grid.labels == c, chain, (center,) if local else None))
        return tuple(comps)
    chain = radial_chain(grid, p["radii"], samples)
    return (Component(np.ones(len(grid), dtype=bool), chain),)


def from_dict(doc: dict) -> DomainScenario:
    """Validate and build a scenario from a parsed document."""
    validate(doc)
    fam = doc["family"]
    spec = FamilySpec(
        kind=fam["kind"],
        n_real=fam.get("n_real", 0),
        n_complex=fam.get("n_complex", 1 if fam["kind"] == "monomial" else 0),
        max_degree=fam.get("max_degree", 1),
        laurent=fam.get("laurent", False),
        local=fam.get("local", False),
    )
    if spec.kind == "affine" and spec.n_real < 1:
        raise ScenarioError("affine families need n_real >= 1")
    try:
        grid = _grid(doc["grid"])
        comps = _components(grid, doc["chain"], spec.local)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    dim = spec.n_real + 2 * spec.n_complex if spec.kind == "monomial" else spec.n_real
    if dim != grid.dim:
        raise ScenarioError(f"family acts on {dim} real coordinates but the grid has {grid.dim}")
    return DomainScenario(doc["name"], grid, comps, spec, dict(doc.get("options", {})), doc.get("expected"))


def load(path) -> DomainScenario:
    """Read a scenario JSON file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed JSON in {path}: {exc}") from None
    return from_dict(doc)


def builtin_document(name: str) -> dict:
    if name not in BUILTIN:
        raise ScenarioError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTIN)}")
    text = resources.files("genconvex").joinpath("data").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def builtin(name: str) -> DomainScenario:
    """One of the bundled model domains."""
    return from_dict(builtin_document(name))


def builtin_path(name: str) -> Path:
    builtin_document(name)
    return Path(str(resources.files("genconvex").joinpath("data").joinpath(f"{name}.json")))
