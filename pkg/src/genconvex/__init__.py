"""Hulls, exhaustion functions and convexity certificates for function families on discretized domains."""

from .families import (
    BasisFunction,
    Combination,
    FunctionFamily,
    Point,
    affine_family,
    custom_family,
    monomial_family,
)
from .gelfand import embed, separation_check
from .hull import compute_hull, membership_C, membership_linear, membership_modulus, power_trick_refine
from .exhaustion import build_exhaustion_cone, build_exhaustion_symmetric, polygon_exhaustion
from .certify import cartan_thullen_report, fconvexity_certify, witness_build

__version__ = "0.1.0"

__all__ = [
    "BasisFunction",
    "Combination",
    "FunctionFamily",
    "Point",
    "affine_family",
    "build_exhaustion_cone",
    "build_exhaustion_symmetric",
    "cartan_thullen_report",
    "compute_hull",
    "custom_family",
    "embed",
    "fconvexity_certify",
    "membership_C",
    "membership_linear",
    "membership_modulus",
    "monomial_family",
    "polygon_exhaustion",
    "power_trick_refine",
    "separation_check",
    "witness_build",
]
