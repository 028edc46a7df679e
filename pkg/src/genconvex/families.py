"""Finite function families: affine spans, (Laurent) monomial real parts, cone samples.

A point is a flat vector of reals: the ``n_real`` real coordinates first, then
the real parts of the ``n_complex`` complex coordinates, then their imaginary
parts. The complex structure is carried by the family, never by the point.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

LAURENT_FLOOR = 1e-6

STRUCTURES = ("linear_span", "cone_sample", "algebra_real_parts")
KINDS = ("constant", "affine", "re_monomial", "im_monomial")


class DomainError(ValueError):
    """A basis function was evaluated outside its domain."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DegenerateFamilyError(ValueError):
    """The family holds only constants and separates no points."""


@dataclass(frozen=True)
class Point:
    coords: tuple[float, ...]
    n_real: int
    n_complex: int = 0

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)
        if len(coords) != self.n_real + 2 * self.n_complex:
            raise ValueError(
                f"point has {len(coords)} coordinates, expected "
                f"{self.n_real} + 2*{self.n_complex}"
            )
        if not all(np.isfinite(coords)):
            raise ValueError("point coordinates must be finite")

    @classmethod
    def real(cls, *xs: float) -> "Point":
        return cls(tuple(xs), len(xs), 0)

    @classmethod
    def complex(cls, *zs: complex) -> "Point":
        zs = [complex(z) for z in zs]
        return cls(tuple(z.real for z in zs) + tuple(z.imag for z in zs), 0, len(zs))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def complex_points(zs) -> np.ndarray:
    """Stack complex coordinates (shape ``(N,)`` or ``(N, n)``) into real point rows."""
    zs = np.asarray(zs, dtype=complex)
    if zs.ndim == 1:
        zs = zs[:, None]
    return np.concatenate([zs.real, zs.imag], axis=1)


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce a Point, a list of Points or an array into an ``(N, d)`` float array."""
    if isinstance(points, Point):
        arr = points.array[None, :]
    elif isinstance(points, (list, tuple)) and points and isinstance(points[0], Point):
        arr = np.array([p.coords for p in points], dtype=float)
    else:
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :] if dim is None or arr.shape[0] == dim else arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"points must form a 2-D array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: points have {arr.shape[1]} coordinates, family expects {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def shifted_name(name: str, c) -> str:
    """``z`` shifted by a center, e.g. ``(z+2)`` or ``(z-(1+1j))``."""
    c = complex(c)
    if c == 0:
        return name
    if c.imag == 0:
        return f"({name}{-c.real:+g})"
    return f"({name}-({c.real:g}{c.imag:+g}j))"


@dataclass(frozen=True)
class BasisFunction:
    """One real generator: a constant, an affine map, or Re/Im of a complex monomial."""

    kind: str
    coeffs: tuple[float, ...] = ()
    offset: float = 0.0
    alpha: tuple[int, ...] = ()
    scale: float = 1.0
    center: tuple[complex, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "affine":
            return not any(self.coeffs)
        return not any(self.alpha)

    @property
    def degree(self) -> int:
        if self.kind in ("re_monomial", "im_monomial"):
            return int(sum(abs(a) for a in self.alpha))
        return 0 if self.is_constant else 1

    def negated(self) -> "BasisFunction":
        return replace(self, scale=-self.scale)

    def describe(self) -> str:
        if self.kind == "constant":
            body = "1"
        elif self.kind == "affine":
            terms = [f"x{i + 1}" if c == 1 else f"{c:g}*x{i + 1}" for i, c in enumerate(self.coeffs) if c]
            if self.offset or not terms:
                terms.append(f"{self.offset:g}")
            body = " + ".join(terms)
            if len(terms) > 1:
                body = f"({body})"
        else:
            names = ["z"] if len(self.alpha) == 1 else [f"z{j + 1}" for j in range(len(self.alpha))]
            if self.center and any(self.center):
                names = [shifted_name(n, c) for n, c in zip(names, self.center)]
            factors = [n if a == 1 else f"{n}^{a}" for n, a in zip(names, self.alpha) if a]
            part = "Re" if self.kind == "re_monomial" else "Im"
            body = f"{part} {' '.join(factors)}"
        if self.scale == 1.0:
            return body
        if self.scale == -1.0:
            return f"-{body}"
        return f"{self.scale:g}*{body}"

    def evaluate(self, points, n_real: int = 0, laurent_floor: float = LAURENT_FLOOR) -> np.ndarray:
        """Vectorized evaluation over ``(N, d)`` points."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(X.shape[0], self.scale)
        if self.kind == "affine":
            coeffs = np.asarray(self.coeffs, dtype=float)
            if X.shape[1] < coeffs.size:
                raise ValueError(
                    f"dimension mismatch: affine map needs {coeffs.size} coordinates, got {X.shape[1]}"
                )
            return self.scale * (X[:, : coeffs.size] @ coeffs + self.offset)
        z = monomial_values(X, self.alpha, n_real, self.center, laurent_floor)
        return self.scale * (z.real if self.kind == "re_monomial" else z.imag)


def monomial_values(X: np.ndarray, alpha, n_real: int = 0, center=(), laurent_floor: float = LAURENT_FLOOR) -> np.ndarray:
    """Complex values of ``(z - center)^alpha`` at real point rows ``X``."""
    n = len(alpha)
    if X.shape[1] != n_real + 2 * n:
        raise ValueError(
            f"dimension mismatch: monomial in {n} complex variables needs "
            f"{n_real + 2 * n} coordinates, got {X.shape[1]}"
        )
    z = X[:, n_real : n_real + n] + 1j * X[:, n_real + n :]
    if center:
        z = z - np.asarray(center, dtype=complex)
    out = np.ones(X.shape[0], dtype=complex)
    for j, a in enumerate(alpha):
        if a == 0:
            continue
        zj = z[:, j]
        if a < 0:
            bad = np.flatnonzero(np.abs(zj) < laurent_floor)
            if bad.size:
                raise DomainError(
                    f"Laurent power z{j + 1}^{a} evaluated within {laurent_floor:g} of the "
                    f"coordinate hyperplane at point {int(bad[0])}",
                    index=int(bad[0]),
                )
        out = out * zj ** a
    return out


def evaluate(f: BasisFunction, point, n_real: int | None = None, laurent_floor: float = LAURENT_FLOOR) -> float:
    """Value of one basis function at one point."""
    if isinstance(point, Point):
        n_real = point.n_real if n_real is None else n_real
        X = point.array[None, :]
    else:
        X = np.asarray(point, dtype=float).reshape(1, -1)
    return float(f.evaluate(X, n_real or 0, laurent_floor)[0])


@dataclass(frozen=True)
class FunctionFamily:
    basis: tuple[BasisFunction, ...]
    structure: str
    symmetric: bool
    n_real: int = 0
    n_complex: int = 0
    max_degree: int | None = None
    laurent: bool = False
    laurent_floor: float = LAURENT_FLOOR
    contains_constants: bool = field(init=False)

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown family structure {self.structure!r}")
        basis = tuple(self.basis)
        object.__setattr__(self, "basis", basis)
        if not basis or basis[0] != BasisFunction("constant"):
            raise ValueError("basis element 0 must be the constant function 1")
        if len(set(basis)) != len(basis):
            raise ValueError("basis elements must be pairwise distinct")
        if not self.laurent:
            for f in basis:
                if any(a < 0 for a in f.alpha):
                    raise ValueError(f"negative exponent in {f.describe()} but the family is not Laurent")
        object.__setattr__(self, "contains_constants", True)

    def __len__(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return self.n_real + 2 * self.n_complex

    @property
    def degenerate(self) -> bool:
        return all(f.is_constant for f in self.basis)

    def require_nondegenerate(self) -> None:
        if self.degenerate:
            raise DegenerateFamilyError("family contains only constants and separates no points")

    def describe(self) -> list[str]:
        return [f.describe() for f in self.basis]

    @property
    def fingerprint(self) -> str:
        text = "|".join([self.structure, str(self.n_real), str(self.n_complex)] + [repr(f) for f in self.basis])
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def evaluate(self, points) -> np.ndarray:
        """Evaluation matrix of shape ``(len(basis), N)``."""
        X = as_points(points, self.dim)
        out = np.empty((len(self.basis), X.shape[0]))
        for i, f in enumerate(self.basis):
            try:
                out[i] = f.evaluate(X, self.n_real, self.laurent_floor)
            except DomainError as exc:
                raise DomainError(f"{f.describe()}: {exc}", exc.index) from None
        return out

    def defined(self, points) -> np.ndarray:
        """Mask of points where every basis function can be evaluated (Laurent poles excluded)."""
        X = as_points(points, self.dim)
        ok = np.ones(X.shape[0], dtype=bool)
        r, n = self.n_real, self.n_complex
        for f in self.basis:
            if f.alpha is None or min(f.alpha, default=0) >= 0:
                continue
            z = X[:, r : r + n] + 1j * X[:, r + n :]
            if f.center:
                z = z - np.asarray(f.center, dtype=complex)
            for j, a in enumerate(f.alpha):
                if a < 0:
                    ok &= np.abs(z[:, j]) >= self.laurent_floor
        return ok

    def pairs(self) -> list[tuple[tuple[int, ...], int, int]]:
        """``(alpha, re_index, im_index)`` for every stored complex monomial."""
        if self.structure != "algebra_real_parts":
            raise ValueError("modulus queries need a family of real parts of a complex algebra")
        re_idx, im_idx = {}, {}
        for i, f in enumerate(self.basis):
            if f.kind == "re_monomial" and f.scale == 1.0:
                re_idx[f.alpha] = i
            elif f.kind == "im_monomial" and f.scale == 1.0:
                im_idx[f.alpha] = i
        return [(a, re_idx[a], im_idx[a]) for a in re_idx if a in im_idx]

    def moduli(self, points) -> tuple[list[tuple[int, ...]], np.ndarray]:
        """Moduli ``|z^alpha|`` for every stored pair, shape ``(pairs, N)``."""
        pairs = self.pairs()
        vals = self.evaluate(points)
        mods = np.array([np.hypot(vals[r], vals[i]) for _, r, i in pairs]).reshape(len(pairs), -1)
        return [a for a, _, _ in pairs], mods

    def combination(self, coeffs) -> "Combination":
        return Combination(self, np.asarray(coeffs, dtype=float))


@dataclass(frozen=True, eq=False)
class Combination:
    """The function ``sum_i coeffs[i] * basis[i]``; certificates and polygon sides use it."""

    family: FunctionFamily
    coeffs: np.ndarray

    def evaluate(self, points) -> np.ndarray:
        X = as_points(points, self.family.dim)
        out = np.zeros(X.shape[0])
        for c, f in zip(self.coeffs, self.family.basis):
            if c:
                out += c * f.evaluate(X, self.family.n_real, self.family.laurent_floor)
        return out

    def describe(self, digits: int = 6) -> str:
        terms = [
            f"{c:+.{digits}g}*[{f.describe()}]"
            for c, f in zip(self.coeffs, self.family.basis)
            if abs(c) > 0
        ]
        return " ".join(terms) if terms else "0"


def affine_family(n_real: int) -> FunctionFamily:
    """Span of ``{1, x_1, ..., x_n}`` on real n-space."""
    if int(n_real) != n_real or n_real <= 0:
        raise ValueError(f"n_real must be a positive integer, got {n_real}")
    basis = [BasisFunction("constant")]
    for i in range(n_real):
        e = [0.0] * n_real
        e[i] = 1.0
        basis.append(BasisFunction("affine", coeffs=tuple(e)))
    return FunctionFamily(tuple(basis), "linear_span", True, n_real=n_real, max_degree=1)


def multi_indices(n_complex: int, max_degree: int, laurent: bool = False) -> list[tuple[int, ...]]:
    """Exponents with ``1 <= |alpha|_1 <= max_degree``, by degree then descending lexicographic."""
    lo = -max_degree if laurent else 0
    out = [
        a
        for a in itertools.product(range(lo, max_degree + 1), repeat=n_complex)
        if 1 <= sum(abs(x) for x in a) <= max_degree
    ]
    out.sort(key=lambda a: (sum(abs(x) for x in a), tuple(-x for x in a)))
    return out


def monomial_family(
    n_complex: int,
    max_degree: int,
    laurent: bool = False,
    center: Sequence[complex] | None = None,
    laurent_floor: float = LAURENT_FLOOR,
) -> FunctionFamily:
    """``1`` plus ``Re z^alpha, Im z^alpha`` for all exponents up to ``max_degree``.

    ``center`` shifts every monomial to ``(z - center)^alpha``; polynomials in
    the shifted variable span the same space.
    """
    if int(n_complex) != n_complex or n_complex < 1:
        raise ValueError(f"n_complex must be a positive integer, got {n_complex}")
    if int(max_degree) != max_degree or max_degree < 1:
        raise ValueError(f"max_degree must be a positive integer, got {max_degree}")
    c = tuple(complex(v) for v in center) if center is not None else ()
    if c and len(c) != n_complex:
        raise ValueError("center must have one entry per complex variable")
    if c and not any(c):
        c = ()
    basis = [BasisFunction("constant")]
    for a in multi_indices(n_complex, max_degree, laurent):
        basis.append(BasisFunction("re_monomial", alpha=a, center=c))
        basis.append(BasisFunction("im_monomial", alpha=a, center=c))
    return FunctionFamily(
        tuple(basis),
        "algebra_real_parts",
        True,
        n_complex=n_complex,
        max_degree=max_degree,
        laurent=laurent,
        laurent_floor=laurent_floor,
    )


def custom_family(
    basis: Iterable[BasisFunction],
    structure: str = "linear_span",
    n_real: int = 0,
    n_complex: int = 0,
    laurent: bool = False,
) -> FunctionFamily:
    """Family from an explicit basis; the constant 1 is prepended when missing."""
    basis = list(basis)
    one = BasisFunction("constant")
    if one in basis:
        basis.remove(one)
    basis.insert(0, one)
    symmetric = structure != "cone_sample"
    degrees = [f.degree for f in basis]
    return FunctionFamily(
        tuple(basis), structure, symmetric, n_real=n_real, n_complex=n_complex,
        max_degree=max(degrees), laurent=laurent,
    )


def cone_sample(family: FunctionFamily) -> FunctionFamily:
    """The basis of ``family`` as an explicit, symmetrized cone sample."""
    sample = replace(family, structure="cone_sample", symmetric=False)
    return symmetrize(sample)


def symmetrize(family: FunctionFamily) -> FunctionFamily:
    """Append the negation of every cone element whose negation is missing."""
    if family.structure != "cone_sample":
        raise ValueError("symmetrize applies to cone_sample families; spans are symmetric already")
    basis = list(family.basis)
    present = set(basis)
    for f in family.basis:
        g = f.negated()
        if g not in present:
            basis.append(g)
            present.add(g)
    return replace(family, basis=tuple(basis), symmetric=True)


@dataclass(frozen=True)
class MaxPrincipleCheck:
    description: str
    max_K: float
    max_U: float
    status: str  # "pass", "fail" or "skipped"


@dataclass(frozen=True)
class MaxPrincipleReport:
    checks: tuple[MaxPrincipleCheck, ...]
    n_K: int
    n_U: int

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    @property
    def failures(self) -> list[MaxPrincipleCheck]:
        return [c for c in self.checks if c.status == "fail"]


def maximum_principle_test(family: FunctionFamily, K, U, margin: float = 1e-6) -> MaxPrincipleReport:
    """Check ``max f(K) + margin <= max f(U)`` for every non-constant basis element.

    ``U`` stands for an open set around ``K`` known through samples, so the
    sup over ``U`` is taken over ``U`` together with ``K``.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    K = as_points(K, family.dim)
    U = as_points(U, family.dim)
    if K.shape[0] == 0 or U.shape[0] == 0:
        raise ValueError("K and U must be nonempty")
    vk = family.evaluate(K).max(axis=1)
    vu = np.maximum(family.evaluate(U).max(axis=1), vk)
    checks = []
    for f, a, b in zip(family.basis, vk, vu):
        if f.is_constant:
            status = "skipped"
        else:
            status = "pass" if a + margin <= b else "fail"
        checks.append(MaxPrincipleCheck(f.describe(), float(a), float(b), status))
    return MaxPrincipleReport(tuple(checks), K.shape[0], U.shape[0])
