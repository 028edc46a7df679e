"""Feature embedding of points by basis evaluations, and point-separation diagnostics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .families import FunctionFamily, as_points


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Evaluation matrix: row i is basis function i, column j is point j."""

    entries: np.ndarray
    fingerprint: str
    points: np.ndarray
    descriptions: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["basis"] + [f"p{j}" for j in range(self.entries.shape[1])])
        for desc, row in zip(self.descriptions, self.entries):
            writer.writerow([desc] + [f"{v:.17g}" for v in row])
        return buf.getvalue()


def embed(family: FunctionFamily, S) -> FeatureMatrix:
    """Feature columns of the points ``S`` under ``family``."""
    X = as_points(S, family.dim)
    if X.shape[0] == 0:
        raise ValueError("cannot embed an empty point set")
    entries = family.evaluate(X)
    entries.setflags(write=False)
    return FeatureMatrix(entries, family.fingerprint, X, tuple(family.describe()))


@dataclass(frozen=True)
class SeparationReport:
    pairs: tuple[tuple[int, int, float], ...]  # (i, j, max-norm feature distance)
    n_points: int
    tol: float

    @property
    def separates(self) -> bool:
        return not self.pairs


def separation_check(family: FunctionFamily, S, tol: float = 1e-9) -> SeparationReport:
    """Pairs of points of ``S`` whose feature columns are closer than ``tol`` in max-norm."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = as_points(S, family.dim)
    feats = family.evaluate(X).T
    tree = cKDTree(feats)
    found = []
    for i, j in sorted(tree.query_pairs(tol, p=np.inf)):
        d = float(np.max(np.abs(feats[i] - feats[j])))
        if d < tol:
            found.append((int(i), int(j), d))
    return SeparationReport(tuple(found), X.shape[0], tol)
