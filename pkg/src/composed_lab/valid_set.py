"""Discrete valid output sets, hard projection, and adjacency statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidInput

if TYPE_CHECKING:
    from .spline import StaircaseSpec


@dataclass(frozen=True)
class ValidSet:
    """N distinct points in R^k. List order is the tie-breaking order."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidInput("valid set needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("valid set coordinates must be finite")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise InvalidInput("valid set points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def __contains__(self, y) -> bool:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return bool(np.any(np.all(self.points == y, axis=1)))

    def index_of(self, y) -> int:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        hits = np.flatnonzero(np.all(self.points == y, axis=1))
        if len(hits) == 0:
            raise InvalidInput(f"{y.tolist()} is not a member of the valid set")
        return int(hits[0])

    def coordinate_values(self, j: int) -> np.ndarray:
        """Sorted distinct values taken by coordinate j."""
        return np.unique(self.points[:, j])

    def to_json(self) -> str:
        return json.dumps(self.points.tolist())

    @classmethod
    def from_json(cls, text: str) -> "ValidSet":
        return cls(np.array(json.loads(text), dtype=float))

    @classmethod
    def load(cls, path) -> "ValidSet":
        return cls.from_json(Path(path).read_text())

    @classmethod
    def integers(cls, lo: int, hi: int) -> "ValidSet":
        """The integers lo..hi inclusive as a k=1 valid set."""
        return cls(np.arange(lo, hi + 1, dtype=float)[:, None])


def project(y, V: ValidSet) -> tuple[int, np.ndarray]:
    """Nearest point of V to y in Euclidean distance; exact ties go to the lowest index."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (V.k,):
        raise InvalidInput(f"expected a vector of length {V.k}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidInput("cannot project a non-finite vector")
    d2 = np.sum((V.points - y) ** 2, axis=1)
    i = int(np.argmin(d2))  # argmin returns the first minimiser
    return i, V.points[i].copy()


def project_many(Y, V: ValidSet) -> np.ndarray:
    """Vectorised `project` returning only the indices, for an (n, k) array."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None] if V.k == 1 else Y[None, :]
    if not np.all(np.isfinite(Y)):
        raise InvalidInput("cannot project a non-finite vector")
    d2 = ((Y[:, None, :] - V.points[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _check_sorted(values) -> np.ndarray:
    v = np.asarray(values, dtype=float).ravel()
    if len(v) < 1:
        raise InvalidInput("need at least one value")
    if np.any(np.diff(v) <= 0):
        raise InvalidInput("values must be sorted ascending without duplicates")
    return v


def cell_bounds(values) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper ends of the half-open projection cell (lo_i, hi_i] of each value."""
    v = _check_sorted(values)
    mids = (v[:-1] + v[1:]) / 2
    lo = np.concatenate([[-np.inf], mids])
    hi = np.concatenate([mids, [np.inf]])
    return lo, hi


def cell_of(y: float, values) -> int:
    """Index i with y in (lo_i, hi_i]; a midpoint belongs to the lower value's cell."""
    v = _check_sorted(values)
    mids = (v[:-1] + v[1:]) / 2
    return int(np.searchsorted(mids, y, side="left"))


def cells_of(ys, values) -> np.ndarray:
    v = _check_sorted(values)
    mids = (v[:-1] + v[1:]) / 2
    return np.searchsorted(mids, np.asarray(ys, dtype=float), side="left")


@dataclass(frozen=True)
class AdjacencyStats:
    """Per-coordinate step statistics of a staircase.

    ``n_adjacent[j] + n_nonadjacent[j] == N - 1`` always holds. Pairs whose
    values coincide in coordinate j are adjacent (nothing lies strictly
    between them) but are also counted in ``n_flat[j]`` and left out of
    ``L[j]``/``U[j]`` and of every bound term for that coordinate.
    """

    n_adjacent: np.ndarray
    n_nonadjacent: np.ndarray
    n_flat: np.ndarray
    L: np.ndarray
    U: np.ndarray
    flagged: bool = field(default=False)

    @property
    def k(self) -> int:
        return len(self.n_adjacent)

    def as_dict(self) -> dict:
        return {
            "I": self.n_adjacent.tolist(),
            "J": self.n_nonadjacent.tolist(),
            "flat": self.n_flat.tolist(),
            "L": self.L.tolist(),
            "U": self.U.tolist(),
            "flagged": self.flagged,
        }


def adjacency_stats(spec: "StaircaseSpec", V: ValidSet) -> AdjacencyStats:
    values = spec.values
    if values.shape[1] != V.k:
        raise InvalidInput("staircase values and valid set differ in dimension")
    for y in values:
        if y not in V:
            raise InvalidInput(f"staircase value {y.tolist()} is not in the valid set")
    k = V.k
    n_adj = np.zeros(k, dtype=int)
    n_non = np.zeros(k, dtype=int)
    n_flat = np.zeros(k, dtype=int)
    L = np.zeros(k)
    U = np.zeros(k)
    for j in range(k):
        coord = V.points[:, j]
        steps = []
        for a, b in zip(values[:-1, j], values[1:, j]):
            lo, hi = min(a, b), max(a, b)
            between = np.any((coord > lo) & (coord < hi))
            if between:
                n_non[j] += 1
            else:
                n_adj[j] += 1
            if a == b:
                n_flat[j] += 1
            else:
                steps.append(hi - lo)
        if steps:
            L[j], U[j] = min(steps), max(steps)
    return AdjacencyStats(n_adj, n_non, n_flat, L, U, flagged=bool(n_flat.any()))
