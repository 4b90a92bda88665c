"""Axis-aligned and rotated rectangular sets with partitioning and bounding operations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyCollectionError


def _as_vector(values, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class HyperRect:
    """Axis-aligned box {x | lower <= x <= upper}. Degenerate faces are allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _as_vector(self.lower, "lower")
        upper = _as_vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise DimensionMismatchError(
                f"lower has dimension {lower.size}, upper has {upper.size}"
            )
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError(f"lower must not exceed upper: {lower} vs {upper}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def corners(self) -> np.ndarray:
        """All 2^n corner points, shape (2^n, n)."""
        n = self.dim
        out = np.empty((2**n, n))
        for k in range(n):
            pattern = np.repeat([0, 1], 2**k)
            choice = np.tile(pattern, 2 ** (n - k - 1))
            out[:, k] = np.where(choice == 0, self.lower[k], self.upper[k])
        return out

    def scaled(self, factor: float) -> "HyperRect":
        """Box scaled about its center by `factor` (used for negative-control shrinking)."""
        half = 0.5 * factor * self.widths
        c = self.center
        return HyperRect(c - half, c + half)

    def __repr__(self) -> str:
        return f"HyperRect(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class RotatedRect:
    """2-D rectangle with center, half extents, and rotation angle in [0, pi/2).

    The constructor normalizes any finite angle into [0, pi/2), swapping half
    extents when the normalization crosses a quarter turn (the rectangle is
    invariant under that swap).
    """

    center: np.ndarray
    half_extents: np.ndarray
    angle: float

    def __post_init__(self):
        center = _as_vector(self.center, "center")
        half = _as_vector(self.half_extents, "half_extents")
        if center.size != 2 or half.size != 2:
            raise DimensionMismatchError("rotated rectangles are 2-D only")
        if np.any(half < 0):
            raise ValueError("half extents must be nonnegative")
        angle = float(self.angle) % math.pi
        if angle >= 0.5 * math.pi:
            angle -= 0.5 * math.pi
            half = half[::-1].copy()
        center.setflags(write=False)
        half.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_extents", half)
        object.__setattr__(self, "angle", angle)

    @property
    def area(self) -> float:
        return float(4.0 * self.half_extents[0] * self.half_extents[1])

    def axes(self) -> np.ndarray:
        """Rows are the two unit axis directions."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, s], [-s, c]])

    def corners(self) -> np.ndarray:
        ax = self.axes()
        e0, e1 = self.half_extents
        offsets = np.array([[-e0, -e1], [e0, -e1], [e0, e1], [-e0, e1]])
        return self.center + offsets @ ax

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """(H, h) with the rectangle equal to {x | H x <= h} (4 rows)."""
        ax = self.axes()
        H = np.vstack([ax, -ax])
        proj = ax @ self.center
        h = np.concatenate([proj + self.half_extents, -proj + self.half_extents])
        return H, h

    def aabb(self) -> HyperRect:
        """Axis-aligned bounding box."""
        pts = self.corners()
        return HyperRect(pts.min(axis=0), pts.max(axis=0))

    def contains(self, point, tol: float = 0.0) -> bool:
        p = _as_vector(point, "point")
        local = self.axes() @ (p - self.center)
        return bool(np.all(np.abs(local) <= self.half_extents + tol))

    def __repr__(self) -> str:
        return (
            f"RotatedRect(center={self.center.tolist()}, "
            f"half_extents={self.half_extents.tolist()}, angle={self.angle})"
        )


def uniform_partition(rect: HyperRect, counts) -> list[HyperRect]:
    """Split `rect` into a uniform grid of prod(counts) closed boxes.

    Cell k of dimension d uses shared cut points so adjacent cells share faces
    exactly. Ordering cycles dimension 0 fastest.
    """
    counts = np.asarray(counts, dtype=int)
    if counts.ndim != 1 or counts.size != rect.dim:
        raise DimensionMismatchError(
            f"counts has dimension {counts.size}, rect has {rect.dim}"
        )
    if np.any(counts < 1):
        raise ValueError(f"all counts must be >= 1, got {counts.tolist()}")
    edges = [
        rect.lower[k] + (rect.upper[k] - rect.lower[k]) * np.arange(counts[k] + 1) / counts[k]
        for k in range(rect.dim)
    ]
    total = int(np.prod(counts))
    cells = []
    for i in range(total):
        idx = np.unravel_index(i, counts, order="F")
        lo = np.array([edges[k][idx[k]] for k in range(rect.dim)])
        hi = np.array([edges[k][idx[k] + 1] for k in range(rect.dim)])
        cells.append(HyperRect(lo, hi))
    return cells


def bounding_rect(rects) -> HyperRect:
    """Smallest axis-aligned box containing every box in `rects`."""
    rects = list(rects)
    if not rects:
        raise EmptyCollectionError("bounding_rect requires at least one box")
    dim = rects[0].dim
    if any(r.dim != dim for r in rects):
        raise DimensionMismatchError("boxes must share one dimension")
    lo = np.min([r.lower for r in rects], axis=0)
    hi = np.max([r.upper for r in rects], axis=0)
    return HyperRect(lo, hi)


def volume(rect: HyperRect) -> float:
    return float(np.prod(rect.widths))


def contains(rect: HyperRect, point, tol: float = 0.0) -> bool:
    """True iff lower - tol <= point <= upper + tol componentwise."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    p = _as_vector(point, "point")
    if p.size != rect.dim:
        raise DimensionMismatchError(f"point has dimension {p.size}, rect has {rect.dim}")
    return bool(np.all(p >= rect.lower - tol) and np.all(p <= rect.upper + tol))


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise, collinear points dropped."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def min_area_rotated_rect(points) -> RotatedRect:
    """Minimum-area enclosing rectangle of a 2-D point set.

    Rotating-calipers over the convex hull: the optimal rectangle has one side
    aligned with a hull edge. Degenerate inputs (single point, collinear set)
    yield a zero-area rectangle along the point direction.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise EmptyCollectionError("need at least one point")
    if pts.shape[1] != 2:
        raise DimensionMismatchError("rotated rectangles are 2-D only")

    hull = _convex_hull(pts)
    if len(hull) == 1:
        return RotatedRect(hull[0], np.zeros(2), 0.0)
    if len(hull) == 2:
        d = hull[1] - hull[0]
        angle = math.atan2(d[1], d[0])
        half = np.array([0.5 * float(np.hypot(*d)), 0.0])
        return RotatedRect(0.5 * (hull[0] + hull[1]), half, angle)

    best_area = math.inf
    best = None
    edges = np.roll(hull, -1, axis=0) - hull
    for k in range(len(hull)):
        angle = math.atan2(edges[k][1], edges[k][0])
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, s], [-s, c]])
        local = hull @ rot.T
        lo = local.min(axis=0)
        hi = local.max(axis=0)
        area = float(np.prod(hi - lo))
        if area < best_area - 1e-15:
            best_area = area
            center_local = 0.5 * (lo + hi)
            best = (rot.T @ center_local, 0.5 * (hi - lo), angle)
    assert best is not None
    return RotatedRect(best[0], best[1], best[2])
