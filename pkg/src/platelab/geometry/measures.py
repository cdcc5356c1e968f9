"""Region measures, erosion/shell subsets, shape conditions and Hausdorff distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from ..errors import EmptyCurve, UnknownTag
from .domain import AprioriData, points_in_polygon, segment_distance
from .mesh import Mesh


def _region_mask(m: Mesh, tag: int) -> np.ndarray:
    return m.require_region(tag)


def _interface_segments(m: Mesh, tag: int) -> tuple[np.ndarray, np.ndarray]:
    ids = m.tagged_edges(tag)
    if len(ids) == 0:
        raise UnknownTag(f"no boundary edges carry tag INC{tag}")
    be = m.boundary_edges[ids]
    return m.nodes[be[:, 0]], m.nodes[be[:, 1]]


def region_area(m: Mesh, tag: int) -> float:
    return float(m.areas[_region_mask(m, tag)].sum())


def region_perimeter(m: Mesh, tag: int) -> float:
    a, b = _interface_segments(m, tag)
    return float(np.linalg.norm(b - a, axis=1).sum())


def region_diameter(m: Mesh, tag: int) -> float:
    pts = m.nodes[np.unique(m.triangles[_region_mask(m, tag)])]
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate (collinear) point sets
            pass
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def distance_to_region_boundary(m: Mesh, tag: int, points: np.ndarray) -> np.ndarray:
    a, b = _interface_segments(m, tag)
    return segment_distance(points, a, b)


def erode_region(m: Mesh, tag: int, t: float) -> np.ndarray:
    """Indices of region elements whose centroid lies farther than ``t`` from the region boundary."""
    if t < 0:
        raise ValueError("erosion distance must be non-negative")
    idx = np.flatnonzero(_region_mask(m, tag))
    d = distance_to_region_boundary(m, tag, m.centroids[idx])
    return idx[d > t]


def shell_region(m: Mesh, tag: int, t: float) -> np.ndarray:
    """Indices of elements outside the region whose centroid is closer than ``t`` to it."""
    if t < 0:
        raise ValueError("shell thickness must be non-negative")
    _region_mask(m, tag)
    idx = np.flatnonzero(m.regions != tag)
    if t == 0 or len(idx) == 0:
        return idx[:0]
    d = distance_to_region_boundary(m, tag, m.centroids[idx])
    return idx[d < t]


@dataclass(frozen=True)
class FatnessResult:
    ok: bool
    ratio: float

    def __bool__(self) -> bool:
        return self.ok


def fatness_check(m: Mesh, tag: int, h1rho0: float) -> FatnessResult:
    """Check that eroding by ``h1 rho0`` keeps at least half of the region's area."""
    full = region_area(m, tag)
    kept = float(m.areas[erode_region(m, tag, h1rho0)].sum())
    ratio = kept / full
    return FatnessResult(ratio >= 0.5, ratio)


def sifc_check(m: Mesh, tag: int, a: AprioriData) -> bool:
    return region_diameter(m, tag) <= a.Q * a.r * a.rho0


def region_contains(m: Mesh, tag: int, points: np.ndarray) -> np.ndarray:
    """Point-in-region test against the region's boundary loop."""
    poly = m.loop_polygon(m.inclusion_loop(tag))
    return points_in_polygon(points, poly)


def hausdorff(curve_a: np.ndarray, curve_b: np.ndarray) -> float:
    """Hausdorff distance between two sampled point sets."""
    a = np.atleast_2d(np.asarray(curve_a, dtype=float))
    b = np.atleast_2d(np.asarray(curve_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptyCurve("hausdorff needs two nonempty point sets")
    dab = cKDTree(b).query(a)[0].max()
    dba = cKDTree(a).query(b)[0].max()
    return float(max(dab, dba))
