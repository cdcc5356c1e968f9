"""Empirical probes of quantitative unique continuation.

Disk energies ``int_B |hess w|^2`` are exact for piecewise-constant Hessians:
each element contributes ``|H_T|^2 * area(T ∩ P)`` with ``P`` a regular
64-gon inscribed in the disk.  Clipping is delegated to shapely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import shapely

from .errors import DomainEscape, EmptyGrid, RadiusOrder
from .fem.assembly import ProblemKind
from .fem.loads import CoupleField
from .fem.solvers import Solution
from .functionals import boundary_h_minus_half
from .geometry.domain import points_in_polygon, segment_distance

N_GON = 64
DEFAULT_STANDOFF = 1.5
ENERGY_FLOOR = 1e-300


def inscribed_polygon(center, r: float, n: int = N_GON) -> np.ndarray:
    t = 2 * np.pi * np.arange(n) / n
    return np.asarray(center, dtype=float) + r * np.c_[np.cos(t), np.sin(t)]


def _element_density(s: Solution) -> np.ndarray:
    h = s.hessians
    return (h**2).sum(axis=(1, 2))


def _clipped_energy(s: Solution, center, r: float, elements: np.ndarray | None = None) -> float:
    m = s.mesh
    c = np.asarray(center, dtype=float)
    dens = _element_density(s)
    idx = np.arange(m.n_triangles) if elements is None else np.asarray(elements)
    # cheap prefilter: element circumradius bound around its centroid
    p = m.nodes[m.triangles[idx]]
    cen = p.mean(axis=1)
    rad = np.sqrt(((p - cen[:, None]) ** 2).sum(-1)).max(1)
    near = np.linalg.norm(cen - c, axis=1) <= r + rad
    idx, p = idx[near], p[near]
    idx_nz = dens[idx] > 0
    idx, p = idx[idx_nz], p[idx_nz]
    if len(idx) == 0:
        return 0.0
    tris = shapely.polygons(np.concatenate([p, p[:, :1]], axis=1))
    gon = shapely.Polygon(inscribed_polygon(c, r))
    areas = shapely.area(shapely.intersection(tris, gon))
    return float((dens[idx] * areas).sum())


def disk_energy(s: Solution, center, r: float) -> float:
    """``sum_T |hess w|_F^2 * area(T ∩ 64-gon(center, r))``; zero for an empty intersection."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    if r == 0:
        return 0.0
    return _clipped_energy(s, center, r)


def _obstacles(s: Solution) -> list[np.ndarray]:
    """Boundary polygons the probes must stay clear of: the outer curve and, unless
    the solution is a reference solve, its inclusion."""
    m = s.mesh
    polys = [m.loop_polygon(m.outer_loop)]
    if s.kind is not ProblemKind.REFERENCE and s.inclusion is not None:
        polys.append(m.loop_polygon(m.inclusion_loop(s.inclusion)))
    return polys


def clearance(s: Solution, points: np.ndarray) -> np.ndarray:
    """Distance from each point to the outer boundary and the solution's inclusion.

    Points outside the domain or inside the inclusion get ``-distance``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    polys = _obstacles(s)
    a = np.vstack(polys)
    b = np.vstack([np.roll(p, -1, axis=0) for p in polys])
    d = segment_distance(pts, a, b)
    inside = points_in_polygon(pts, polys[0])
    for p in polys[1:]:
        inside &= ~points_in_polygon(pts, p)
    return np.where(inside, d, -d)


# three-sphere probe -------------------------------------------------------------


@dataclass(frozen=True)
class ThreeSphereReport:
    center: tuple
    radii: tuple
    energies: tuple
    delta_star: float
    delta_ref: float
    defect: float
    normalized_defect: float

    csv_header = ("probe", "center_x", "center_y", "r1", "r2", "r3", "I1", "I2", "I3", "delta_star", "defect")

    def csv_row(self, probe="three_sphere") -> tuple:
        return (probe, *self.center, *self.radii, *self.energies, self.delta_star, self.defect)


def three_sphere_probe(s: Solution, center, r1: float, r2: float, r3: float) -> ThreeSphereReport:
    """Measure the interpolation exponent of disk energies on three nested disks.

    Raises
    ------
    RadiusOrder
        Unless ``0 < r1 < r2 < r3``.
    DomainEscape
        If the largest disk leaves the domain or meets an inclusion.
    """
    if not (0 < r1 < r2 < r3):
        raise RadiusOrder(f"radii must satisfy 0 < r1 < r2 < r3, got {(r1, r2, r3)}")
    c = np.asarray(center, dtype=float)
    if clearance(s, c[None])[0] < r3:
        raise DomainEscape(f"disk of radius {r3} around {tuple(c)} leaves the matrix region")
    I1, I2, I3 = (disk_energy(s, c, r) for r in (r1, r2, r3))
    d_ref = np.log(r2 / r3) / np.log(r1 / r3)
    with np.errstate(divide="ignore", invalid="ignore"):
        if I1 > 0 and I3 > I1:
            d_star = np.log(I2 / I3) / np.log(I1 / I3)
        else:
            d_star = np.nan
        if I1 > 0:
            defect = np.log(I2) - (d_ref * np.log(I1) + (1 - d_ref) * np.log(I3))
            norm_defect = defect / np.log(I3 / I1) if I3 > I1 else np.nan
        else:
            defect = norm_defect = np.nan
    return ThreeSphereReport((float(c[0]), float(c[1])), (r1, r2, r3), (I1, I2, I3), float(d_star),
                             float(d_ref), float(defect), float(norm_defect))


# propagation of smallness ---------------------------------------------------------


@dataclass(frozen=True)
class LPSReport:
    """Local energies ``I[i, j]`` at point ``i`` and radius ``rho[j]`` (NaN where the pair is excluded)."""

    probe: str
    points: np.ndarray
    distances: np.ndarray
    rho: np.ndarray
    energies: np.ndarray
    normalized: np.ndarray
    normalization: float
    A: float
    B: float
    C: float
    degenerate: bool
    standoff: float

    csv_header = ("lps", "point_x", "point_y", "rho", "energy", "normalized")

    @property
    def min_normalized(self) -> float:
        v = self.normalized[np.isfinite(self.normalized)]
        return float(v.min()) if len(v) else float("nan")

    def envelope(self) -> np.ndarray:
        """Minimum normalized energy per radius."""
        with np.errstate(all="ignore"):
            return np.array([np.nanmin(c) if np.isfinite(c).any() else np.nan for c in self.normalized.T])

    def csv_rows(self) -> Iterable[tuple]:
        for i, p in enumerate(self.points):
            for j, r in enumerate(self.rho):
                if np.isfinite(self.energies[i, j]):
                    yield (self.probe, p[0], p[1], r, self.energies[i, j], self.normalized[i, j])


def fit_decay(rho: np.ndarray, envelope: np.ndarray, rho0: float = 1.0) -> tuple[float, float, float, bool]:
    """Fit ``envelope ~ C exp(-A (rho0/rho)^B)`` with ``C`` the envelope maximum.

    Least squares of ``ln(-ln(I/C))`` against ``ln rho`` after flooring ``I``;
    returns ``(A, B, C, degenerate)``.
    """
    rho = np.asarray(rho, dtype=float)
    e = np.asarray(envelope, dtype=float)
    ok = np.isfinite(e)
    nan = float("nan")
    if ok.sum() < 2:
        return nan, nan, nan, True
    C = float(e[ok].max())
    if not C > 0:
        return nan, nan, nan, True
    ratio = np.maximum(e[ok], ENERGY_FLOOR) / C
    with np.errstate(divide="ignore"):
        y = np.log(-np.log(ratio))
    x = np.log(rho[ok] / rho0)
    keep = np.isfinite(y)
    if keep.sum() < 2 or np.ptp(x[keep]) == 0:
        return nan, nan, C, True
    slope, intercept = np.polyfit(x[keep], y[keep], 1)
    return float(np.exp(intercept)), float(-slope), C, False


def _normalization(f: CoupleField | None, rho0: float) -> float:
    if f is None:
        return 1.0
    return rho0**2 * boundary_h_minus_half(f) ** 2


def _probe(s: Solution, name: str, points, rho, distances, norm, standoff, rho0, elements=None) -> LPSReport:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rho = np.sort(np.asarray(rho, dtype=float))
    if len(pts) == 0 or len(rho) == 0 or (rho <= 0).any():
        raise EmptyGrid("probe needs at least one point and positive radii")
    valid = distances[:, None] >= standoff * rho[None, :]
    if not valid.any():
        raise EmptyGrid(f"no probe point is at distance >= {standoff} rho from the boundary")
    energies = np.full((len(pts), len(rho)), np.nan)
    for i, j in zip(*np.nonzero(valid)):
        energies[i, j] = _clipped_energy(s, pts[i], rho[j], elements)
    normalized = energies / norm if norm > 0 else np.where(np.isfinite(energies), 0.0, np.nan)
    rep = LPSReport(name, pts, distances, rho, energies, normalized, norm, np.nan, np.nan, np.nan, True, standoff)
    A, B, C, deg = fit_decay(rho, rep.envelope(), rho0)
    if norm <= 0:
        deg = True
    return LPSReport(name, pts, distances, rho, energies, normalized, norm, A, B, C, deg, standoff)


def lps_probe(s: Solution, f: CoupleField | None, rho: Sequence[float], points,
              rho0: float = 1.0, standoff: float = DEFAULT_STANDOFF) -> LPSReport:
    """Local disk energies at interior points, normalized by ``rho0^2 ||M||^2_{H^-1/2}``.

    A (point, radius) pair is measured only when the point lies at distance
    at least ``standoff * rho`` from the boundary and the inclusions.

    Raises
    ------
    EmptyGrid
        If no admissible pair remains.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = clearance(s, pts) if len(pts) else np.zeros(0)
    return _probe(s, "lps", pts, rho, d, _normalization(f if f is not None else s.couple, rho0), standoff, rho0)


def vanishing_rate_probe(s: Solution, inclusion: int, rho: Sequence[float], n_centers: int = 16,
                         rho0: float = 1.0) -> LPSReport:
    """Energies on ``B_rho(x) ∖ D`` for centers equally spaced in arclength on the inclusion boundary."""
    m = s.mesh
    loop = m.inclusion_loop(inclusion)
    poly = m.loop_polygon(loop)
    start, length = m.loop_arclength(loop)
    if n_centers < 1:
        raise EmptyGrid("need at least one center")
    targets = length * np.arange(n_centers) / n_centers
    i = np.clip(np.searchsorted(start, targets, side="right") - 1, 0, len(poly) - 1)
    nxt = np.roll(poly, -1, axis=0)
    seg_len = np.linalg.norm(nxt - poly, axis=1)
    u = (targets - start[i]) / seg_len[i]
    centers = poly[i] + u[:, None] * (nxt[i] - poly[i])
    # stand-off from the outer boundary only; the inclusion itself is excluded by clipping
    outer = m.loop_polygon(m.outer_loop)
    d = segment_distance(centers, outer, np.roll(outer, -1, axis=0))
    elements = np.flatnonzero(m.regions != inclusion)
    norm = _normalization(s.couple, rho0)
    return _probe(s, "vanishing", centers, rho, d, norm, 1.0, rho0, elements)
