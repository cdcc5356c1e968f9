"""Size estimates from boundary work, energy-gap checks and Poincare constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .errors import EigensolveFailure, KindMismatch, ZeroReferenceWork
from .fem.assembly import ProblemKind
from .fem.loads import CoupleField
from .fem.solvers import Solution, boundary_force, solve_cavity, solve_intermediate, solve_reference, solve_rigid
from .geometry.domain import AprioriData, DomainSpec
from .geometry.measures import fatness_check, region_area, region_perimeter, shell_region, sifc_check
from .geometry.mesh import Mesh
from .geometry.mesher import build_mesh
from .tensors import PlateTensor

PRECONDITION_VIOLATED = "PRECONDITION_VIOLATED"


def phi(t):
    """``t^2 / (1 - t)`` on ``[0, 1)``."""
    t = np.asarray(t, dtype=float)
    return t**2 / (1 - t)


def psi(t):
    """``t^2 / (1 + t)`` on ``[0, inf)``."""
    t = np.asarray(t, dtype=float)
    return t**2 / (1 + t)


# size reports -------------------------------------------------------------------


@dataclass(frozen=True)
class SizeEstimateReport:
    kind: str
    W0: float
    W: float
    t: float
    area: float
    perimeter: float
    phi_or_psi: float
    K_hat: float
    C_hat: float
    fatness: bool
    fatness_ratio: float
    sifc: bool
    flags: tuple = ()
    family_id: str = ""

    csv_header = ("family_id", "area", "perimeter", "t", "phi_or_psi", "K_hat", "C_hat", "fatness", "sifc")

    def csv_row(self) -> tuple:
        return (self.family_id, self.area, self.perimeter, self.t, self.phi_or_psi, self.K_hat, self.C_hat,
                self.fatness, self.sifc)

    def with_id(self, family_id: str) -> "SizeEstimateReport":
        return SizeEstimateReport(**{**self.__dict__, "family_id": family_id})


def size_report(w0: Solution, wD: Solution, m: Mesh | None = None, a: AprioriData | None = None,
                inclusion: int | None = None) -> SizeEstimateReport:
    """Work-based size indicators for a rigid, cavity or intermediate inclusion.

    ``K_hat = area / (rho0^2 t)`` calibrates the upper bound and
    ``C_hat = area / (rho0^2 Phi(t))`` (rigid), ``area / (rho0^2 Psi(t))``
    (cavity) or ``area / (rho0^2 t)`` (intermediate) the lower bound.

    Raises
    ------
    ZeroReferenceWork
        If the reference work vanishes.
    KindMismatch
        If the solutions are not a reference/inclusion pair on one mesh.
    """
    m = w0.mesh if m is None else m
    a = AprioriData() if a is None else a
    if w0.kind is not ProblemKind.REFERENCE:
        raise KindMismatch("first solution must be the reference problem")
    if wD.mesh is not w0.mesh or m is not w0.mesh:
        raise KindMismatch("size report needs both solutions on the same mesh")
    W0 = w0.energy()
    if not W0 > 0:
        raise ZeroReferenceWork("reference work is zero; the boundary data carry no signal")
    W = wD.energy()
    k = wD.inclusion if inclusion is None else inclusion
    kind = wD.kind.value
    if k is None or not (m.regions == k).any():
        return SizeEstimateReport(kind, W0, W, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, True, 1.0, True)
    if wD.kind is ProblemKind.RIGID:
        t = (W0 - W) / W0
        if not t < 1:
            raise AssertionError("rigid work ratio must stay below one")
        lower = float(phi(t))
    elif wD.kind is ProblemKind.CAVITY:
        t = (W - W0) / W0
        lower = float(psi(t))
    elif wD.kind is ProblemKind.INTERMEDIATE:
        t = abs(W - W0) / W0
        lower = t
    else:
        raise KindMismatch("second solution must carry an inclusion")
    area = region_area(m, k)
    rho2 = a.rho0**2
    K_hat = area / (rho2 * t) if t > 0 else float("inf")
    C_hat = area / (rho2 * lower) if lower > 0 else float("inf")
    fat = fatness_check(m, k, a.h1 * a.rho0)
    sifc = sifc_check(m, k, a)
    flags = []
    if not fat.ok:
        flags.append(f"upper:{PRECONDITION_VIOLATED}")
    if not sifc:
        flags.append(f"lower:{PRECONDITION_VIOLATED}")
    if wD.kind is ProblemKind.RIGID and t < 0 or wD.kind is ProblemKind.CAVITY and t < 0:
        flags.append("work ordering violated")
    return SizeEstimateReport(kind, W0, W, float(t), area, region_perimeter(m, k), lower, K_hat, C_hat,
                              fat.ok, fat.ratio, bool(sifc), tuple(flags))


@dataclass(frozen=True)
class EnergyGapReport:
    kind: str
    lhs: float
    gap: float
    duality: float
    slack: float
    W0: float


def energy_gap_check(w0: Solution, wD: Solution, m: Mesh | None = None) -> EnergyGapReport:
    """Compare the work gap with ``int_D P hess(w0) : hess(w0)`` and with its duality form."""
    if w0.kind is not ProblemKind.REFERENCE or wD.kind not in (ProblemKind.RIGID, ProblemKind.CAVITY):
        raise KindMismatch("energy gap check needs a reference and a rigid or cavity solution")
    if wD.mesh is not w0.mesh or (m is not None and m is not w0.mesh):
        raise KindMismatch("both solutions must live on the same mesh")
    k = wD.inclusion
    if k is None:
        raise KindMismatch("inclusion solution has no inclusion")
    W0, W = w0.energy(), wD.energy()
    lhs = w0.energy(w0.mesh.regions == k)
    if wD.kind is ProblemKind.RIGID:
        gap = W0 - W
        dual = boundary_force(wD)(w0.dofs)
    else:
        gap = W - W0
        dual = boundary_force(w0, k)(wD.dofs)
    return EnergyGapReport(wD.kind.value, lhs, gap, dual, gap - lhs, W0)


# Poincare constants -------------------------------------------------------------


@dataclass(frozen=True)
class PoincareReport:
    """Optimal (C1, C4) and sampled lower-bound (C2, C3) Poincare constants, unnormalized.

    Divide ``C1, C4`` by ``(r rho0)^2`` and ``C2, C3`` by ``r rho0`` for the
    scale-free constants.
    """

    C1: float
    C2: float
    C3: float | None
    C4: float | None
    lambda1: float
    n_test: int
    seed: int

    csv_header = ("C1", "C2", "C3", "C4", "lambda1", "n_test", "seed")

    def csv_row(self) -> tuple:
        return (self.C1, self.C2, self.C3, self.C4, self.lambda1, self.n_test, self.seed)


def p1_matrices(nodes: np.ndarray, tris: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Linear-element stiffness and consistent mass matrices."""
    p = nodes[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    # gradients of barycentric coordinates
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    g = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area[:, None, None])
    kel = np.einsum("mid,mjd->mij", g, g) * area[:, None, None]
    mel = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = len(nodes)
    k = sp.coo_matrix((kel.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mm = sp.coo_matrix((mel.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return k, mm


def _submesh(m: Mesh, elements: np.ndarray):
    tris = m.triangles[elements]
    used, inv = np.unique(tris, return_inverse=True)
    return m.nodes[used], inv.reshape(-1, 3), used


def _connected(tris: np.ndarray, n: int) -> bool:
    rows = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
    cols = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
    g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(g, directed=False)[0] == 1


def _smallest_eigs(k, mm, count: int, shift: float) -> np.ndarray:
    n = k.shape[0]
    if n <= 400:
        import scipy.linalg as sla

        vals = sla.eigh(k.toarray(), mm.toarray(), eigvals_only=True)
        return np.sort(vals)[:count]
    try:
        vals = eigsh(k.tocsc(), k=count, M=mm.tocsc(), sigma=shift, which="LM",
                     v0=np.ones(n), return_eigenvectors=False)
    except (ArpackError, ArpackNoConvergence, RuntimeError) as exc:
        raise EigensolveFailure(f"eigensolver failed: {exc}") from None
    return np.sort(vals)


def _boundary_mass(nodes: np.ndarray, segs: np.ndarray) -> sp.csr_matrix:
    n = len(nodes)
    ln = np.linalg.norm(nodes[segs[:, 1]] - nodes[segs[:, 0]], axis=1)
    mel = (np.ones((2, 2)) + np.eye(2))[None] * (ln / 6)[:, None, None]
    rows = np.repeat(segs, 2, axis=1).ravel()
    cols = np.tile(segs, (1, 2)).ravel()
    return sp.coo_matrix((mel.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _test_functions(points: np.ndarray, n_test: int, seed: int) -> np.ndarray:
    """Seeded smooth random functions: sums of low-frequency plane waves."""
    rng = np.random.default_rng(seed)
    c = points.mean(0)
    scale = max(np.ptp(points, axis=0).max(), 1e-300)
    x = (points - c) / scale
    out = np.empty((n_test, len(points)))
    for i in range(n_test):
        u = np.zeros(len(points))
        for _ in range(4):
            k = rng.normal(size=2) * rng.uniform(0.5, 3.0) * np.pi
            u += rng.normal() * np.cos(x @ k + rng.uniform(0, 2 * np.pi))
        out[i] = u
    return out


def _boundary_variance_ratio(u, bmass, length, stiff) -> float:
    ones = np.ones(bmass.shape[0])
    mean = (bmass @ u) @ ones / length
    num = u @ (bmass @ u) - mean**2 * length
    den = u @ (stiff @ u)
    return float(num / den) if den > 0 else 0.0


def poincare_constants(m: Mesh, tag: int | None = 1, shell_thickness: float | None = None,
                       n_test: int = 32, seed: int = 0) -> PoincareReport:
    """Poincare constants of region ``tag`` (``None``: the whole mesh) and of its outer shell.

    ``C1 = 1 / lambda1`` with ``lambda1`` the first nonzero Neumann eigenvalue
    of the region, ``C4`` the inverse first eigenvalue on the shell with zero
    trace on the region boundary.  ``C2`` and ``C3`` are maxima of boundary
    Rayleigh quotients over a seeded set of smooth test functions.

    Raises
    ------
    EigensolveFailure
        If the region is disconnected or the eigensolver fails.
    """
    elements = np.arange(m.n_triangles) if tag is None else np.flatnonzero(m.require_region(tag))
    nodes, tris, used = _submesh(m, elements)
    if not _connected(tris, len(nodes)):
        raise EigensolveFailure("region is not connected")
    k, mm = p1_matrices(nodes, tris)
    h2 = float(np.median(m.areas[elements]))
    vals = _smallest_eigs(k, mm, 2, -h2)
    lam = vals[1]
    if not (lam > 0 and abs(vals[0]) < 1e-6 * lam):
        raise EigensolveFailure(f"unexpected Neumann spectrum {vals}")
    c1 = 1.0 / lam

    # boundary of the region (or of the whole mesh when tag is None)
    if tag is None:
        be = m.boundary_edges[m.tagged_edges((-1, -2))]
    else:
        be = m.boundary_edges[m.tagged_edges(tag)]
    local = np.searchsorted(used, be)
    bmass = _boundary_mass(nodes, local)
    length = float(np.linalg.norm(nodes[local[:, 1]] - nodes[local[:, 0]], axis=1).sum())
    tests = _test_functions(nodes, n_test, seed)
    c2 = max(_boundary_variance_ratio(u, bmass, length, k) for u in tests)

    c3 = c4 = None
    if tag is not None and shell_thickness is not None and shell_thickness > 0:
        shell = shell_region(m, tag, shell_thickness)
        if len(shell):
            snodes, stris, sused = _submesh(m, shell)
            ks, ms = p1_matrices(snodes, stris)
            sb = np.searchsorted(sused, be)
            if not np.isin(be, sused).all():
                raise EigensolveFailure("shell does not enclose the region boundary")
            bm = _boundary_mass(snodes, sb)
            stests = _test_functions(snodes, n_test, seed + 1)
            c3 = max(_boundary_variance_ratio(u, bm, length, ks) for u in stests)
            free = np.setdiff1d(np.arange(len(snodes)), np.unique(sb))
            kf, mf = ks[free][:, free], ms[free][:, free]
            lam4 = _smallest_eigs(kf, mf, 1, -float(np.median(m.areas[shell])))[0]
            if not lam4 > 0:
                raise EigensolveFailure("zero-trace shell eigenvalue is not positive")
            c4 = 1.0 / lam4
    return PoincareReport(float(c1), float(c2), c3 if c3 is None else float(c3), c4 if c4 is None else float(c4),
                          float(lam), n_test, seed)


# calibration sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationTable:
    rows: tuple
    K_band: tuple
    C_band: tuple
    notes: tuple = field(default_factory=tuple)

    @property
    def K_ratio(self) -> float:
        lo, hi = self.K_band
        return hi / lo if lo > 0 else float("inf")

    @property
    def C_ratio(self) -> float:
        lo, hi = self.C_band
        return hi / lo if lo > 0 else float("inf")


def solve_pair(plate: PlateTensor, mesh: Mesh, couple: CoupleField, kind: str,
               inclusion_plate: PlateTensor | None = None, inclusion: int = 1) -> tuple[Solution, Solution]:
    w0 = solve_reference(plate, mesh, couple)
    if kind == "rigid":
        wD = solve_rigid(plate, mesh, couple, inclusion)
    elif kind == "cavity":
        wD = solve_cavity(plate, mesh, couple, inclusion)
    elif kind == "intermediate":
        if inclusion_plate is None:
            raise KindMismatch("intermediate sweep needs an inclusion plate tensor")
        wD = solve_intermediate(plate, mesh, couple, inclusion_plate, inclusion)
    else:
        raise KindMismatch(f"unknown inclusion kind {kind!r}")
    return w0, wD


def calibration_sweep(family: Sequence[DomainSpec], plate: PlateTensor,
                      load: Callable[[Mesh], CoupleField], a: AprioriData, kind: str = "rigid",
                      target_h: float = 0.05, inclusion_plate: PlateTensor | None = None) -> CalibrationTable:
    """Size reports over a family of single-inclusion domains, with the empirical constant bands."""
    if len(family) == 0:
        raise ValueError("calibration sweep needs at least one family member")
    rows = []
    for i, spec in enumerate(family):
        mesh = build_mesh(spec, target_h)
        f = load(mesh)
        w0, wD = solve_pair(plate, mesh, f, kind, inclusion_plate)
        rows.append(size_report(w0, wD, mesh, a).with_id(str(i)))
    K = [r.K_hat for r in rows]
    C = [r.C_hat for r in rows]
    notes = () if len(family) >= 3 else ("fewer than three family members",)
    return CalibrationTable(tuple(rows), (min(K), max(K)), (min(C), max(C)), notes)
