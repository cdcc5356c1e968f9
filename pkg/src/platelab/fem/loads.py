"""Boundary couple fields and the load functional.

The load functional is

    l(eta) = sum over outer edges of  int ( Q eta + M_tau eta_,s - M_n eta_,n ) ds  +  int q eta

with ``M = M_tau n + M_n tau``, ``n`` the outward normal and ``tau`` the
counterclockwise tangent.  In cartesian components the edge integrand is
``Q eta + M1 eta_,2 - M2 eta_,1``, so the affine test functions give the
compatibility conditions ``int M1 = int M2 = int Q = 0`` (plus ``q = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from ..errors import CompatibilityViolation, TagMismatch
from ..geometry.mesh import GAMMA, Mesh
from .morley import MorleySpace, poly_derivative, poly_eval, poly_hessian

# 3-point Gauss rule on [0, 1]
GAUSS_U = 0.5 + np.array([-1.0, 0.0, 1.0]) * np.sqrt(0.15)
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0
LAGRANGE_NODES = np.array([0.0, 0.5, 1.0])
COMPAT_TOL = 1e-9


def lagrange_weights(u: np.ndarray) -> np.ndarray:
    """``(n, 3)`` quadratic Lagrange weights for nodes 0, 1/2, 1."""
    u = np.asarray(u, dtype=float)
    return np.stack([2 * (u - 0.5) * (u - 1), -4 * u * (u - 1), 2 * u * (u - 0.5)], axis=-1)


def lagrange_dweights(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.stack([4 * u - 3, -8 * u + 4, 4 * u - 1], axis=-1)


@dataclass(frozen=True, eq=False)
class EdgeFrame:
    """Geometry of the outer boundary edges in loop order."""

    mesh: Mesh

    @cached_property
    def ids(self) -> np.ndarray:
        return self.mesh.outer_loop.edges

    @cached_property
    def start(self) -> np.ndarray:
        return self.mesh.nodes[self.mesh.boundary_edges[self.ids, 0]]

    @cached_property
    def end(self) -> np.ndarray:
        return self.mesh.nodes[self.mesh.boundary_edges[self.ids, 1]]

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.end - self.start, axis=1)

    @cached_property
    def tangents(self) -> np.ndarray:
        return (self.end - self.start) / self.lengths[:, None]

    @cached_property
    def normals(self) -> np.ndarray:
        t = self.tangents
        return np.c_[t[:, 1], -t[:, 0]]

    @cached_property
    def arclength(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.lengths)[:-1]])

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    @cached_property
    def tags(self) -> np.ndarray:
        return self.mesh.boundary_tags[self.ids]

    @cached_property
    def triangles(self) -> np.ndarray:
        return self.mesh.boundary_edge_triangle()[self.ids]

    def points(self, u: np.ndarray) -> np.ndarray:
        """``(n_edges, len(u), 2)`` points at edge parameters ``u``."""
        u = np.asarray(u, dtype=float)
        return self.start[:, None, :] + u[None, :, None] * (self.end - self.start)[:, None, :]

    def locate(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Edge index and edge parameter for arclength positions ``s``."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        i = np.clip(np.searchsorted(self.arclength, s, side="right") - 1, 0, len(self.ids) - 1)
        return i, np.clip((s - self.arclength[i]) / self.lengths[i], 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class CoupleField:
    """Piecewise-quadratic boundary data on the outer edges.

    ``values[e, k, c]`` holds component ``c`` (``M1, M2, Q``) at parameter
    ``u = 0, 1/2, 1`` of outer edge ``e`` (loop order).  ``q`` is a constant
    body load.
    """

    mesh: Mesh
    values: np.ndarray
    q: float = 0.0
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        frame = EdgeFrame(self.mesh)
        if v.shape != (len(frame.ids), 3, 3):
            raise TagMismatch(f"couple field shape {v.shape} does not match {len(frame.ids)} outer edges")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "frame", frame)

    # constructors -----------------------------------------------------------

    @classmethod
    def from_function(cls, mesh: Mesh, func: Callable[[np.ndarray], np.ndarray], q: float = 0.0,
                      label: str = "") -> "CoupleField":
        """Sample cartesian ``(M1, M2[, Q])`` at the Lagrange nodes of each edge."""
        frame = EdgeFrame(mesh)
        pts = frame.points(LAGRANGE_NODES).reshape(-1, 2)
        val = np.asarray(func(pts), dtype=float)
        if val.shape[1] == 2:
            val = np.c_[val, np.zeros(len(val))]
        return cls(mesh, val.reshape(len(frame.ids), 3, 3), q, label)

    @classmethod
    def from_local(cls, mesh: Mesh, m_n: Callable, m_tau: Callable, shear: Callable | None = None,
                   label: str = "") -> "CoupleField":
        """Data given as ``M_n``, ``M_tau`` (and ``Q``), each a function of points and edge normals."""
        frame = EdgeFrame(mesh)
        pts = frame.points(LAGRANGE_NODES)
        n = np.repeat(frame.normals[:, None, :], 3, axis=1)
        tau = np.c_[-n[..., 1].ravel(), n[..., 0].ravel()].reshape(n.shape)
        p2, n2 = pts.reshape(-1, 2), n.reshape(-1, 2)
        mn = np.asarray(m_n(p2, n2)).reshape(n.shape[:2])
        mt = np.asarray(m_tau(p2, n2)).reshape(n.shape[:2])
        qv = np.zeros_like(mn) if shear is None else np.asarray(shear(p2, n2)).reshape(mn.shape)
        mvec = mt[..., None] * n + mn[..., None] * tau
        return cls(mesh, np.concatenate([mvec, qv[..., None]], axis=2), 0.0, label)

    @classmethod
    def zero(cls, mesh: Mesh) -> "CoupleField":
        return cls(mesh, np.zeros((len(mesh.outer_loop.edges), 3, 3)), 0.0, "zero")

    @classmethod
    def cos_theta(cls, mesh: Mesh, amplitude: float = 1.0) -> "CoupleField":
        """``M1 = amplitude cos(theta)``, ``M2 = 0`` with ``theta`` the polar angle."""
        def func(p):
            th = np.arctan2(p[:, 1], p[:, 0])
            return np.c_[amplitude * np.cos(th), np.zeros(len(p))]
        return cls.from_function(mesh, func, label="cos_theta")

    @classmethod
    def gamma_bump(cls, mesh: Mesh, direction=(1.0, 0.0), amplitude: float = 1.0) -> "CoupleField":
        """Zero-mean bump ``sin(2 pi u) sin(pi u)^2`` along the GAMMA arc, constant direction.

        ``u`` is the arclength fraction along the arc.  The couple vanishes off
        the arc, so its support lies inside it.
        """
        frame = EdgeFrame(mesh)
        on = frame.tags == GAMMA
        if not on.any():
            raise TagMismatch("mesh has no GAMMA edges")
        s0 = frame.arclength[on].min()
        length = frame.lengths[on].sum()
        # GAMMA edges are contiguous in loop order, the arc may wrap the origin
        ids = np.flatnonzero(on)
        if ids[-1] - ids[0] + 1 != len(ids):
            first = ids[np.flatnonzero(np.diff(ids) > 1)[0] + 1]
            s0 = frame.arclength[first]
        d = np.asarray(direction, dtype=float)
        vals = np.zeros((len(frame.ids), 3, 3))
        s = (frame.arclength[ids, None] + LAGRANGE_NODES[None, :] * frame.lengths[ids, None] - s0)
        u = np.mod(s, frame.perimeter) / length
        u[:, 2] = np.where(u[:, 2] == 0.0, 1.0, u[:, 2])
        b = np.sin(2 * np.pi * u) * np.sin(np.pi * u) ** 2
        # remove the O(h^4) mean left by the piecewise-quadratic interpolant
        psi = np.sin(np.pi * u) ** 2
        simpson = np.array([1.0, 4.0, 1.0]) / 6 * frame.lengths[ids, None]
        b = amplitude * (b - (simpson * b).sum() / (simpson * psi).sum() * psi)
        vals[ids, :, 0] = b * d[0]
        vals[ids, :, 1] = b * d[1]
        return cls(mesh, vals, 0.0, "gamma_bump")

    @classmethod
    def manufactured(cls, mesh: Mesh, plate_coeffs, poly: dict) -> "CoupleField":
        """Exact data for the displacement ``w* = sum c x^i y^j`` under a constant plate tensor.

        Uses ``M_n = -(P H) n.n``, ``M_tau = (P H) n.tau``, ``Q = -div(P H).n`` and
        body load ``q = div div (P H)``; ``q`` must be constant (true up to quartics).
        """
        from ..tensors import ElasticityTensor

        c = np.asarray(plate_coeffs.as_array() if isinstance(plate_coeffs, ElasticityTensor)
                       else plate_coeffs, dtype=float)
        A0, B0, C0, D0, E0, F0 = c

        def moment(p):
            h = poly_hessian(poly, p)
            h11, h22, h12 = h[:, 0, 0], h[:, 1, 1], h[:, 0, 1]
            m11 = A0 * h11 + B0 * h22 + 2 * C0 * h12
            m22 = B0 * h11 + F0 * h22 + 2 * D0 * h12
            m12 = C0 * h11 + D0 * h22 + 2 * E0 * h12
            return m11, m22, m12

        def third(p):
            # div of P H as a vector field, from third derivatives of the polynomial
            d = {(a, b): poly_derivative(poly_derivative(poly_derivative(poly, a), b), 0) for a in (0, 1) for b in (0, 1)}
            e = {(a, b): poly_derivative(poly_derivative(poly_derivative(poly, a), b), 1) for a in (0, 1) for b in (0, 1)}
            # dH_ab/dx = d[a,b], dH_ab/dy = e[a,b]
            h11x, h22x, h12x = poly_eval(d[0, 0], p), poly_eval(d[1, 1], p), poly_eval(d[0, 1], p)
            h11y, h22y, h12y = poly_eval(e[0, 0], p), poly_eval(e[1, 1], p), poly_eval(e[0, 1], p)
            m11x = A0 * h11x + B0 * h22x + 2 * C0 * h12x
            m12x = C0 * h11x + D0 * h22x + 2 * E0 * h12x
            m12y = C0 * h11y + D0 * h22y + 2 * E0 * h12y
            m22y = B0 * h11y + F0 * h22y + 2 * D0 * h12y
            return m11x + m12y, m12x + m22y

        def m_n(p, n):
            m11, m22, m12 = moment(p)
            return -(m11 * n[:, 0] ** 2 + 2 * m12 * n[:, 0] * n[:, 1] + m22 * n[:, 1] ** 2)

        def m_tau(p, n):
            m11, m22, m12 = moment(p)
            t = np.c_[-n[:, 1], n[:, 0]]
            return m11 * n[:, 0] * t[:, 0] + m12 * (n[:, 0] * t[:, 1] + n[:, 1] * t[:, 0]) + m22 * n[:, 1] * t[:, 1]

        def shear(p, n):
            vx, vy = third(p)
            return -(vx * n[:, 0] + vy * n[:, 1])

        f = cls.from_local(mesh, m_n, m_tau, shear, label="manufactured")
        # body load q = div div (P H) is constant for polynomials up to degree four
        probe = mesh.nodes[[0, mesh.n_nodes // 2, mesh.n_nodes - 1]]
        qv = []
        for pnt in probe:
            qv.append(_divdiv(poly, c, pnt))
        qv = np.array(qv)
        if np.ptp(qv) > 1e-9 * (1 + np.abs(qv).max()):
            raise ValueError("manufactured body load is not constant; use a polynomial of degree <= 4")
        return cls(mesh, f.values, float(qv[0]), "manufactured")

    # derived quantities -----------------------------------------------------

    def at(self, u: np.ndarray) -> np.ndarray:
        """``(n_edges, len(u), 3)`` values at edge parameters ``u``."""
        return np.einsum("uk,ekc->euc", lagrange_weights(u), self.values)

    def local_at(self, u: np.ndarray):
        """``(M_n, M_tau, Q)`` at edge parameters ``u``, each ``(n_edges, len(u))``."""
        v = self.at(u)
        n = self.frame.normals[:, None, :]
        t = self.frame.tangents[:, None, :]
        m = v[..., :2]
        return (m * t).sum(-1), (m * n).sum(-1), v[..., 2]

    def local_nodes(self):
        return self.local_at(LAGRANGE_NODES)

    def m_tau_derivative(self, u: np.ndarray) -> np.ndarray:
        """``d M_tau / ds`` at edge parameters ``u``."""
        dv = np.einsum("uk,ekc->euc", lagrange_dweights(u), self.values)[..., :2]
        return (dv * self.frame.normals[:, None, :]).sum(-1) / self.frame.lengths[:, None]

    def affine_work(self) -> np.ndarray:
        """``l(1), l(x1), l(x2)`` evaluated exactly for the affine test functions."""
        fr = self.frame
        v = self.at(GAUSS_U)
        w = GAUSS_W[None, :] * fr.lengths[:, None]
        pts = fr.points(GAUSS_U)
        m1, m2, qv = v[..., 0], v[..., 1], v[..., 2]
        l1 = (w * qv).sum()
        lx = (w * (qv * pts[..., 0] - m2)).sum()
        ly = (w * (qv * pts[..., 1] + m1)).sum()
        area = self.mesh.areas.sum()
        cx, cy = (self.mesh.areas[:, None] * self.mesh.centroids).sum(0)
        return np.array([l1 + self.q * area, lx + self.q * cx, ly + self.q * cy])

    def magnitude(self) -> float:
        fr = self.frame
        v = np.abs(self.at(GAUSS_U))
        scale = 1.0 + np.abs(fr.points(GAUSS_U)).max()
        return float((GAUSS_W[None, :] * fr.lengths[:, None] * v.sum(-1)).sum() * scale
                     + abs(self.q) * self.mesh.areas.sum() * scale)

    def check_compatibility(self, tol: float = COMPAT_TOL) -> np.ndarray:
        """Raise ``CompatibilityViolation`` unless ``l(g) = 0`` for affine ``g``."""
        r = self.affine_work()
        mag = self.magnitude()
        if mag > 0 and np.abs(r).max() > tol * mag:
            raise CompatibilityViolation(
                f"boundary data not self-equilibrated: l(1), l(x1), l(x2) = {r[0]:.3e}, {r[1]:.3e}, {r[2]:.3e}"
            )
        return r

    @property
    def is_compatible(self) -> bool:
        try:
            self.check_compatibility()
        except CompatibilityViolation:
            return False
        return True

    @property
    def nontrivial(self) -> bool:
        """True unless ``M_n``, ``M_tau,s`` (including corner jumps) and ``Q`` all vanish."""
        mn, mt, qv = self.local_nodes()
        big = max(np.abs(self.values).max(), abs(self.q))
        if big == 0:
            return False
        dts = self.m_tau_derivative(LAGRANGE_NODES) * self.frame.lengths[:, None]
        jumps = mt[:, 0] - np.roll(mt[:, 2], 1)
        sig = max(np.abs(mn).max(), np.abs(dts).max(), np.abs(jumps).max(), np.abs(qv).max(), abs(self.q))
        return bool(sig > 1e-12 * big)

    def scaled(self, s: float) -> "CoupleField":
        return CoupleField(self.mesh, s * self.values, s * self.q, self.label)

    def support_in_gamma(self) -> bool:
        off = self.frame.tags != GAMMA
        return bool(np.abs(self.values[off]).max(initial=0.0) == 0.0)

    def sample_arclength(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian couple ``(n, 2)`` at ``n`` uniform arclength positions, plus the positions."""
        s = np.arange(n) * self.frame.perimeter / n
        i, u = self.frame.locate(s)
        w = lagrange_weights(u)
        return np.einsum("nk,nkc->nc", w, self.values[i][..., :2]), s


def _divdiv(poly: dict, c: np.ndarray, p: np.ndarray) -> float:
    A0, B0, C0, D0, E0, F0 = c
    d = lambda *ax: poly_eval(_deriv(poly, ax), p[None, :])[0]  # noqa: E731
    w1111, w2222 = d(0, 0, 0, 0), d(1, 1, 1, 1)
    w1122, w1112, w1222 = d(0, 0, 1, 1), d(0, 0, 0, 1), d(0, 1, 1, 1)
    return float(A0 * w1111 + F0 * w2222 + (2 * B0 + 4 * E0) * w1122 + 4 * C0 * w1112 + 4 * D0 * w1222)


def _deriv(poly, axes):
    for a in axes:
        poly = poly_derivative(poly, a)
    return poly


def load_vector(f: CoupleField, space: MorleySpace, active: np.ndarray | None = None,
                check: bool = True) -> np.ndarray:
    """Assemble ``l(phi_j)`` for every global Morley DOF.

    Raises
    ------
    CompatibilityViolation
        When ``check`` is set and the data are not self-equilibrated.
    """
    if f.mesh is not space.mesh:
        raise TagMismatch("couple field and space live on different meshes")
    if check:
        f.check_compatibility()
    b = np.zeros(space.n_dofs)
    fr = f.frame
    n_e = len(fr.ids)
    mn, mt, qv = f.local_at(GAUSS_U)
    el = np.repeat(fr.triangles, len(GAUSS_U))
    pts = fr.points(GAUSS_U).reshape(-1, 2)
    phi = space.basis_values(el, pts).reshape(n_e, len(GAUSS_U), 6)
    grad = space.basis_gradients(el, pts).reshape(n_e, len(GAUSS_U), 6, 2)
    ds = np.einsum("eqjd,ed->eqj", grad, fr.tangents)
    dn = np.einsum("eqjd,ed->eqj", grad, fr.normals)
    integrand = qv[..., None] * phi + mt[..., None] * ds - mn[..., None] * dn
    loc = np.einsum("q,eqj->ej", GAUSS_W, integrand) * fr.lengths[:, None]
    np.add.at(b, space.element_dofs[fr.triangles], loc)
    if f.q != 0.0:
        wts = space.integral_weights
        sel = np.arange(space.mesh.n_triangles) if active is None else np.flatnonzero(active)
        np.add.at(b, space.element_dofs[sel], f.q * wts[sel])
    return b
