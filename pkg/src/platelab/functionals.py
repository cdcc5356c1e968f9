"""Works, boundary norms, frequency, the affine gap on the measurement arc, and boundary forces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateArc, KindMismatch, OpenCurve
from .fem.loads import GAUSS_U, GAUSS_W, CoupleField, EdgeFrame
from .fem.solvers import BoundaryForce, Solution, boundary_force
from .geometry.domain import AffineFunction
from .geometry.mesh import GAMMA

H_MINUS_HALF_CONVENTION = "fourier (1+k^2)^(-1/2), k = 2 pi m / |boundary|"

__all__ = [
    "WorkReport", "work", "boundary_l2", "boundary_h_minus_half", "h_minus_half_from_samples",
    "NormReport", "frequency", "affine_gap", "GammaTraces", "gamma_traces", "traces_at",
    "boundary_force", "BoundaryForce",
]


# works ------------------------------------------------------------------------


@dataclass(frozen=True)
class WorkReport:
    kind: str
    W_energy: float
    W_boundary: float
    discrepancy: float

    csv_header = ("kind", "W_energy", "W_boundary", "discrepancy")

    def csv_row(self) -> tuple:
        return (self.kind, self.W_energy, self.W_boundary, self.discrepancy)

    @property
    def W(self) -> float:
        return self.W_energy


def boundary_work(s: Solution, f: CoupleField) -> float:
    """Work of the couple field written with the tangential derivative moved onto the data.

    ``-int M_tau,s w - int M_n w,n + int Q w`` over the outer edges, minus the
    corner terms ``[M_tau] w`` at loop vertices, plus the body-load work.
    """
    fr = f.frame
    n_e, n_q = len(fr.ids), len(GAUSS_U)
    el = np.repeat(fr.triangles, n_q)
    pts = fr.points(GAUSS_U).reshape(-1, 2)
    w = s.values_at(el, pts).reshape(n_e, n_q)
    dw = s.gradients_at(el, pts).reshape(n_e, n_q, 2)
    wn = np.einsum("eqd,ed->eq", dw, fr.normals)
    mn, mt, qv = f.local_at(GAUSS_U)
    dmt = f.m_tau_derivative(GAUSS_U)
    integrand = -dmt * w - mn * wn + qv * w
    total = float((integrand * GAUSS_W[None, :] * fr.lengths[:, None]).sum())
    # corner jumps of M_tau at the start vertex of each edge
    _, mt_nodes, _ = f.local_nodes()
    jumps = mt_nodes[:, 0] - np.roll(mt_nodes[:, 2], 1)
    start_nodes = s.mesh.boundary_edges[fr.ids, 0]
    total -= float((jumps * s.dofs[start_nodes]).sum())
    if f.q != 0.0:
        act = np.flatnonzero(s.system.active)
        wts = s.space.integral_weights[act]
        total += f.q * float((wts * s.dofs[s.space.element_dofs[act]]).sum())
    return total


def work(s: Solution, f: CoupleField | None = None) -> WorkReport:
    """Energy and boundary evaluations of the work done by the couple field.

    Raises
    ------
    KindMismatch
        If ``f`` is not the couple field the solution was computed with.
    """
    if f is None:
        f = s.couple
    if f is None or (s.couple is not None and f is not s.couple and
                     (f.mesh is not s.mesh or not np.array_equal(f.values, s.couple.values))):
        raise KindMismatch("work needs the couple field used for the solve")
    we = s.energy()
    wb = boundary_work(s, f)
    disc = abs(we - wb) / max(abs(we), np.finfo(float).eps)
    return WorkReport(s.kind.value, we, wb, disc)


# norms ------------------------------------------------------------------------


def boundary_l2(g, arc: str | None = None) -> float:
    """L2 norm on the boundary.

    ``g`` is either a CoupleField (the cartesian couple is measured; ``arc``
    may be ``"gamma"`` to restrict to the measurement arc) or a pair
    ``(values, weights)`` of quadrature samples.
    """
    if isinstance(g, CoupleField):
        fr = g.frame
        v = g.at(GAUSS_U)[..., :2]
        w = GAUSS_W[None, :] * fr.lengths[:, None]
        if arc == "gamma":
            w = w * (fr.tags == GAMMA)[:, None]
        return float(np.sqrt((w * (v**2).sum(-1)).sum()))
    values, weights = g
    v = np.asarray(values, dtype=float)
    v2 = v**2 if v.ndim == 1 else (v**2).sum(-1)
    return float(np.sqrt((np.asarray(weights) * v2).sum()))


def h_minus_half_from_samples(values: np.ndarray, length: float) -> float:
    """H^{-1/2} norm of a periodic function sampled uniformly in arclength.

    ``||g||^2 = L sum_m |c_m|^2 (1 + k_m^2)^(-1/2)`` with ``c_m`` the discrete
    Fourier coefficients and ``k_m = 2 pi m / L``.  For vector data the
    components are summed.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    n = v.shape[0]
    c = np.fft.fft(v, axis=0) / n
    k = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n) / length
    weight = (1 + k**2) ** -0.5
    return float(np.sqrt(length * (weight[:, None] * np.abs(c) ** 2).sum()))


def boundary_h_minus_half(g, n_samples: int = 1024, closed: bool = True, length: float | None = None) -> float:
    """H^{-1/2} norm on the closed outer boundary.

    Raises
    ------
    OpenCurve
        When asked for an open arc.
    """
    if not closed:
        raise OpenCurve("the H^-1/2 norm is only defined here on closed curves")
    if n_samples < 2 or n_samples & (n_samples - 1):
        raise ValueError("n_samples must be a power of two")
    if isinstance(g, CoupleField):
        vals, _ = g.sample_arclength(n_samples)
        return h_minus_half_from_samples(vals, g.frame.perimeter)
    if length is None:
        raise ValueError("sampled input needs the curve length")
    return h_minus_half_from_samples(np.asarray(g), length)


@dataclass(frozen=True)
class NormReport:
    l2: float
    h_minus_half: float
    frequency: float
    convention: str = H_MINUS_HALF_CONVENTION


def frequency(f: CoupleField, n_samples: int = 1024) -> NormReport:
    l2 = boundary_l2(f)
    hm = boundary_h_minus_half(f, n_samples)
    F = l2 / hm if hm > 0 else float("nan")
    return NormReport(l2, hm, F)


# affine gap -------------------------------------------------------------------


def _affine_objective(theta, x, n, u, un, w, rho0):
    a, b, c = theta
    g = a * x[:, 0] + b * x[:, 1] + c
    gn = a * n[:, 0] + b * n[:, 1]
    return np.sqrt((w * (u - g) ** 2).sum()) + rho0 * np.sqrt((w * (un - gn) ** 2).sum())


def affine_gap(u: np.ndarray, un: np.ndarray, points: np.ndarray, normals: np.ndarray,
               weights: np.ndarray, rho0: float = 1.0) -> tuple[float, AffineFunction]:
    """Minimize ``||u - g||_L2(arc) + rho0 ||u_n - g_,n||_L2(arc)`` over affine ``g``.

    A weighted least-squares fit of the squared objective gives the start,
    then Nelder-Mead polishes the exact sum-of-norms objective.

    Raises
    ------
    DegenerateArc
        If the arc has no measure or the normal equations are singular.
    """
    u, un, w = (np.asarray(a, dtype=float) for a in (u, un, weights))
    x = np.asarray(points, dtype=float)
    n = np.asarray(normals, dtype=float)
    if w.sum() <= 0:
        raise DegenerateArc("measurement arc has zero measure")
    center = (w[:, None] * x).sum(0) / w.sum()
    xc = x - center
    ell = np.sqrt((w * (xc**2).sum(1)).sum() / w.sum())
    ell = ell if ell > 0 else 1.0
    xs = xc / ell
    # least-squares warm start in centered, scaled coordinates: g = a' xs + b' ys + c
    sw = np.sqrt(w)
    rows = np.vstack([np.c_[xs * sw[:, None], sw], np.c_[rho0 * n * sw[:, None] / ell, np.zeros(len(w))]])
    rhs = np.concatenate([u * sw, rho0 * un * sw])
    gram = rows.T @ rows
    if np.linalg.cond(gram) > 1e12:
        raise DegenerateArc("normal equations of the affine fit are singular")
    theta0 = np.linalg.solve(gram, rows.T @ rhs)
    # exact objective in the same coordinates
    nn = n / ell
    obj = lambda t: _affine_objective(t, xs, nn, u, un, w, rho0)  # noqa: E731
    f0 = obj(theta0)
    best = theta0
    if f0 > 0:
        # polish the offset from the warm start, so the search is affine-covariant
        step = 0.1 * max(f0 / np.sqrt(w.sum()), 1e-300)
        simplex = np.vstack([np.zeros(3), step * np.eye(3)])
        res = minimize(lambda d: obj(theta0 + d), np.zeros(3), method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-14 * (1 + np.abs(theta0).max()),
                                "fatol": 1e-16 * f0, "maxiter": 4000, "maxfev": 8000})
        if res.fun < f0:
            best = theta0 + res.x
    eps = float(obj(best))
    ap, bp, cp = best
    a, b = ap / ell, bp / ell
    g = AffineFunction(float(a), float(b), float(cp - a * center[0] - b * center[1]))
    return eps, g


# traces on the measurement arc -------------------------------------------------


@dataclass(frozen=True)
class GammaTraces:
    """Displacement and normal derivative at quadrature points of the arc."""

    arclength: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    w: np.ndarray
    wn: np.ndarray

    def scale(self) -> float:
        return float(max(np.abs(self.w).max(initial=0.0), np.abs(self.wn).max(initial=0.0)))


def _gamma_quadrature(frame: EdgeFrame):
    ids = np.flatnonzero(frame.tags == GAMMA)
    if len(ids) == 0:
        raise DegenerateArc("mesh has no measurement arc (GAMMA edges)")
    s = frame.arclength[ids, None] + GAUSS_U[None, :] * frame.lengths[ids, None]
    w = GAUSS_W[None, :] * frame.lengths[ids, None]
    return ids, s.ravel(), w.ravel()


def traces_at(s: Solution, arclength: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate ``w`` and ``w_,n`` of a solution at outer-boundary arclength positions."""
    fr = EdgeFrame(s.mesh)
    i, u = fr.locate(arclength)
    pts = fr.start[i] + u[:, None] * (fr.end[i] - fr.start[i])
    el = fr.triangles[i]
    w = s.values_at(el, pts)
    wn = (s.gradients_at(el, pts) * fr.normals[i]).sum(1)
    return pts, fr.normals[i], w, wn


def gamma_traces(s: Solution, reference: Solution | None = None) -> GammaTraces:
    """Traces on the arc at the quadrature points of ``reference``'s mesh (default: own mesh)."""
    base = reference if reference is not None else s
    _, arc, wts = _gamma_quadrature(EdgeFrame(base.mesh))
    pts, nrm, w, wn = traces_at(s, arc)
    return GammaTraces(arc, pts, nrm, wts, w, wn)


def trace_gap(a: GammaTraces, b: GammaTraces, rho0: float) -> tuple[float, AffineFunction]:
    """Affine gap between two sets of traces sampled at the same arc positions."""
    if not np.array_equal(a.arclength, b.arclength):
        raise ValueError("traces must share their sample positions")
    return affine_gap(a.w - b.w, a.wn - b.wn, a.points, a.normals, a.weights, rho0)
