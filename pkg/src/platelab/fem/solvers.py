"""Linear solves, discrete solutions and duality-based reaction extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import KindMismatch, SolveFailure
from ..geometry.domain import AffineFunction
from ..geometry.mesh import Mesh
from ..tensors import PlateTensor
from .assembly import ProblemKind, StiffnessSystem, assemble
from .loads import CoupleField
from .morley import MorleySpace

RESIDUAL_TOL = 1e-10
ITERATIVE_THRESHOLD = 200_000


@dataclass(frozen=True, eq=False)
class Solution:
    """Discrete displacement for one problem kind, with its normalization record."""

    system: StiffnessSystem
    dofs: np.ndarray
    multipliers: np.ndarray
    residual: float                 # normwise backward error of the linear solve
    normalization: dict = field(default_factory=dict)

    @property
    def kind(self) -> ProblemKind:
        return self.system.kind

    @property
    def inclusion(self) -> int | None:
        return self.system.inclusion

    @property
    def space(self) -> MorleySpace:
        return self.system.space

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh

    @property
    def couple(self) -> CoupleField | None:
        return self.system.couple

    @cached_property
    def hessians(self) -> np.ndarray:
        """``(M, 2, 2)`` elementwise Hessians (zero on inactive elements)."""
        h = self.space.hessians(self.dofs)
        h[~self.system.active] = 0.0
        return h

    def values_at(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        return self.space.values(self.dofs, elements, points)

    def gradients_at(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        return self.space.gradients(self.dofs, elements, points)

    def energy(self, elements: np.ndarray | None = None) -> float:
        """``a_h(w, w)`` over the given element mask (default: active elements)."""
        sel = self.system.active if elements is None else elements
        return bilinear(self.system, self.dofs, self.dofs, sel)

    def scaled(self, s: float) -> "Solution":
        return Solution(self.system, s * self.dofs, s * self.multipliers, self.residual, dict(self.normalization))

    def csv_rows(self):
        k = self.kind.value
        for i, v in enumerate(self.dofs):
            yield (i, k, v)


def bilinear(system: StiffnessSystem, u: np.ndarray, v: np.ndarray, elements: np.ndarray | None = None) -> float:
    """Broken form ``sum_T int P hess(u) : hess(v)`` over selected elements."""
    dofs = system.space.element_dofs
    kel = system.element_matrices
    if elements is not None:
        sel = np.flatnonzero(elements) if elements.dtype == bool else elements
        dofs, kel = dofs[sel], kel[sel]
    return float(np.einsum("mi,mij,mj->", u[dofs], kel, v[dofs]))


def solve(system: StiffnessSystem, tol: float = RESIDUAL_TOL) -> Solution:
    """Solve the bordered system and attach the normalization record.

    Raises
    ------
    SolveFailure
        On factorization breakdown or if the relative residual exceeds ``tol``.
    """
    n = system.n_dofs
    free = np.flatnonzero(~system.fixed)
    a = system.matrix[free][:, free]
    b = system.load[free]
    c = system.constraints
    if c is not None:
        cf = sp.csr_matrix(c[:, free])
        big = sp.bmat([[a, cf.T], [cf, None]], format="csc")
        rhs = np.concatenate([b, np.zeros(c.shape[0])])
    else:
        big = a.tocsc()
        rhs = b
    bnorm = np.linalg.norm(rhs)
    u = np.zeros(n)
    if bnorm == 0.0:
        x = np.zeros(len(rhs))
        res = raw = 0.0
    else:
        x, res, raw = _factor_solve(big, rhs, tol)
    u[free] = x[: len(free)]
    lam = x[len(free):]
    norm = {"raw_residual": raw}
    if c is not None:
        vals = c @ u
        norm.update(int_w=float(vals[0]), int_w1=float(vals[1]), int_w2=float(vals[2]))
    else:
        norm["max_fixed"] = float(np.abs(u[system.fixed]).max(initial=0.0))
    return Solution(system, u, lam, res, norm)


def backward_error(a: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Normwise backward error ``|r| / (|A| |x| + |b|)`` (inf-norms) and the raw ``|r| / |b|``."""
    r = b - a @ x
    anorm = abs(a).sum(axis=1).max()
    rn = np.abs(r).max()
    be = rn / (anorm * np.abs(x).max() + np.abs(b).max())
    return float(be), float(rn / np.abs(b).max())


def _factor_solve(big: sp.csc_matrix, rhs: np.ndarray, tol: float) -> tuple[np.ndarray, float, float]:
    if big.shape[0] > ITERATIVE_THRESHOLD:
        x, info = spla.minres(big, rhs, rtol=tol * 0.1, maxiter=20 * big.shape[0])
        if info != 0:
            raise SolveFailure(f"iterative solver did not converge (info={info})")
    else:
        try:
            lu = spla.splu(big, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolveFailure(f"factorization failed: {exc}") from None
        x = lu.solve(rhs)
        # iterative refinement until the backward error stalls
        best = backward_error(big, x, rhs)[0]
        for _ in range(3):
            x_new = x + lu.solve(rhs - big @ x)
            err = backward_error(big, x_new, rhs)[0]
            if not err < best:
                break
            x, best = x_new, err
    if not np.all(np.isfinite(x)):
        raise SolveFailure("solution contains non-finite values")
    res, raw = backward_error(big, x, rhs)
    if res > tol:
        raise SolveFailure(f"relative residual {res:.3e} exceeds {tol:.1e}")
    return x, res, raw


# problem drivers -------------------------------------------------------------


def solve_reference(plate: PlateTensor, mesh: Mesh, couple: CoupleField, tol: float = RESIDUAL_TOL) -> Solution:
    return solve(assemble(plate, mesh, ProblemKind.REFERENCE, None, couple), tol)


def solve_rigid(plate: PlateTensor, mesh: Mesh, couple: CoupleField, inclusion: int = 1,
                tol: float = RESIDUAL_TOL) -> Solution:
    return solve(assemble(plate, mesh, ProblemKind.RIGID, inclusion, couple), tol)


def solve_cavity(plate: PlateTensor, mesh: Mesh, couple: CoupleField, inclusion: int | None = 1,
                 tol: float = RESIDUAL_TOL) -> Solution:
    return solve(assemble(plate, mesh, ProblemKind.CAVITY, inclusion, couple), tol)


def solve_intermediate(plate: PlateTensor, mesh: Mesh, couple: CoupleField, inclusion_plate: PlateTensor,
                       inclusion: int = 1, tol: float = RESIDUAL_TOL) -> Solution:
    return solve(assemble(plate, mesh, ProblemKind.INTERMEDIATE, inclusion, couple, inclusion_plate), tol)


def evaluate_hessian(s: Solution, element: int) -> np.ndarray:
    return s.hessians[element].copy()


def galerkin_residual(s: Solution) -> float:
    """``max |K u + C^T lam - b|`` over free DOFs, relative to ``max |b|``."""
    sys_ = s.system
    r = sys_.matrix @ s.dofs - sys_.load
    if sys_.constraints is not None:
        r = r + sys_.constraints.T @ s.multipliers
    free = ~sys_.fixed
    scale = max(np.abs(sys_.load).max(), 1e-300)
    return float(np.abs(r[free]).max(initial=0.0) / scale)


# duality evaluator -----------------------------------------------------------


def interface_dofs(space: MorleySpace, inclusion: int) -> np.ndarray:
    """Global DOFs located on the boundary of an inclusion (its nodes and edge midpoints)."""
    m = space.mesh
    ids = m.tagged_edges(inclusion)
    if len(ids) == 0:
        raise KindMismatch(f"mesh has no boundary for inclusion {inclusion}")
    be = m.boundary_edges[ids]
    nodes = np.unique(be)
    edges = m.edge_index(be) + m.n_nodes
    return np.concatenate([nodes, np.unique(edges)])


def as_dof_vector(space: MorleySpace, g) -> np.ndarray:
    """Morley DOF vector for ``g``: a DOF vector, an AffineFunction, or a ``(func, grad)`` pair."""
    if isinstance(g, np.ndarray) and g.shape == (space.n_dofs,):
        return g
    if isinstance(g, AffineFunction):
        return space.interpolate(g, lambda p: np.tile(g.gradient, (len(p), 1)))
    if isinstance(g, tuple) and len(g) == 2:
        return space.interpolate(*g)
    raise TypeError("g must be a DOF vector, an AffineFunction or a (func, grad) pair")


def lifting(space: MorleySpace, inclusion: int, g) -> np.ndarray:
    """``E_h g``: the DOFs of ``g`` on the inclusion boundary, zero elsewhere."""
    full = as_dof_vector(space, g)
    out = np.zeros(space.n_dofs)
    idx = interface_dofs(space, inclusion)
    out[idx] = full[idx]
    return out


@dataclass(frozen=True, eq=False)
class BoundaryForce:
    """Linear functional ``g -> l(E_h g) - a_h^matrix(w, E_h g)``.

    This is the discrete pairing of the boundary moment and Kirchhoff shear of
    ``w`` with ``(g_,n, g)`` on the inclusion boundary, obtained by duality.
    """

    solution: Solution
    inclusion: int

    @cached_property
    def _matrix_mask(self) -> np.ndarray:
        return self.solution.mesh.regions != self.inclusion

    def __call__(self, g) -> float:
        s = self.solution
        e = lifting(s.space, self.inclusion, g)
        return float(s.system.load @ e) - bilinear(s.system, s.dofs, e, self._matrix_mask)


def boundary_force(s: Solution, inclusion: int | None = None) -> BoundaryForce:
    """Duality evaluator around inclusion ``inclusion`` (defaults to the solution's own).

    Raises
    ------
    KindMismatch
        If there is no inclusion to extract forces on.
    """
    k = s.inclusion if inclusion is None else inclusion
    if k is None or not (s.mesh.regions == k).any():
        raise KindMismatch("boundary force needs an inclusion in the solution's mesh")
    return BoundaryForce(s, k)


def check_rigid_equilibrium(s: Solution, couple: CoupleField | None = None) -> np.ndarray:
    """Residuals ``R(g) = a_h(w, E_h g) - l(E_h g)`` for ``g = 1, x1, x2``."""
    if s.kind is not ProblemKind.RIGID:
        raise KindMismatch("equilibrium residuals are defined for rigid-inclusion solutions")
    if couple is not None and couple is not s.couple:
        raise KindMismatch("couple field differs from the one the solution was computed with")
    f = boundary_force(s)
    gs = (AffineFunction(0, 0, 1), AffineFunction(1, 0, 0), AffineFunction(0, 1, 0))
    return np.array([-f(g) for g in gs])
