"""Assembly of the bordered plate system for the four problem kinds."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from ..errors import ConvexityViolation, TagMismatch
from ..geometry.mesh import Mesh
from ..tensors import PlateTensor, convexity_margins, mandel_matrices
from .loads import GAUSS_U, GAUSS_W, CoupleField, load_vector
from .morley import MorleySpace, element_stiffness


class ProblemKind(str, Enum):
    REFERENCE = "reference"
    RIGID = "rigid"
    CAVITY = "cavity"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True, eq=False)
class StiffnessSystem:
    """Element-assembled plate system with its constraints and load.

    ``fixed`` marks DOFs held at zero (clamped or detached).  ``constraints``
    holds the three normalization rows, or ``None`` when the kind has no
    affine kernel.
    """

    space: MorleySpace
    kind: ProblemKind
    inclusion: int | None
    coefficients: np.ndarray        # (M, 6) plate coefficients per element
    element_matrices: np.ndarray    # (M, 6, 6)
    active: np.ndarray              # (M,) elements carrying stiffness
    matrix: sp.csr_matrix
    fixed: np.ndarray
    constraints: np.ndarray | None
    load: np.ndarray
    couple: CoupleField | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    @property
    def n_dofs(self) -> int:
        return self.space.n_dofs


def _check_kind(mesh: Mesh, kind: ProblemKind, inclusion: int | None) -> None:
    if kind in (ProblemKind.RIGID, ProblemKind.INTERMEDIATE) and inclusion is None:
        raise TagMismatch(f"{kind.value} problem needs an inclusion id")
    if inclusion is None:
        return
    if kind is ProblemKind.REFERENCE:
        raise TagMismatch("reference problem takes no inclusion")
    if not (mesh.regions == inclusion).any():
        raise TagMismatch(f"mesh has no region {inclusion}")
    if not (mesh.boundary_tags == inclusion).any():
        raise TagMismatch(f"mesh has no INC{inclusion} boundary edges")


def interface_quadrature(space: MorleySpace, tag: int):
    """Gauss points on the INC``tag`` edges with weights and matrix-side elements."""
    m = space.mesh
    ids = m.tagged_edges(tag)
    be = m.boundary_edges[ids]
    a, b = m.nodes[be[:, 0]], m.nodes[be[:, 1]]
    ln = np.linalg.norm(b - a, axis=1)
    el = m.boundary_edge_triangle()[ids]
    pts = a[:, None, :] + GAUSS_U[None, :, None] * (b - a)[:, None, :]
    w = GAUSS_W[None, :] * ln[:, None]
    return pts.reshape(-1, 2), w.ravel(), np.repeat(el, len(GAUSS_U))


def normalization_rows(space: MorleySpace, kind: ProblemKind, inclusion: int | None) -> np.ndarray | None:
    """Rows of the discrete ``int w``, ``int w_,1``, ``int w_,2`` over Omega or over the inclusion boundary."""
    n = space.n_dofs
    dofs = space.element_dofs
    if kind is ProblemKind.RIGID:
        return None
    rows = np.zeros((3, n))
    if kind is ProblemKind.CAVITY and inclusion is not None:
        pts, w, el = interface_quadrature(space, inclusion)
        phi = space.basis_values(el, pts) * w[:, None]
        grad = space.basis_gradients(el, pts) * w[:, None, None]
        np.add.at(rows[0], dofs[el], phi)
        np.add.at(rows[1], dofs[el], grad[..., 0])
        np.add.at(rows[2], dofs[el], grad[..., 1])
        return rows
    np.add.at(rows[0], dofs, space.integral_weights)
    np.add.at(rows[1], dofs, space.gradient_integral_weights[..., 0])
    np.add.at(rows[2], dofs, space.gradient_integral_weights[..., 1])
    return rows


def element_coefficients(plate: PlateTensor, mesh: Mesh, kind: ProblemKind, inclusion: int | None,
                         inclusion_plate: PlateTensor | None = None) -> np.ndarray:
    coeffs = plate.coefficients_at(mesh.centroids, mesh.regions)
    if kind is ProblemKind.INTERMEDIATE:
        if inclusion_plate is None:
            raise TagMismatch("intermediate problem needs an inclusion plate tensor")
        sel = mesh.regions == inclusion
        coeffs[sel] = inclusion_plate.coefficients_at(mesh.centroids[sel], mesh.regions[sel])
    return coeffs


def assemble(plate: PlateTensor, mesh: Mesh, kind: ProblemKind | str, inclusion: int | None = None,
             couple: CoupleField | None = None, inclusion_plate: PlateTensor | None = None,
             space: MorleySpace | None = None, check_compatibility: bool = True) -> StiffnessSystem:
    """Assemble the Morley stiffness matrix, constraints and load vector.

    Raises
    ------
    ConvexityViolation
        If the plate tensor is not strongly convex on an active element.
    TagMismatch
        If the mesh tags do not fit the problem kind.
    """
    kind = ProblemKind(kind)
    _check_kind(mesh, kind, inclusion)
    space = space if space is not None and space.mesh is mesh else MorleySpace(mesh)
    coeffs = element_coefficients(plate, mesh, kind, inclusion, inclusion_plate)
    active = np.ones(mesh.n_triangles, dtype=bool)
    if kind in (ProblemKind.RIGID, ProblemKind.CAVITY) and inclusion is not None:
        active = mesh.regions != inclusion
    gam = convexity_margins(coeffs[active])
    if (gam <= 0).any():
        raise ConvexityViolation(f"plate tensor fails convexity on {int((gam <= 0).sum())} elements "
                                 f"(min margin {gam.min():.3e})")
    kel = element_stiffness(space, mandel_matrices(coeffs))
    dofs = space.element_dofs
    sel = np.flatnonzero(active)
    rows = np.repeat(dofs[sel], 6, axis=1).ravel()
    cols = np.tile(dofs[sel], (1, 6)).ravel()
    n = space.n_dofs
    vals = kel[sel].ravel()
    # assemble the upper triangle once and mirror it, so K is exactly symmetric
    up = rows <= cols
    u = sp.coo_matrix((vals[up], (rows[up], cols[up])), shape=(n, n)).tocsr()
    u.sum_duplicates()
    k = (u + sp.triu(u, 1, format="csr").T).tocsr()

    fixed = np.zeros(n, dtype=bool)
    if kind is ProblemKind.RIGID:
        fixed[np.unique(dofs[mesh.regions == inclusion])] = True
    elif kind is ProblemKind.CAVITY and inclusion is not None:
        attached = np.zeros(n, dtype=bool)
        attached[np.unique(dofs[sel])] = True
        fixed = ~attached

    b = np.zeros(n) if couple is None else load_vector(couple, space, active, check=check_compatibility)
    cons = normalization_rows(space, kind, inclusion)
    return StiffnessSystem(space, kind, inclusion, coeffs, kel, active, k, fixed, cons, b, couple)
