"""Morley triangle: local bases, Hessians, traces and element matrices.

Global degrees of freedom are numbered with the ``N`` vertex values first and
the ``E`` edge-midpoint normal derivatives after them.  The normal of a global
edge ``(a, b)`` with ``a < b`` is ``(t_y, -t_x) / |t|`` where ``t = x_b - x_a``.
Local DOF ``3 + i`` belongs to the edge opposite local vertex ``i``.

Each local basis function is a quadratic written in the scaled coordinates
``xi = (x - c) / s`` with ``c`` the centroid and ``s`` the element diameter,
using the monomials ``1, xi, eta, xi^2, xi eta, eta^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..geometry.mesh import Mesh

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class MorleySpace:
    mesh: Mesh

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes + self.mesh.n_edges

    @cached_property
    def element_dofs(self) -> np.ndarray:
        m = self.mesh
        return np.hstack([m.triangles, m.triangle_edges + m.n_nodes])

    @cached_property
    def centers(self) -> np.ndarray:
        return self.mesh.centroids

    @cached_property
    def scales(self) -> np.ndarray:
        p = self.mesh.nodes[self.mesh.triangles]
        d = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.linalg.norm(d, axis=2).max(axis=1)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """``(M, 6, 6)`` monomial coefficients; column ``j`` is local basis ``j``."""
        m = self.mesh
        p = (m.nodes[m.triangles] - self.centers[:, None, :]) / self.scales[:, None, None]
        n_el = m.n_triangles
        dmat = np.zeros((n_el, 6, 6))
        for i in range(3):
            x, y = p[:, i, 0], p[:, i, 1]
            dmat[:, i] = np.stack([np.ones(n_el), x, y, x * x, x * y, y * y], axis=1)
        normals = m.edge_normals[m.triangle_edges]  # (M, 3, 2)
        for i in range(3):
            a, b = p[:, (i + 1) % 3], p[:, (i + 2) % 3]
            mid = 0.5 * (a + b)
            x, y = mid[:, 0], mid[:, 1]
            nx, ny = normals[:, i, 0], normals[:, i, 1]
            # d/dn in physical units = (1/s) (n . grad_xi)
            gx = np.stack([np.zeros(n_el), np.ones(n_el), np.zeros(n_el), 2 * x, y, np.zeros(n_el)], 1)
            gy = np.stack([np.zeros(n_el), np.zeros(n_el), np.ones(n_el), np.zeros(n_el), x, 2 * y], 1)
            dmat[:, 3 + i] = (nx[:, None] * gx + ny[:, None] * gy) / self.scales[:, None]
        return np.linalg.inv(dmat)

    @cached_property
    def basis_hessians(self) -> np.ndarray:
        """``(M, 6, 2, 2)`` constant Hessians of the local basis functions."""
        c = self.coefficients
        s2 = self.scales[:, None] ** 2
        hxx = 2 * c[:, 3, :] / s2
        hxy = c[:, 4, :] / s2
        hyy = 2 * c[:, 5, :] / s2
        h = np.empty(c.shape[:1] + (6, 2, 2))
        h[..., 0, 0] = hxx
        h[..., 1, 1] = hyy
        h[..., 0, 1] = h[..., 1, 0] = hxy
        return h

    @cached_property
    def basis_mandel(self) -> np.ndarray:
        """``(M, 3, 6)`` Hessians as ``(H11, H22, sqrt2 H12)`` columns."""
        h = self.basis_hessians
        return np.stack([h[..., 0, 0], h[..., 1, 1], SQRT2 * h[..., 0, 1]], axis=1)

    # evaluation ---------------------------------------------------------------

    def _local(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        return (points - self.centers[elements]) / self.scales[elements, None]

    def basis_values(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        """``(n, 6)`` basis values of element ``elements[i]`` at ``points[i]``."""
        q = self._local(elements, points)
        x, y = q[:, 0], q[:, 1]
        mono = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=1)
        return np.einsum("nk,nkj->nj", mono, self.coefficients[elements])

    def basis_gradients(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        """``(n, 6, 2)`` basis gradients."""
        q = self._local(elements, points)
        x, y = q[:, 0], q[:, 1]
        z, o = np.zeros_like(x), np.ones_like(x)
        gx = np.stack([z, o, z, 2 * x, y, z], axis=1)
        gy = np.stack([z, z, o, z, x, 2 * y], axis=1)
        c = self.coefficients[elements]
        s = self.scales[elements, None]
        return np.stack([np.einsum("nk,nkj->nj", gx, c) / s, np.einsum("nk,nkj->nj", gy, c) / s], axis=2)

    def values(self, u: np.ndarray, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        return (self.basis_values(elements, points) * u[self.element_dofs[elements]]).sum(1)

    def gradients(self, u: np.ndarray, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        g = self.basis_gradients(elements, points)
        return np.einsum("nj,njd->nd", u[self.element_dofs[elements]], g)

    def hessians(self, u: np.ndarray) -> np.ndarray:
        """``(M, 2, 2)`` elementwise Hessians of a DOF vector."""
        return np.einsum("mj,mjab->mab", u[self.element_dofs], self.basis_hessians)

    # interpolation and integrals ----------------------------------------------

    def interpolate(self, func, grad) -> np.ndarray:
        """Morley interpolant from a function and its gradient (both vectorized over points)."""
        m = self.mesh
        u = np.empty(self.n_dofs)
        u[: m.n_nodes] = func(m.nodes)
        mid = 0.5 * (m.nodes[m.edges[:, 0]] + m.nodes[m.edges[:, 1]])
        u[m.n_nodes:] = (np.asarray(grad(mid)) * m.edge_normals).sum(1)
        return u

    def interpolate_polynomial(self, poly: dict) -> np.ndarray:
        """Interpolant of ``sum c x^i y^j`` given as ``{(i, j): c}``."""
        return self.interpolate(lambda p: poly_eval(poly, p), lambda p: poly_grad(poly, p))

    @cached_property
    def integral_weights(self) -> np.ndarray:
        """``(M, 6)`` element integrals of the basis functions (exact)."""
        m = self.mesh
        n_el = m.n_triangles
        acc = np.zeros((n_el, 6))
        p = m.nodes[m.triangles]
        el = np.arange(n_el)
        for i in range(3):
            mid = 0.5 * (p[:, (i + 1) % 3] + p[:, (i + 2) % 3])
            acc += self.basis_values(el, mid)
        return acc * (m.areas / 3)[:, None]

    @cached_property
    def gradient_integral_weights(self) -> np.ndarray:
        """``(M, 6, 2)`` element integrals of the basis gradients (exact)."""
        el = np.arange(self.mesh.n_triangles)
        return self.basis_gradients(el, self.centers) * self.mesh.areas[:, None, None]


def element_stiffness(space: MorleySpace, plate_mandel: np.ndarray) -> np.ndarray:
    """``(M, 6, 6)`` element matrices ``area * B^T P B`` (exactly symmetric)."""
    b = space.basis_mandel
    k = np.einsum("mai,mab,mbj->mij", b, plate_mandel, b) * space.mesh.areas[:, None, None]
    return 0.5 * (k + np.transpose(k, (0, 2, 1)))


# polynomials given as {(i, j): coefficient} ----------------------------------


def poly_eval(poly: dict, p: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(p)
    out = np.zeros(len(p))
    for (i, j), c in poly.items():
        out += c * p[:, 0] ** i * p[:, 1] ** j
    return out


def poly_derivative(poly: dict, axis: int) -> dict:
    out = {}
    for (i, j), c in poly.items():
        if axis == 0 and i > 0:
            out[(i - 1, j)] = out.get((i - 1, j), 0.0) + c * i
        elif axis == 1 and j > 0:
            out[(i, j - 1)] = out.get((i, j - 1), 0.0) + c * j
    return out


def poly_grad(poly: dict, p: np.ndarray) -> np.ndarray:
    return np.stack([poly_eval(poly_derivative(poly, 0), p), poly_eval(poly_derivative(poly, 1), p)], axis=1)


def poly_hessian(poly: dict, p: np.ndarray) -> np.ndarray:
    dx, dy = poly_derivative(poly, 0), poly_derivative(poly, 1)
    hxx = poly_eval(poly_derivative(dx, 0), p)
    hxy = poly_eval(poly_derivative(dx, 1), p)
    hyy = poly_eval(poly_derivative(dy, 1), p)
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def poly_from_spec(terms) -> dict:
    """Accept ``{"i,j": c}`` or a list of ``[i, j, c]`` triples."""
    if isinstance(terms, dict):
        out = {}
        for k, c in terms.items():
            i, j = (int(s) for s in str(k).split(","))
            out[(i, j)] = float(c)
        return out
    return {(int(i), int(j)): float(c) for i, j, c in terms}
