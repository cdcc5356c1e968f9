"""Quality triangulation of a DomainSpec.

The constrained Delaunay triangulation and Ruppert-style refinement are
delegated to Shewchuk's Triangle (``triangle`` package).  This module prepares
the boundary polylines, tags regions and boundary edges, and enforces the
element-size bound.
"""

from __future__ import annotations

import math

import numpy as np
import triangle as tr

from ..errors import MeshFailure
from .domain import Curve, DomainSpec
from .mesh import GAMMA, OUTER, Mesh

MIN_ANGLE = 20.0


def _insert_fractions(curve: Curve, fractions) -> np.ndarray:
    """Polygon vertices with extra vertices at the given arclength fractions."""
    v = curve.vertices
    cum = curve.arclength()
    per = curve.perimeter
    extra = []
    for f in fractions:
        s = (f % 1.0) * per
        if np.min(np.abs(cum - s)) > 1e-12 * per and abs(s - per) > 1e-12 * per:
            extra.append(s)
    if not extra:
        return v.copy()
    s_all = np.concatenate([cum, extra])
    order = np.argsort(s_all, kind="stable")
    pts = np.vstack([v, curve.point_at(np.array(extra))])
    return pts[order]


def _subdivide(v: np.ndarray, h: float) -> np.ndarray:
    out = []
    w = np.roll(v, -1, axis=0)
    for a, b in zip(v, w):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / h - 1e-9)))
        u = np.arange(k)[:, None] / k
        out.append(a + u * (b - a))
    return np.vstack(out)


def _pslg(spec: DomainSpec, h: float):
    loops = []
    fr = [] if spec.gamma is None else list(spec.gamma)
    loops.append(_subdivide(_insert_fractions(spec.outer, fr), h))
    for inc in spec.inclusions:
        loops.append(_subdivide(inc.curve.vertices, h))
    verts, segs, off = [], [], 0
    for lp in loops:
        n = len(lp)
        verts.append(lp)
        idx = off + np.arange(n)
        segs.append(np.c_[idx, np.roll(idx, -1)])
        off += n
    return np.vstack(verts), np.vstack(segs)


def _classify(spec: DomainSpec, centroids: np.ndarray) -> np.ndarray:
    regions = np.zeros(len(centroids), dtype=np.int64)
    for k, inc in enumerate(spec.inclusions, start=1):
        regions[inc.curve.contains(centroids)] = k
    return regions


def _boundary(nodes, tris, regions, spec: DomainSpec):
    t = tris
    # directed local edges: (v_i, v_{i+1}) of each CCW triangle
    directed = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
    owner = np.repeat(np.arange(len(t)), 3)
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    edges, tags = [], []
    single = counts[inv] == 1
    edges.append(directed[single])
    tags.append(np.full(single.sum(), OUTER))
    # interface edges: keep the orientation seen from the matrix triangle
    shared = ~single
    reg = regions[owner]
    pair_reg = np.zeros(len(counts), dtype=np.int64)
    np.maximum.at(pair_reg, inv[shared], reg[shared])
    iface = shared & (reg == 0) & (pair_reg[inv] >= 1)
    edges.append(directed[iface])
    tags.append(pair_reg[inv[iface]])
    be = np.vstack(edges)
    bt = np.concatenate(tags)
    if spec.gamma is not None:
        outer_ids = np.flatnonzero(bt == OUTER)
        # arclength of outer edge midpoints along the loop starting at outer vertex 0
        nxt = {int(a): i for i, a in zip(outer_ids, be[outer_ids, 0])}
        start = next((i for i in outer_ids if be[i, 0] == 0), None)
        if start is None:
            raise MeshFailure("outer vertex 0 is not on the mesh boundary")
        order, i = [], start
        for _ in range(len(outer_ids)):
            order.append(i)
            i = nxt[int(be[i, 1])]
        order = np.array(order)
        ln = np.linalg.norm(nodes[be[order, 1]] - nodes[be[order, 0]], axis=1)
        per = ln.sum()
        mid = (np.cumsum(ln) - 0.5 * ln) / per
        g0, g1 = spec.gamma
        bt[order[(mid > g0) & (mid < g1)]] = GAMMA
    return be, bt


def build_mesh(spec: DomainSpec, target_h: float, max_tries: int = 12) -> Mesh:
    """Conforming quality triangulation with every edge no longer than ``target_h``.

    Raises
    ------
    MeshFailure
        If the domain is geometrically invalid or refinement cannot meet the
        size and angle bounds.
    """
    if not (target_h > 0 and math.isfinite(target_h)):
        raise MeshFailure(f"target_h must be positive, got {target_h}")
    spec.validate()
    verts, segs = _pslg(spec, target_h)
    area = math.sqrt(3) / 4 * target_h**2
    for _ in range(max_tries):
        out = tr.triangulate({"vertices": verts, "segments": segs}, f"pq{MIN_ANGLE}a{area:.20f}Q")
        nodes, tris = out["vertices"], out["triangles"].astype(np.int64)
        # Triangle returns CCW triangles; enforce it regardless
        p = nodes[tris]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        flip = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        regions = _classify(spec, nodes[tris].mean(axis=1))
        be, bt = _boundary(nodes, tris, regions, spec)
        m = Mesh(nodes, tris, regions, be, bt, {"target_h": target_h})
        if m.h_mesh <= target_h * (1 + 1e-12):
            break
        area *= 0.7
    else:
        raise MeshFailure(f"could not reach element size {target_h:g} (got {m.h_mesh:g})")
    if m.min_angle < MIN_ANGLE - 1e-6:
        raise MeshFailure(f"minimum angle {m.min_angle:.2f} deg below {MIN_ANGLE} deg")
    n_inc = len(spec.inclusions)
    if sorted(m.inclusion_tags) != list(range(1, n_inc + 1)):
        raise MeshFailure("an inclusion received no triangles; refine target_h")
    return m
