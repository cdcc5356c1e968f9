"""Triangle mesh container, edge topology, boundary loops and the text file format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import MeshFailure, UnknownTag

OUTER = -1
GAMMA = -2
MESH_MAGIC = "platelab-mesh 1"


def tag_name(tag: int) -> str:
    if tag == OUTER:
        return "OUTER"
    if tag == GAMMA:
        return "GAMMA"
    if tag >= 1:
        return f"INC{tag}"
    raise UnknownTag(f"invalid boundary tag {tag}")


def parse_tag(name: str) -> int:
    if name == "OUTER":
        return OUTER
    if name == "GAMMA":
        return GAMMA
    if name.startswith("INC") and name[3:].isdigit() and int(name[3:]) >= 1:
        return int(name[3:])
    raise UnknownTag(f"unknown boundary tag {name!r}")


@dataclass(frozen=True, eq=False)
class BoundaryLoop:
    """Closed chain of tagged boundary edges with the matrix region on the left."""

    nodes: np.ndarray        # loop vertices in traversal order
    edges: np.ndarray        # indices into Mesh.boundary_edges, same order
    tags: np.ndarray


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation of the plate midplane.

    Region tag 0 is the matrix, ``k >= 1`` is inclusion ``k``.  Boundary edges
    carry ``OUTER``, ``GAMMA`` or the inclusion id and are oriented with the
    matrix on their left, so the outer loop runs counterclockwise and
    inclusion loops run clockwise.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, dt in (("nodes", float), ("triangles", np.int64), ("regions", np.int64),
                         ("boundary_edges", np.int64), ("boundary_tags", np.int64)):
            arr = np.array(getattr(self, name), dtype=dt)
            if name == "boundary_edges":
                arr = arr.reshape(-1, 2)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.areas <= 0).any():
            raise MeshFailure("mesh has triangles with non-positive area")

    # element geometry ------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    # edge topology ---------------------------------------------------------

    @cached_property
    def _edge_data(self):
        t = self.triangles
        # local edge i is opposite local vertex i
        loc = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        key = np.sort(loc, axis=1)
        edges, inv = np.unique(key, axis=0, return_inverse=True)
        return edges, inv.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges ``(a, b)`` with ``a < b``."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Global edge index of the edge opposite each local vertex."""
        return self._edge_data[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit normal of every global edge, ``(t_y, -t_x)`` for ``t = x_b - x_a``, ``a < b``."""
        e = self.edges
        t = self.nodes[e[:, 1]] - self.nodes[e[:, 0]]
        return np.c_[t[:, 1], -t[:, 0]] / self.edge_lengths[:, None]

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """``(n_edges, 2)`` adjacent triangles, ``-1`` where absent."""
        out = -np.ones((self.n_edges, 2), dtype=np.int64)
        te = self.triangle_edges.ravel()
        tri = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(te, kind="stable")
        te, tri = te[order], tri[order]
        first = np.r_[True, te[1:] != te[:-1]]
        out[te[first], 0] = tri[first]
        out[te[~first], 1] = tri[~first]
        return out

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        """Global edge index for node pairs (any orientation)."""
        pairs = np.sort(np.atleast_2d(pairs), axis=1)
        e = self.edges
        n = self.n_nodes
        keys = e[:, 0] * n + e[:, 1]
        q = pairs[:, 0] * n + pairs[:, 1]
        idx = np.searchsorted(keys, q)
        idx = np.clip(idx, 0, len(keys) - 1)
        if not (keys[idx] == q).all():
            raise MeshFailure("node pair is not a mesh edge")
        return idx

    @cached_property
    def h_mesh(self) -> float:
        return float(self.edge_lengths.max())

    @cached_property
    def min_angle(self) -> float:
        p = self.nodes[self.triangles]
        ang = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = (a * b).sum(1) / np.linalg.norm(a, axis=1) / np.linalg.norm(b, axis=1)
            ang.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
        return float(np.min(ang))

    # tags ------------------------------------------------------------------

    @property
    def inclusion_tags(self) -> list[int]:
        return sorted(int(t) for t in np.unique(self.regions) if t >= 1)

    def require_region(self, tag: int) -> np.ndarray:
        mask = self.regions == tag
        if not mask.any():
            raise UnknownTag(f"no triangles carry region tag {tag}")
        return mask

    def tagged_edges(self, tag: int | tuple) -> np.ndarray:
        tags = (tag,) if np.isscalar(tag) else tuple(tag)
        return np.flatnonzero(np.isin(self.boundary_tags, tags))

    def outer_edge_ids(self) -> np.ndarray:
        """Boundary edges on the outer curve, in counterclockwise loop order."""
        return self.outer_loop.edges

    @cached_property
    def loops(self) -> list[BoundaryLoop]:
        be = self.boundary_edges
        if len(be) == 0:
            return []
        nxt = {}
        for i, (a, _) in enumerate(be):
            if int(a) in nxt:
                raise MeshFailure("boundary edges do not form simple loops")
            nxt[int(a)] = i
        seen = np.zeros(len(be), dtype=bool)
        loops = []
        # start each loop at its smallest node index for a canonical origin
        while not seen.all():
            cand = np.flatnonzero(~seen)
            start = cand[np.argmin(be[cand, 0])]
            ids = []
            i = start
            while not seen[i]:
                seen[i] = True
                ids.append(i)
                j = nxt.get(int(be[i, 1]))
                if j is None:
                    raise MeshFailure("open boundary chain")
                i = j
            if i != start:
                raise MeshFailure("boundary chain does not close")
            ids = np.array(ids)
            loops.append(BoundaryLoop(be[ids, 0].copy(), ids, self.boundary_tags[ids].copy()))
        return loops

    @cached_property
    def outer_loop(self) -> BoundaryLoop:
        for lp in self.loops:
            if (lp.tags < 0).all():
                return lp
        raise MeshFailure("mesh has no outer boundary loop")

    def inclusion_loop(self, tag: int) -> BoundaryLoop:
        for lp in self.loops:
            if (lp.tags == tag).all():
                return lp
        raise UnknownTag(f"no boundary loop for inclusion {tag}")

    def loop_arclength(self, loop: BoundaryLoop) -> np.ndarray:
        """Arclength at the start node of each loop edge, starting from 0."""
        be = self.boundary_edges[loop.edges]
        ln = np.linalg.norm(self.nodes[be[:, 1]] - self.nodes[be[:, 0]], axis=1)
        return np.concatenate([[0.0], np.cumsum(ln)[:-1]]), float(ln.sum())

    def loop_polygon(self, loop: BoundaryLoop) -> np.ndarray:
        return self.nodes[loop.nodes]

    def boundary_edge_triangle(self) -> np.ndarray:
        """For every tagged boundary edge, the adjacent matrix-side triangle."""
        gid = self.edge_index(self.boundary_edges)
        adj = self.edge_triangles[gid]
        out = np.empty(len(gid), dtype=np.int64)
        for i, (t0, t1) in enumerate(adj):
            if t1 < 0:
                out[i] = t0
            else:
                out[i] = t0 if self.regions[t0] == 0 else t1
        return out

    def stats(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_triangles": self.n_triangles,
            "n_edges": self.n_edges,
            "h_mesh": self.h_mesh,
            "min_angle": self.min_angle,
        }

    # modification ----------------------------------------------------------

    def transformed(self, matrix: np.ndarray, shift=(0.0, 0.0)) -> "Mesh":
        """Image under ``x -> A x + b`` (``A`` must preserve orientation)."""
        a = np.asarray(matrix, dtype=float)
        if np.linalg.det(a) <= 0:
            raise ValueError("transformation must preserve orientation")
        return Mesh(self.nodes @ a.T + np.asarray(shift), self.triangles, self.regions,
                    self.boundary_edges, self.boundary_tags, dict(self.meta))


def refine_uniform(m: Mesh, levels: int = 1) -> Mesh:
    """Split every triangle into four through its edge midpoints."""
    for _ in range(levels):
        ne = m.n_edges
        mid = 0.5 * (m.nodes[m.edges[:, 0]] + m.nodes[m.edges[:, 1]])
        nodes = np.vstack([m.nodes, mid])
        t = m.triangles
        e = m.triangle_edges + m.n_nodes
        # e[:, i] is the midpoint opposite vertex i
        tris = np.concatenate([
            np.c_[t[:, 0], e[:, 2], e[:, 1]],
            np.c_[e[:, 2], t[:, 1], e[:, 0]],
            np.c_[e[:, 1], e[:, 0], t[:, 2]],
            np.c_[e[:, 0], e[:, 1], e[:, 2]],
        ])
        regions = np.tile(m.regions, 4)
        be = m.boundary_edges
        mids = m.edge_index(be) + m.n_nodes if len(be) else np.empty(0, dtype=np.int64)
        bnew = np.empty((2 * len(be), 2), dtype=np.int64)
        bnew[0::2] = np.c_[be[:, 0], mids]
        bnew[1::2] = np.c_[mids, be[:, 1]]
        tags = np.repeat(m.boundary_tags, 2)
        meta = dict(m.meta)
        meta["refinements"] = meta.get("refinements", 0) + 1
        m = Mesh(nodes, tris, regions, bnew, tags, meta)
        assert m.n_edges == 2 * ne + 3 * (len(t))
    return m


# file format ---------------------------------------------------------------


def format_mesh(m: Mesh) -> str:
    lines = [MESH_MAGIC, f"nodes {m.n_nodes}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in m.nodes]
    lines.append(f"triangles {m.n_triangles}")
    lines += [f"{i} {j} {k} {r}" for (i, j, k), r in zip(m.triangles, m.regions)]
    lines.append(f"boundary_edges {len(m.boundary_edges)}")
    lines += [f"{i} {j} {tag_name(int(t))}" for (i, j), t in zip(m.boundary_edges, m.boundary_tags)]
    return "\n".join(lines) + "\n"


def write_mesh(m: Mesh, path: str | os.PathLike) -> None:
    from ..io import atomic_write_text

    atomic_write_text(path, format_mesh(m))


def parse_mesh(text: str) -> Mesh:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MESH_MAGIC:
        raise MeshFailure("not a platelab mesh file (bad header)")
    pos = 1

    def section(name):
        nonlocal pos
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFailure(f"expected '{name} <count>' at line {pos + 1}")
        n = int(parts[1])
        body = lines[pos + 1:pos + 1 + n]
        if len(body) != n:
            raise MeshFailure(f"section {name} is truncated")
        pos += 1 + n
        return [ln.split() for ln in body]

    try:
        nodes = np.array(section("nodes"), dtype=float).reshape(-1, 2)
        tri = np.array(section("triangles"), dtype=np.int64).reshape(-1, 4)
        rows = section("boundary_edges")
    except (ValueError, IndexError) as exc:
        raise MeshFailure(f"malformed mesh file: {exc}") from None
    be = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
    tags = np.array([parse_tag(r[2]) for r in rows], dtype=np.int64)
    if tri.size and (tri[:, :3].max() >= len(nodes) or tri[:, :3].min() < 0):
        raise MeshFailure("triangle references a missing node")
    return Mesh(nodes, tri[:, :3], tri[:, 3], be, tags)


def read_mesh(path: str | os.PathLike) -> Mesh:
    return parse_mesh(Path(path).read_text(encoding="utf-8"))
