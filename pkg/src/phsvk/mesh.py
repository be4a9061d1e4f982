"""Structured meshes of intervals and rectangles with tagged boundary facets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = ["BoundaryTag", "Mesh", "interval_mesh", "rect_tri_mesh", "facet_geometry"]


class BoundaryTag(enum.IntEnum):
    DIRICHLET = 0
    NEUMANN_LOADED = 1
    NEUMANN_FREE = 2


# local facets of the reference cells, as local vertex indices
_LOCAL_FACETS = {
    1: ((0,), (1,)),
    2: ((1, 2), (2, 0), (0, 1)),
}


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh with boundary facet records.

    Attributes:
        nodes: ``(n_nodes, d)`` coordinates.
        cells: ``(n_cells, d + 1)`` vertex indices, counterclockwise for triangles.
        facet_nodes: ``(n_facets, d)`` vertex indices of each boundary facet.
        facet_cells: owning cell of each boundary facet.
        facet_local: local facet number inside the owning cell.
        facet_normals: ``(n_facets, d)`` unit outward normals.
        facet_tags: :class:`BoundaryTag` value of each boundary facet.
    """

    nodes: np.ndarray
    cells: np.ndarray
    facet_nodes: np.ndarray
    facet_cells: np.ndarray
    facet_local: np.ndarray
    facet_normals: np.ndarray
    facet_tags: np.ndarray
    _edges: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facet_nodes.shape[0]

    def jacobians(self) -> np.ndarray:
        """Affine reference-to-physical Jacobians, ``(n_cells, d, d)``."""
        x = self.nodes[self.cells]
        return np.swapaxes(x[:, 1:, :] - x[:, :1, :], 1, 2)

    def cell_measures(self) -> np.ndarray:
        det = np.linalg.det(self.jacobians())
        return det if self.dim == 1 else det / 2.0

    def centroids(self) -> np.ndarray:
        return self.nodes[self.cells].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique edges ``(n_edges, 2)`` of a triangle mesh, sorted by first appearance."""
        if self.dim != 2:
            raise ValueError("edges are only defined for triangle meshes")
        return self._edges

    def cell_edges(self) -> np.ndarray:
        """Edge index of local facet ``k`` of each triangle, ``(n_cells, 3)``."""
        edges = self.edges()
        lookup = {tuple(e): n for n, e in enumerate(edges)}
        out = np.empty((self.n_cells, 3), dtype=np.intp)
        for c, tri in enumerate(self.cells):
            for k, (a, b) in enumerate(_LOCAL_FACETS[2]):
                out[c, k] = lookup[tuple(sorted((tri[a], tri[b])))]
        return out

    def facets_with_tag(self, *tags: BoundaryTag) -> np.ndarray:
        return np.flatnonzero(np.isin(self.facet_tags, [int(t) for t in tags]))

    def facet_measures(self) -> np.ndarray:
        if self.dim == 1:
            return np.ones(self.n_facets)
        x = self.nodes[self.facet_nodes]
        return np.linalg.norm(x[:, 1] - x[:, 0], axis=1)

    def boundary_measure(self, *tags: BoundaryTag) -> float:
        idx = self.facets_with_tag(*tags) if tags else np.arange(self.n_facets)
        return float(self.facet_measures()[idx].sum())


def facet_geometry(mesh: Mesh, facet: int) -> tuple[float, np.ndarray]:
    """Measure and outward unit normal of boundary facet number ``facet``.

    Only boundary facets are stored on a :class:`Mesh`; any index outside the
    boundary facet list is rejected.
    """
    if not 0 <= facet < mesh.n_facets:
        raise IndexError(f"{facet} is not a boundary facet index (mesh has {mesh.n_facets})")
    return float(mesh.facet_measures()[facet]), mesh.facet_normals[facet].copy()


def _check_positive(**values) -> None:
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")


def interval_mesh(length: float, n: int) -> Mesh:
    """Equidistant mesh of ``[0, length]`` with ``n`` cells.

    The left end is tagged Dirichlet and the right end as loaded Neumann.
    """
    _check_positive(length=length, n=n)
    n = int(n)
    nodes = np.linspace(0.0, length, n + 1).reshape(-1, 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(
        nodes=nodes,
        cells=cells,
        facet_nodes=np.array([[0], [n]]),
        facet_cells=np.array([0, n - 1]),
        facet_local=np.array([0, 1]),
        facet_normals=np.array([[-1.0], [1.0]]),
        facet_tags=np.array([BoundaryTag.DIRICHLET, BoundaryTag.NEUMANN_LOADED]),
    )


def rect_tri_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Structured triangulation of ``[0, lx] x [0, ly]``.

    Every grid rectangle is split along its lower-left to upper-right
    diagonal.  Boundary edges on ``x = 0`` are Dirichlet, on ``x = lx`` loaded
    Neumann, and on ``y = 0`` / ``y = ly`` traction free.
    """
    _check_positive(lx=lx, ly=ly, nx=nx, ny=ny)
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    cells = np.array(cells, dtype=np.intp)

    # edges in order of first appearance; boundary edges appear exactly once
    edge_index: dict[tuple[int, int], int] = {}
    owners: list[list[tuple[int, int]]] = []
    for ci, tri in enumerate(cells):
        for k, (p, q) in enumerate(_LOCAL_FACETS[2]):
            key = tuple(sorted((int(tri[p]), int(tri[q]))))
            if key not in edge_index:
                edge_index[key] = len(owners)
                owners.append([])
            owners[edge_index[key]].append((ci, k))
    edges = np.array(list(edge_index), dtype=np.intp)

    tol = 1e-10 * max(lx, ly)
    f_nodes, f_cells, f_local, f_normals, f_tags = [], [], [], [], []
    for e, own in enumerate(owners):
        if len(own) != 1:
            continue
        ci, k = own[0]
        tri = cells[ci]
        p, q = _LOCAL_FACETS[2][k]
        n0, n1 = int(tri[p]), int(tri[q])
        t = nodes[n1] - nodes[n0]
        # counterclockwise cells: outward normal is the tangent rotated clockwise
        normal = np.array([t[1], -t[0]]) / np.linalg.norm(t)
        mid = 0.5 * (nodes[n0] + nodes[n1])
        if abs(mid[0]) <= tol:
            tag = BoundaryTag.DIRICHLET
        elif abs(mid[0] - lx) <= tol:
            tag = BoundaryTag.NEUMANN_LOADED
        elif abs(mid[1]) <= tol or abs(mid[1] - ly) <= tol:
            tag = BoundaryTag.NEUMANN_FREE
        else:  # pragma: no cover - structured grid has no other boundary
            raise RuntimeError(f"untaggable boundary edge at {mid}")
        f_nodes.append((n0, n1))
        f_cells.append(ci)
        f_local.append(k)
        f_normals.append(normal)
        f_tags.append(tag)

    return Mesh(
        nodes=nodes,
        cells=cells,
        facet_nodes=np.array(f_nodes, dtype=np.intp),
        facet_cells=np.array(f_cells, dtype=np.intp),
        facet_local=np.array(f_local, dtype=np.intp),
        facet_normals=np.array(f_normals),
        facet_tags=np.array(f_tags, dtype=np.intp),
        _edges=edges,
    )
