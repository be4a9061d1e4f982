"""Lagrange bases, quadrature rules and dof maps on intervals and triangles.

Reference cells are ``[0, 1]`` and the triangle with vertices ``(0, 0)``,
``(1, 0)``, ``(0, 1)``.  Vector-valued spaces store their dofs
component-minor: global dof ``= scalar_dof * components + component``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .mesh import BoundaryTag, Mesh, _LOCAL_FACETS

__all__ = [
    "QuadratureRule",
    "PointLocationError",
    "lagrange_points",
    "shape_functions",
    "quadrature",
    "facet_to_cell_points",
    "BasisSpec",
    "FunctionSpace",
    "build_space",
    "interpolate",
    "evaluate",
]

MAX_QUADRATURE_DEGREE = 6


class PointLocationError(ValueError):
    """Raised when a point lies outside every cell of a mesh."""


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, d) reference coordinates
    weights: np.ndarray  # (n,)
    degree: int


def _reference_vertices(dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[0.0], [1.0]])
    if dim == 2:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    raise ValueError(f"no reference cell for dimension {dim}")


@lru_cache(maxsize=None)
def lagrange_points(dim: int, degree: int) -> np.ndarray:
    """Reference nodes of the Lagrange element.

    Interval P2 is ordered ``(0, 1, 1/2)``; triangle P2 lists the vertices and
    then the midpoints of local facets 0, 1, 2 (facet ``k`` is opposite
    vertex ``k``).
    """
    verts = _reference_vertices(dim)
    if degree == 0:
        return verts.mean(axis=0, keepdims=True)
    if degree == 1:
        return verts
    if degree == 2:
        mids = [0.5 * (verts[a] + verts[b]) for a, b in _facet_vertex_pairs(dim)]
        return np.vstack([verts] + mids)
    raise ValueError(f"unsupported Lagrange degree {degree}")


def _facet_vertex_pairs(dim: int):
    # edges carrying a P2 midpoint: the single cell for intervals, facets for triangles
    return [(0, 1)] if dim == 1 else _LOCAL_FACETS[2]


def _exponents(dim: int, degree: int) -> list[tuple[int, ...]]:
    if dim == 1:
        return [(k,) for k in range(degree + 1)]
    return [(a, t - a) for t in range(degree + 1) for a in range(t, -1, -1)]


def _monomials(points: np.ndarray, exps) -> tuple[np.ndarray, np.ndarray]:
    """Monomial values ``(n, k)`` and gradients ``(n, k, d)`` at points."""
    n, d = points.shape
    vals = np.ones((n, len(exps)))
    grads = np.zeros((n, len(exps), d))
    for k, e in enumerate(exps):
        for a in range(d):
            vals[:, k] *= points[:, a] ** e[a]
        for b in range(d):
            if e[b] == 0:
                continue
            g = e[b] * points[:, b] ** (e[b] - 1)
            for a in range(d):
                if a != b:
                    g = g * points[:, a] ** e[a]
            grads[:, k, b] = g
    return vals, grads


@lru_cache(maxsize=None)
def _lagrange_coefficients(dim: int, degree: int) -> np.ndarray:
    exps = _exponents(dim, degree)
    V, _ = _monomials(lagrange_points(dim, degree), exps)
    return np.linalg.inv(V)


def shape_functions(dim: int, degree: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange basis values ``(n, n_loc)`` and reference gradients ``(n, n_loc, d)``."""
    if dim not in (1, 2):
        raise ValueError(f"unsupported cell dimension {dim}")
    if degree not in (0, 1, 2):
        raise ValueError(f"unsupported Lagrange degree {degree}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != dim:
        points = points.reshape(-1, dim)
    C = _lagrange_coefficients(dim, degree)
    vals, grads = _monomials(points, _exponents(dim, degree))
    return vals @ C, np.einsum("nkd,kl->nld", grads, C)


@lru_cache(maxsize=None)
def _gauss_interval(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def quadrature(dim: int, degree: int) -> QuadratureRule:
    """Quadrature rule on the reference cell exact for polynomials of ``degree``.

    Intervals use Gauss-Legendre.  Triangles use the centroid rule (degree 1),
    the 3-point interior rule (degree 2) and collapsed Gauss-Jacobi rules
    above that.  All weights are positive.
    """
    if not 0 <= degree <= MAX_QUADRATURE_DEGREE:
        raise ValueError(f"quadrature degree must be in [0, {MAX_QUADRATURE_DEGREE}], got {degree}")
    if dim == 1:
        n = max(1, (degree + 2) // 2)
        x, w = _gauss_interval(n)
        return QuadratureRule(x.reshape(-1, 1), w, degree)
    if dim != 2:
        raise ValueError(f"unsupported cell dimension {dim}")
    if degree <= 1:
        return QuadratureRule(np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]), degree)
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return QuadratureRule(pts, np.full(3, 1 / 6), degree)
    n = (degree + 2) // 2
    # Duffy map x = s (1 - t), y = t; the (1 - t) Jacobian is absorbed into Gauss-Jacobi
    s, ws = _gauss_interval(n)
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    t = 0.5 * (tj + 1.0)
    wt = wj / 4.0
    S, Tt = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([(S * (1.0 - Tt)).ravel(), Tt.ravel()])
    return QuadratureRule(pts, W.ravel(), degree)


def facet_to_cell_points(dim: int, local_facet: int, facet_points) -> np.ndarray:
    """Map facet reference coordinates to reference coordinates of the cell.

    For intervals the facet is a vertex and ``facet_points`` only sets the
    number of returned copies.
    """
    verts = _reference_vertices(dim)
    facet_points = np.asarray(facet_points, dtype=float).reshape(-1)
    if dim == 1:
        return np.repeat(verts[local_facet][None, :], max(1, facet_points.size), axis=0)
    a, b = _LOCAL_FACETS[2][local_facet]
    return verts[a] + facet_points[:, None] * (verts[b] - verts[a])


@dataclass(frozen=True)
class BasisSpec:
    family: str  # "CG" or "DG"
    degree: int
    components: int = 1

    def __post_init__(self):
        if self.family not in ("CG", "DG"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.degree not in (0, 1, 2):
            raise ValueError(f"unsupported degree {self.degree}")
        if self.family == "CG" and self.degree < 1:
            raise ValueError("continuous spaces need degree >= 1")
        if self.components < 1:
            raise ValueError("components must be >= 1")


class FunctionSpace:
    """Scalar or vector Lagrange space on a mesh.

    Attributes:
        cell_scalar_dofs: ``(n_cells, n_loc)`` scalar dof map.
        cell_dofs: ``(n_cells, n_loc * components)`` vector dof map.
        scalar_coords: ``(n_scalar, d)`` physical node of each scalar dof.
    """

    def __init__(self, mesh: Mesh, spec: BasisSpec):
        self.mesh = mesh
        self.spec = spec
        d = mesh.dim
        nc = mesh.n_cells
        self.n_local = lagrange_points(d, spec.degree).shape[0]
        if spec.family == "DG":
            self.cell_scalar_dofs = np.arange(nc * self.n_local).reshape(nc, self.n_local)
        elif spec.degree == 1:
            self.cell_scalar_dofs = mesh.cells.copy()
        else:
            nv = mesh.n_nodes
            if d == 1:
                extra = nv + np.arange(nc)[:, None]
            else:
                extra = nv + mesh.cell_edges()
            self.cell_scalar_dofs = np.hstack([mesh.cells, extra])
        self.n_scalar = int(self.cell_scalar_dofs.max()) + 1
        k = spec.components
        self.cell_dofs = (self.cell_scalar_dofs[:, :, None] * k + np.arange(k)).reshape(nc, -1)

        ref = lagrange_points(d, spec.degree)
        x0 = mesh.nodes[mesh.cells[:, 0]]
        phys = x0[:, None, :] + np.einsum("cij,nj->cni", mesh.jacobians(), ref)
        self.scalar_coords = np.empty((self.n_scalar, d))
        self.scalar_coords[self.cell_scalar_dofs.ravel()] = phys.reshape(-1, d)

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def degree(self) -> int:
        return self.spec.degree

    @property
    def components(self) -> int:
        return self.spec.components

    @property
    def dim(self) -> int:
        return self.spec.components * self.n_scalar

    def __repr__(self):
        s = self.spec
        return f"FunctionSpace({s.family}{s.degree}, components={s.components}, dofs={self.dim})"

    def tabulate(self, ref_points) -> tuple[np.ndarray, np.ndarray]:
        return shape_functions(self.mesh.dim, self.degree, ref_points)

    def facet_local_dofs(self, local_facet: int) -> np.ndarray:
        """Local scalar dofs whose nodes lie on a local facet (nonzero trace)."""
        ref = lagrange_points(self.mesh.dim, self.degree)
        if self.degree == 0:
            return np.arange(self.n_local)
        verts = _reference_vertices(self.mesh.dim)
        if self.mesh.dim == 1:
            on = np.isclose(ref[:, 0], verts[local_facet, 0])
        else:
            a, b = _LOCAL_FACETS[2][local_facet]
            t = verts[b] - verts[a]
            rel = ref - verts[a]
            on = np.isclose(rel[:, 0] * t[1] - rel[:, 1] * t[0], 0.0)
        return np.flatnonzero(on)

    def boundary_dofs(self, *tags: BoundaryTag) -> np.ndarray:
        """Sorted vector dofs with nonzero trace on facets carrying ``tags``."""
        mesh = self.mesh
        dofs = set()
        for f in mesh.facets_with_tag(*tags):
            c, k = mesh.facet_cells[f], mesh.facet_local[f]
            loc = self.facet_local_dofs(int(k))
            for a in loc:
                s = self.cell_scalar_dofs[c, a]
                dofs.update(range(s * self.components, (s + 1) * self.components))
        return np.array(sorted(dofs), dtype=np.intp)

    def locate(self, X, tol: float = 1e-10) -> tuple[int, np.ndarray]:
        """Owning cell and reference coordinates of a physical point."""
        mesh = self.mesh
        X = np.asarray(X, dtype=float).reshape(mesh.dim)
        x0 = mesh.nodes[mesh.cells[:, 0]]
        xi = np.einsum("cij,cj->ci", np.linalg.inv(mesh.jacobians()), X - x0)
        inside = np.all(xi >= -tol, axis=1) & (xi.sum(axis=1) <= 1.0 + tol)
        hits = np.flatnonzero(inside)
        if hits.size == 0:
            raise PointLocationError(f"point {X.tolist()} is outside the mesh")
        c = int(hits[0])
        return c, xi[c]

    def point_evaluator(self, X, cell: int | None = None) -> sp.csr_matrix:
        """Sparse ``(components, dim)`` matrix ``E`` with ``E @ coeffs`` = field value at ``X``."""
        if cell is None:
            cell, xi = self.locate(X)
        else:
            mesh = self.mesh
            x0 = mesh.nodes[mesh.cells[cell, 0]]
            xi = np.linalg.solve(mesh.jacobians()[cell], np.asarray(X, float).reshape(-1) - x0)
        vals, _ = self.tabulate(xi[None, :])
        k = self.components
        rows = np.tile(np.arange(k), self.n_local)
        cols = self.cell_dofs[cell]
        data = np.repeat(vals[0], k)
        return sp.csr_matrix((data, (rows, cols)), shape=(k, self.dim))


def build_space(mesh: Mesh, spec: BasisSpec) -> FunctionSpace:
    return FunctionSpace(mesh, spec)


def interpolate(space: FunctionSpace, f: Callable[[np.ndarray], np.ndarray] | float | np.ndarray) -> np.ndarray:
    """Nodal interpolant of ``f``.

    ``f`` is either a constant (scalar or per-component vector) or a callable
    taking ``(n, d)`` points and returning values broadcastable to
    ``(n, components)``.
    """
    pts = space.scalar_coords
    k = space.components
    n = pts.shape[0]
    vals = np.asarray(f(pts) if callable(f) else f, dtype=float)
    if vals.ndim == 1 and vals.size == n and k == 1:
        vals = vals[:, None]
    return np.broadcast_to(vals, (n, k)).reshape(-1).copy()


def evaluate(space: FunctionSpace, coeffs, X, cell: int | None = None) -> np.ndarray:
    """Field value (length ``components``) at physical point ``X``."""
    return space.point_evaluator(X, cell) @ np.asarray(coeffs, dtype=float)
