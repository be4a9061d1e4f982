"""Independent reference implementations used by the tests.

Nothing here imports the package: index orders are written out literally and
the linear elastodynamics matrices are built from hand-derived element
formulas, so agreement with the package is a genuine cross-check.
"""

from __future__ import annotations

import numpy as np

# gradient-vector pair orders, 0-based, read off the rows of the 3D gradient operator
GRAD_PAIRS = {
    1: [(0, 0)],
    2: [(0, 0), (1, 1), (0, 1), (1, 0)],
    3: [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0), (0, 2), (1, 0), (2, 1)],
}
SYM_PAIRS = {d: GRAD_PAIRS[d][: d * (d + 1) // 2] for d in (1, 2, 3)}


def gradvec(G: np.ndarray) -> np.ndarray:
    d = G.shape[0]
    return np.array([G[i, j] for i, j in GRAD_PAIRS[d]])


def stress_voigt(S: np.ndarray) -> np.ndarray:
    d = S.shape[0]
    return np.array([S[i, j] for i, j in SYM_PAIRS[d]])


def strain_voigt(E: np.ndarray) -> np.ndarray:
    d = E.shape[0]
    return np.array([E[i, j] if i == j else 2.0 * E[i, j] for i, j in SYM_PAIRS[d]])


def product_loop(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix product by explicit index loops."""
    n, k = A.shape
    m = B.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for a in range(k):
                s += A[i, a] * B[a, j]
            out[i, j] = s
    return out


def fs_gradvec(F: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``gradvec(F S)`` by loops."""
    return gradvec(product_loop(F, S))


def sym_ftg_strain(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``strain_voigt(sym(F^T G))`` by loops."""
    A = product_loop(F.T, G)
    return strain_voigt(0.5 * (A + A.T))


def traction_loop(G: np.ndarray, N: np.ndarray) -> np.ndarray:
    return product_loop(G, N.reshape(-1, 1)).ravel()


def random_rotation_2d(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotation ``R(theta)`` and its derivative for unit angular rate."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]]), np.array([[-s, -c], [c, -s]])


# ----------------------------------------------------------------------------
# linear elastodynamics on P1 triangles (CG1 velocity, DG1 stress)
# ----------------------------------------------------------------------------


def _p1_gradients(xy: np.ndarray) -> tuple[np.ndarray, float]:
    """Constant gradients of the three barycentric functions and the area."""
    (x1, y1), (x2, y2), (x3, y3) = xy
    two_area = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    b = np.array([y2 - y3, y3 - y1, y1 - y2]) / two_area
    c = np.array([x3 - x2, x1 - x3, x2 - x1]) / two_area
    return np.column_stack([b, c]), 0.5 * two_area


def _strain_b(grad: np.ndarray) -> np.ndarray:
    """3x2 strain-displacement block of one node: rows eps11, eps22, 2 eps12."""
    gx, gy = grad
    return np.array([[gx, 0.0], [0.0, gy], [gy, gx]])


def _stress_tensor(s: np.ndarray) -> np.ndarray:
    return np.array([[s[0], s[2]], [s[2], s[1]]])


def linear_k_triangles(nodes, cells, n_stress_per_cell=3):
    """``int eps(phi)^T psi`` with CG1 vector velocity and DG1 Voigt stress.

    Velocity dof of (node, comp) is ``2 node + comp``; stress dof of
    (cell, local vertex, comp) is ``3 (3 cell + a) + comp``.
    """
    n_v = 2 * len(nodes)
    n_S = 3 * n_stress_per_cell * len(cells)
    K = np.zeros((n_v, n_S))
    for e, tri in enumerate(cells):
        grads, area = _p1_gradients(nodes[tri])
        for b, node in enumerate(tri):
            B = _strain_b(grads[b])
            for a in range(3):
                # integral of the barycentric function over the triangle
                w = area / 3.0
                for comp in range(3):
                    col = 3 * (3 * e + a) + comp
                    K[2 * node : 2 * node + 2, col] += w * B[comp, :]
    return K


def linear_boundary_triangles(nodes, cells, facets, facet_cells, normals, n_v, n_S):
    """``-int_{Sigma_D} phi . (sigma(psi) N)`` and the uniform-input ``G_nu``."""
    Kb = np.zeros((n_v, n_S))
    Gnu = np.zeros((n_S, 2))
    for (p, q), e, N in zip(facets, facet_cells, normals):
        tri = list(cells[e])
        length = np.linalg.norm(nodes[q] - nodes[p])
        for a_node in (p, q):
            a = tri.index(a_node)
            for comp in range(3):
                s = np.zeros(3)
                s[comp] = 1.0
                t = _stress_tensor(s) @ N
                col = 3 * (3 * e + a) + comp
                Gnu[col] += t * length / 2.0
                for b_node in (p, q):
                    mass = length / 3.0 if a_node == b_node else length / 6.0
                    Kb[2 * b_node : 2 * b_node + 2, col] -= mass * t
    return Kb, Gnu


# ----------------------------------------------------------------------------
# linear rod with quadratic velocity and quadratic stress
# ----------------------------------------------------------------------------


def _lagrange_poly(nodes_x: np.ndarray, k: int) -> np.polynomial.Polynomial:
    P = np.polynomial.Polynomial([1.0])
    for j, xj in enumerate(nodes_x):
        if j != k:
            P = P * np.polynomial.Polynomial([-xj, 1.0]) / (nodes_x[k] - xj)
    return P


def linear_k_rod_p2(length: float, n: int) -> np.ndarray:
    """``int phi' psi`` for CG2 velocity and DG2 stress on ``n`` equal cells.

    CG2 numbering: vertices first, then the midpoint of cell ``e`` as
    ``n + 1 + e``.  DG2 local order: left end, right end, midpoint.
    """
    n_v = 2 * n + 1
    K = np.zeros((n_v, 3 * n))
    # on s = (X - x0) / h the integrand d/dX phi * psi dX is d/ds phi * psi ds
    xs = np.array([0.0, 1.0, 0.5])
    local = np.zeros((3, 3))
    for b in range(3):
        dphi = _lagrange_poly(xs, b).deriv()
        for a in range(3):
            integral = (dphi * _lagrange_poly(xs, a)).integ()
            local[b, a] = integral(1.0) - integral(0.0)
    for e in range(n):
        vdofs = [e, e + 1, n + 1 + e]
        K[vdofs, 3 * e : 3 * e + 3] += local
    # Dirichlet end X = 0 with normal -1: -phi(0) * (-1) * psi(0)
    K[0, 0] += 1.0
    return K
