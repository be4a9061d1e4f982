"""Tensor algebra in vector (Voigt) notation for d = 1, 2, 3.

Conventions used throughout the package:

* Full second order tensors (deformation gradient, velocity gradient) are
  stored as ``q = d*d`` vectors.  The component order follows the rows of the
  gradient operator ``D``; for ``d = 3`` it is
  ``11, 22, 33, 12, 23, 31, 13, 21, 32``.
* Symmetric stresses are stored as ``m = d*(d+1)/2`` vectors holding every
  distinct component once, in the order of the first ``m`` gradient pairs.
* Symmetric strains use the same order with doubled (engineering) shear
  entries, so that ``S:E == stress_to_voigt(S) @ strain_to_voigt(E)``.

All functions accept batches: leading axes are carried through unchanged.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np

__all__ = [
    "ElasticityError",
    "InvertedElementWarning",
    "check_dim",
    "sym_size",
    "grad_size",
    "index_order",
    "sym_order",
    "grad_to_vec",
    "vec_to_grad",
    "stress_to_voigt",
    "voigt_to_stress",
    "strain_to_voigt",
    "voigt_to_strain",
    "green_strain",
    "strain_rate",
    "f_matrix",
    "f_matrix_tensor",
    "stress_action",
    "transpose_action",
    "normal_matrix",
    "elasticity_voigt",
    "rod_stiffness",
]


class ElasticityError(ValueError):
    """Raised for elasticity parameters that do not give a positive definite matrix."""


class InvertedElementWarning(RuntimeWarning):
    """Deformation gradient with non-positive determinant."""


_ORDER_3D = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0), (0, 2), (1, 0), (2, 1))


def check_dim(d: int) -> int:
    if d not in (1, 2, 3):
        raise ValueError(f"spatial dimension must be 1, 2 or 3, got {d!r}")
    return d


def sym_size(d: int) -> int:
    return check_dim(d) * (d + 1) // 2


def grad_size(d: int) -> int:
    return check_dim(d) ** 2


@lru_cache(maxsize=None)
def index_order(d: int) -> tuple[tuple[int, int], ...]:
    """Zero-based ``(i, j)`` pairs of the gradient vector, in storage order.

    The lower-dimensional orders are the ``d = 3`` order restricted to
    indices smaller than ``d``.
    """
    check_dim(d)
    return tuple((i, j) for i, j in _ORDER_3D if i < d and j < d)


def sym_order(d: int) -> tuple[tuple[int, int], ...]:
    """Pairs of the symmetric (Voigt) vector: the first ``m`` gradient pairs."""
    return index_order(d)[: sym_size(d)]


@lru_cache(maxsize=None)
def _index_arrays(d: int, symmetric: bool) -> tuple[np.ndarray, np.ndarray]:
    pairs = sym_order(d) if symmetric else index_order(d)
    rows = np.array([p[0] for p in pairs], dtype=np.intp)
    cols = np.array([p[1] for p in pairs], dtype=np.intp)
    return rows, cols


def _dim_of_matrix(A: np.ndarray) -> int:
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected (..., d, d) array, got shape {A.shape}")
    return check_dim(A.shape[-1])


def _dim_of_vector(n: int, symmetric: bool) -> int:
    table = {1: 1, 3: 2, 6: 3} if symmetric else {1: 1, 4: 2, 9: 3}
    try:
        return table[n]
    except KeyError:
        kind = "Voigt" if symmetric else "gradient"
        raise ValueError(f"invalid {kind} vector length {n}") from None


def grad_to_vec(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    r, c = _index_arrays(_dim_of_matrix(G), False)
    return G[..., r, c]


def vec_to_grad(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    d = _dim_of_vector(g.shape[-1], False)
    r, c = _index_arrays(d, False)
    G = np.zeros(g.shape[:-1] + (d, d))
    G[..., r, c] = g
    return G


def stress_to_voigt(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    r, c = _index_arrays(_dim_of_matrix(S), True)
    return S[..., r, c]


def voigt_to_stress(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    d = _dim_of_vector(s.shape[-1], True)
    r, c = _index_arrays(d, True)
    S = np.zeros(s.shape[:-1] + (d, d))
    S[..., r, c] = s
    S[..., c, r] = s
    return S


def strain_to_voigt(E) -> np.ndarray:
    """Symmetric part of ``E`` in Voigt form with engineering shear."""
    E = np.asarray(E, dtype=float)
    d = _dim_of_matrix(E)
    r, c = _index_arrays(d, True)
    return np.where(r == c, 1.0, 2.0) * 0.5 * (E[..., r, c] + E[..., c, r])


def voigt_to_strain(e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    d = _dim_of_vector(e.shape[-1], True)
    r, c = _index_arrays(d, True)
    half = np.where(r == c, 1.0, 0.5) * e
    E = np.zeros(e.shape[:-1] + (d, d))
    E[..., r, c] = half
    E[..., c, r] = half
    return E


def green_strain(F) -> np.ndarray:
    """Green strain ``(F^T F - I) / 2``; warns on non-positive ``det F``."""
    F = np.asarray(F, dtype=float)
    d = _dim_of_matrix(F)
    if np.any(np.linalg.det(F) <= 0.0):
        warnings.warn("deformation gradient with det F <= 0", InvertedElementWarning, stacklevel=2)
    C = np.swapaxes(F, -1, -2) @ F
    E = 0.5 * (C - np.eye(d))
    return 0.5 * (E + np.swapaxes(E, -1, -2))


def strain_rate(F, G) -> np.ndarray:
    """Voigt strain ``sym(F^T G)``, the Green strain rate for ``G = dF/dt``."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    return strain_to_voigt(np.swapaxes(F, -1, -2) @ G)


@lru_cache(maxsize=None)
def f_matrix_tensor(d: int) -> np.ndarray:
    """Constant array ``T[r, c, a]`` with ``f_matrix(F)[r, c] = T[r, c, :] @ grad_to_vec(F)``.

    Row ``r = (i, j)``, column ``c = (k, l)``:
    ``F_ik * delta_lj + (k != l) * F_il * delta_kj``.
    """
    gpairs = index_order(d)
    spairs = sym_order(d)
    pos = {p: n for n, p in enumerate(gpairs)}
    T = np.zeros((len(gpairs), len(spairs), len(gpairs)))
    for r, (i, j) in enumerate(gpairs):
        for c, (k, l) in enumerate(spairs):
            if l == j:
                T[r, c, pos[(i, k)]] += 1.0
            if k != l and k == j:
                T[r, c, pos[(i, l)]] += 1.0
    T.flags.writeable = False
    return T


def f_matrix(F) -> np.ndarray:
    """Matrix form ``(q, m)`` of a deformation gradient.

    ``f_matrix(F) @ stress_to_voigt(S) == grad_to_vec(F @ S)`` for symmetric
    ``S`` and ``f_matrix(F).T @ grad_to_vec(G) == strain_to_voigt(F.T @ G)``.
    """
    F = np.asarray(F, dtype=float)
    T = f_matrix_tensor(_dim_of_matrix(F))
    return np.einsum("rca,...a->...rc", T, grad_to_vec(F))


def stress_action(s) -> np.ndarray:
    """Matrix ``(q, q)`` mapping ``grad_to_vec(F)`` to ``f_matrix(F) @ s``.

    Used for derivatives of ``F S`` with respect to ``F``.
    """
    s = np.asarray(s, dtype=float)
    T = f_matrix_tensor(_dim_of_vector(s.shape[-1], True))
    return np.einsum("rca,...c->...ra", T, s)


def transpose_action(g) -> np.ndarray:
    """Matrix ``(m, q)`` mapping ``grad_to_vec(F)`` to ``f_matrix(F).T @ g``."""
    g = np.asarray(g, dtype=float)
    T = f_matrix_tensor(_dim_of_vector(g.shape[-1], False))
    return np.einsum("rca,...r->...ca", T, g)


def normal_matrix(N, tol: float = 1e-12) -> np.ndarray:
    """Matrix ``(d, q)`` with ``normal_matrix(N) @ grad_to_vec(G) == G @ N``."""
    N = np.asarray(N, dtype=float)
    if N.ndim < 1:
        N = N.reshape(1)
    d = check_dim(N.shape[-1])
    norms = np.linalg.norm(N, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError(f"normal vector must have unit length, got |N| = {norms}")
    out = np.zeros(N.shape[:-1] + (d, d * d))
    for a, (i, j) in enumerate(index_order(d)):
        out[..., i, a] = N[..., j]
    return out


def elasticity_voigt(lam: float, mu: float, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic elasticity matrix ``C = 2 mu I_s + lam I x I`` and its inverse.

    For ``d = 2`` the Lame parameters are used as given, i.e. already
    reduced for plane stress.  One-dimensional rods use :func:`rod_stiffness`.
    """
    check_dim(d)
    if d == 1:
        raise ValueError("use rod_stiffness(E, A) for one-dimensional models")
    if not mu > 0:
        raise ElasticityError(f"shear modulus must be positive, got mu = {mu}")
    m = sym_size(d)
    C = np.zeros((m, m))
    C[:d, :d] = lam
    C[range(d), range(d)] += 2.0 * mu
    C[range(d, m), range(d, m)] = mu
    w, V = np.linalg.eigh(C)
    if w[0] <= 0.0:
        raise ElasticityError(
            f"elasticity matrix not positive definite: eigenvalue {w[0]:.6g} "
            f"along direction {np.round(V[:, 0], 12).tolist()}"
        )
    return C, np.linalg.inv(C)


def rod_stiffness(young: float, area: float) -> tuple[np.ndarray, np.ndarray]:
    """Axial stiffness ``EA`` as a 1x1 elasticity matrix, and its inverse."""
    EA = young * area
    if not EA > 0:
        raise ElasticityError(f"axial stiffness must be positive, got EA = {EA} along direction [1.0]")
    return np.array([[EA]]), np.array([[1.0 / EA]])
