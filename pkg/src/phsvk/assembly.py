"""Assembly of the mixed finite element matrices of the port-Hamiltonian model.

Fields: velocity ``v`` (continuous, ``d`` components), second Piola-Kirchhoff
stress ``S`` (discontinuous, Voigt, ``m`` components) and deformation
gradient ``F`` (discontinuous, gradient vector, ``q`` components).

Matrices::

    M_v = int phi^T rho0 phi            M_S = int psi^T C^-1 psi
    M_F = int theta^T theta             Z   = int theta^T (D phi)
    K(F) = int (D phi)^T F(theta F) psi - int_{Sigma_D} phi^T N F(theta F) psi
    G_nu(F) = -K_D(F)^T E_nu            G_tau = int_{Sigma_N} phi^T phi E_tau

where ``F(.)`` is :func:`phsvk.voigt.f_matrix`, ``K_D`` the Dirichlet part of
``K`` and ``E_nu``, ``E_tau`` expand boundary input coefficients into velocity
dof vectors.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import voigt
from .fem import BasisSpec, FunctionSpace, facet_to_cell_points, quadrature
from .mesh import BoundaryTag, Mesh

__all__ = [
    "Material",
    "MixedSpaces",
    "mixed_spaces",
    "ConstantOperators",
    "Assembler",
    "MassSpectrum",
    "mass_spectra",
    "dump_matrix_market",
]


@dataclass(frozen=True)
class Material:
    """Density and elasticity matrix.

    For rods ``rho0`` is a mass per length and ``C`` the 1x1 matrix ``[[EA]]``.
    """

    rho0: float
    C: np.ndarray
    C_inv: np.ndarray

    @classmethod
    def rod(cls, rho0: float, young: float, area: float) -> "Material":
        return cls(rho0, *voigt.rod_stiffness(young, area))

    @classmethod
    def lame(cls, rho0: float, lam: float, mu: float, dim: int) -> "Material":
        return cls(rho0, *voigt.elasticity_voigt(lam, mu, dim))


@dataclass(frozen=True)
class MixedSpaces:
    velocity: FunctionSpace
    stress: FunctionSpace
    defgrad: FunctionSpace

    @property
    def mesh(self) -> Mesh:
        return self.velocity.mesh

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.velocity.dim, self.stress.dim, self.defgrad.dim


def mixed_spaces(mesh: Mesh, velocity_degree: int, stress_degree: int, defgrad_degree: int) -> MixedSpaces:
    """CG velocity, DG stress and DG deformation gradient spaces."""
    d = mesh.dim
    return MixedSpaces(
        FunctionSpace(mesh, BasisSpec("CG", velocity_degree, d)),
        FunctionSpace(mesh, BasisSpec("DG", stress_degree, voigt.sym_size(d))),
        FunctionSpace(mesh, BasisSpec("DG", defgrad_degree, voigt.grad_size(d))),
    )


@dataclass(frozen=True)
class ConstantOperators:
    M_v: sp.csr_matrix
    M_S: sp.csr_matrix
    M_F: sp.csr_matrix
    Z: sp.csr_matrix
    G_tau: sp.csr_matrix


_PATHS: dict = {}


def _einsum(expr: str, *operands: np.ndarray) -> np.ndarray:
    """``np.einsum`` with the contraction path computed once per signature."""
    key = (expr,) + tuple(o.shape for o in operands)
    path = _PATHS.get(key)
    if path is None:
        path = np.einsum_path(expr, *operands, optimize="optimal")[0]
        _PATHS[key] = path
    return np.einsum(expr, *operands, optimize=path)


class _Scatter:
    """Fixed-pattern sparse accumulation of local element blocks.

    Duplicate entries are summed with ``np.bincount`` in input order, so the
    result is reproducible bit for bit.
    """

    def __init__(self, rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]):
        self.shape = shape
        key = rows.ravel().astype(np.int64) * shape[1] + cols.ravel()
        uniq, self.inverse = np.unique(key, return_inverse=True)
        self.n = uniq.size
        r = uniq // shape[1]
        self.indices = (uniq % shape[1]).astype(np.int32)
        self.indptr = np.searchsorted(r, np.arange(shape[0] + 1)).astype(np.int32)

    def __call__(self, data: np.ndarray) -> sp.csr_matrix:
        vals = np.bincount(self.inverse, weights=data.ravel(), minlength=self.n)
        return sp.csr_matrix((vals, self.indices.copy(), self.indptr.copy()), shape=self.shape)


def _block_indices(row_dofs: np.ndarray, col_dofs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = np.broadcast_to(row_dofs[:, :, None], row_dofs.shape + (col_dofs.shape[1],))
    cols = np.broadcast_to(col_dofs[:, None, :], (col_dofs.shape[0], row_dofs.shape[1], col_dofs.shape[1]))
    return rows, cols


def _vector_basis(vals: np.ndarray, k: int) -> np.ndarray:
    """``(..., n_loc)`` scalar values -> ``(..., k, n_loc * k)`` component-minor basis."""
    out = np.einsum("...a,ij->...iaj", vals, np.eye(k))
    return out.reshape(vals.shape[:-1] + (k, vals.shape[-1] * k))


def _grad_basis(dN: np.ndarray, d: int) -> np.ndarray:
    """Physical scalar gradients ``(..., n_loc, d)`` -> ``D phi`` as ``(..., q, n_loc * d)``."""
    pairs = voigt.index_order(d)
    n_loc = dN.shape[-2]
    out = np.zeros(dN.shape[:-2] + (len(pairs), n_loc, d))
    for r, (i, j) in enumerate(pairs):
        out[..., r, :, i] = dN[..., :, j]
    return out.reshape(dN.shape[:-2] + (len(pairs), n_loc * d))


class _FacetTables:
    """Basis values at quadrature points of a set of boundary facets."""

    def __init__(self, spaces: MixedSpaces, facets: np.ndarray, degree: int):
        mesh = spaces.mesh
        d = mesh.dim
        self.facets = facets
        self.cells = mesh.facet_cells[facets]
        rule = quadrature(1, degree) if d == 2 else None
        fpts = rule.points[:, 0] if rule is not None else np.zeros(1)
        fw = rule.weights if rule is not None else np.ones(1)
        measures = mesh.facet_measures()[facets]
        self.weights = measures[:, None] * fw[None, :]
        ref = np.array([facet_to_cell_points(d, int(k), fpts) for k in mesh.facet_local[facets]])
        flat = ref.reshape(-1, d)
        nf, nq = len(facets), fpts.size

        def tab(space: FunctionSpace) -> np.ndarray:
            vals, _ = space.tabulate(flat)
            return _vector_basis(vals.reshape(nf, nq, -1), space.components)

        self.phi = tab(spaces.velocity)
        self.psi = tab(spaces.stress)
        self.theta = tab(spaces.defgrad)
        self.normal_mats = voigt.normal_matrix(mesh.facet_normals[facets]) if nf else np.zeros((0, d, d * d))


class Assembler:
    """Quadrature tables and sparse patterns for one set of mixed spaces.

    Args:
        spaces: velocity / stress / deformation gradient spaces on one mesh.
        material: density and elasticity matrix.
        input_basis: ``"uniform"`` (spatially constant boundary data, one
            coefficient per component) or ``"trace"`` (one coefficient per
            velocity dof on the tagged boundary).
    """

    def __init__(self, spaces: MixedSpaces, material: Material, input_basis: str = "uniform"):
        if spaces.velocity.family != "CG":
            raise ValueError("velocity space must be continuous")
        if input_basis not in ("uniform", "trace"):
            raise ValueError(f"unknown input basis {input_basis!r}")
        mesh = spaces.mesh
        d = mesh.dim
        self.spaces = spaces
        self.material = material
        self.input_basis = input_basis
        self.d, self.m, self.q = d, voigt.sym_size(d), voigt.grad_size(d)
        if material.C.shape != (self.m, self.m):
            raise ValueError(f"elasticity matrix must be {self.m}x{self.m}, got {material.C.shape}")
        self.n_v, self.n_S, self.n_F = spaces.sizes
        pv, ps, pf = spaces.velocity.degree, spaces.stress.degree, spaces.defgrad.degree

        # one domain rule exact for every integrand (affine cells)
        self.domain_degree = max(2 * pv, 2 * ps, 2 * pf, (pv - 1) + pf + ps)
        rule = quadrature(d, self.domain_degree)
        J = mesh.jacobians()
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            raise ValueError("mesh has cells with non-positive Jacobian")
        invJ = np.linalg.inv(J)
        self.wdet = detJ[:, None] * rule.weights[None, :]

        Nv, dNv_ref = spaces.velocity.tabulate(rule.points)
        Ns, _ = spaces.stress.tabulate(rule.points)
        Nf, _ = spaces.defgrad.tabulate(rule.points)
        dNv = np.einsum("qad,cdj->cqaj", dNv_ref, invJ)
        self.phi = _vector_basis(Nv, d)
        self.psi = _vector_basis(Ns, self.m)
        self.theta = _vector_basis(Nf, self.q)
        self.dphi = _grad_basis(dNv, d)

        self.boundary_degree = pv + pf + ps
        self.dirichlet = _FacetTables(spaces, mesh.facets_with_tag(BoundaryTag.DIRICHLET), self.boundary_degree)
        self.neumann = _FacetTables(spaces, mesh.facets_with_tag(BoundaryTag.NEUMANN_LOADED), 2 * pv)

        cv, cs, cf = spaces.velocity.cell_dofs, spaces.stress.cell_dofs, spaces.defgrad.cell_dofs
        dv = cv[self.dirichlet.cells]
        ds = cs[self.dirichlet.cells]
        df = cf[self.dirichlet.cells]
        self._K_dom = _Scatter(*_block_indices(cv, cs), (self.n_v, self.n_S))
        self._K_bnd = _Scatter(*_block_indices(dv, ds), (self.n_v, self.n_S))
        self._dKS = _Scatter(
            *[np.concatenate([a.ravel(), b.ravel()]) for a, b in zip(_block_indices(cv, cf), _block_indices(dv, df))],
            (self.n_v, self.n_F),
        )
        self._dSF = _Scatter(
            *[np.concatenate([a.ravel(), b.ravel()]) for a, b in zip(_block_indices(cs, cf), _block_indices(ds, df))],
            (self.n_S, self.n_F),
        )

        self.dirichlet_dofs = spaces.velocity.boundary_dofs(BoundaryTag.DIRICHLET)
        self.neumann_dofs = spaces.velocity.boundary_dofs(BoundaryTag.NEUMANN_LOADED)
        self.E_nu = self._input_expansion(self.dirichlet_dofs)
        self.E_tau = self._input_expansion(self.neumann_dofs)

    # ------------------------------------------------------------------ inputs

    def _input_expansion(self, dofs: np.ndarray) -> sp.csr_matrix:
        """Map from input coefficients to velocity dof vectors (nonzero on ``dofs`` only)."""
        if self.input_basis == "trace":
            return sp.csr_matrix((np.ones(dofs.size), (dofs, np.arange(dofs.size))), shape=(self.n_v, dofs.size))
        return sp.csr_matrix((np.ones(dofs.size), (dofs, dofs % self.d)), shape=(self.n_v, self.d))

    @property
    def n_tau(self) -> int:
        return self.E_tau.shape[1]

    @property
    def n_nu(self) -> int:
        return self.E_nu.shape[1]

    # ------------------------------------------------------------ constant part

    def _cell_mass(self, basis: np.ndarray, weight: np.ndarray | float, dofs: np.ndarray, n: int) -> sp.csr_matrix:
        # basis (nq, k, n_loc); weight scalar or (k, k)
        wb = basis if np.isscalar(weight) else np.einsum("ij,qjb->qib", weight, basis)
        loc = np.einsum("cq,qia,qib->cab", self.wdet, basis, wb)
        if np.isscalar(weight):
            loc = loc * weight
        return _Scatter(*_block_indices(dofs, dofs), (n, n))(loc)

    def constant_operators(self) -> ConstantOperators:
        sv, ss, sf = self.spaces.velocity, self.spaces.stress, self.spaces.defgrad
        M_v = self._cell_mass(self.phi, self.material.rho0, sv.cell_dofs, self.n_v)
        M_S = self._cell_mass(self.psi, self.material.C_inv, ss.cell_dofs, self.n_S)
        M_F = self._cell_mass(self.theta, 1.0, sf.cell_dofs, self.n_F)
        zloc = np.einsum("cq,qra,cqrb->cab", self.wdet, self.theta, self.dphi)
        Z = _Scatter(*_block_indices(sf.cell_dofs, sv.cell_dofs), (self.n_F, self.n_v))(zloc)
        return ConstantOperators(M_v, M_S, M_F, Z, self.neumann_mass() @ self.E_tau)

    def neumann_mass(self) -> sp.csr_matrix:
        """Boundary mass ``int_{Sigma_N} phi^T phi`` over loaded Neumann facets."""
        t = self.neumann
        dofs = self.spaces.velocity.cell_dofs[t.cells]
        loc = np.einsum("fq,fqia,fqib->fab", t.weights, t.phi, t.phi)
        return _Scatter(*_block_indices(dofs, dofs), (self.n_v, self.n_v))(loc)

    # -------------------------------------------------------------- state part

    def _cellwise(self, space: FunctionSpace, coeffs: np.ndarray, cells=None) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.dim,):
            raise ValueError(f"coefficient vector of length {space.dim} expected, got {coeffs.shape}")
        dofs = space.cell_dofs if cells is None else space.cell_dofs[cells]
        return coeffs[dofs]

    def defgrad_at_quadrature(self, F_hat) -> np.ndarray:
        """Deformation gradient vectors at domain quadrature points, ``(n_cells, nq, q)``."""
        return np.einsum("qra,ca->cqr", self.theta, self._cellwise(self.spaces.defgrad, F_hat))

    def _boundary_traction_basis(self, F_hat) -> np.ndarray:
        """Shared Dirichlet kernel: ``N F(theta F) psi`` at facet points, ``(nf, nq, d, n_loc_S)``."""
        t = self.dirichlet
        Fb = np.einsum("fqra,fa->fqr", t.theta, self._cellwise(self.spaces.defgrad, F_hat, t.cells))
        Fmat = np.einsum("rsa,fqa->fqrs", voigt.f_matrix_tensor(self.d), Fb)
        return np.einsum("fir,fqrs,fqsb->fqib", t.normal_mats, Fmat, t.psi)

    def K_parts(self, F_hat) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Domain and Dirichlet-boundary parts of ``K(F_hat)``."""
        Fq = self.defgrad_at_quadrature(F_hat)
        Fmat = np.einsum("rsa,eqa->eqrs", voigt.f_matrix_tensor(self.d), Fq)
        dom = _einsum("eq,eqra,eqrs,qsb->eab", self.wdet, self.dphi, Fmat, self.psi)
        t = self.dirichlet
        tb = self._boundary_traction_basis(F_hat)
        bnd = -np.einsum("fq,fqia,fqib->fab", t.weights, t.phi, tb)
        return self._K_dom(dom), self._K_bnd(bnd)

    def K(self, F_hat) -> sp.csr_matrix:
        dom, bnd = self.K_parts(F_hat)
        return (dom + bnd).tocsr()

    def G_nu(self, F_hat) -> sp.csr_matrix:
        _, bnd = self.K_parts(F_hat)
        return self.G_nu_from_boundary(bnd)

    def G_nu_from_boundary(self, K_boundary: sp.csr_matrix) -> sp.csr_matrix:
        return (-(K_boundary.T @ self.E_nu)).tocsr()

    def state_operators(self, F_hat) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """``K(F_hat)`` and ``G_nu(F_hat)`` from one pass over the quadrature tables."""
        dom, bnd = self.K_parts(F_hat)
        return (dom + bnd).tocsr(), self.G_nu_from_boundary(bnd)

    def jacobian_blocks(self, F_hat, S_hat, v_hat, nu_hat) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        """Exact derivatives with respect to ``F_hat``.

        Returns ``d[K(F) S]/dF``, ``d[K(F)^T v]/dF`` and ``d[G_nu(F) nu]/dF``.
        The operators are linear in ``F_hat``, so the blocks do not depend on
        it; the argument is only validated.
        """
        self._cellwise(self.spaces.defgrad, F_hat)
        sv, ss = self.spaces.velocity, self.spaces.stress
        T = voigt.f_matrix_tensor(self.d)
        t = self.dirichlet

        S_c = self._cellwise(ss, S_hat)
        v_c = self._cellwise(sv, v_hat)
        # L(S): grad_to_vec(F) -> grad_to_vec(F S);  P(g): grad_to_vec(F) -> f_matrix(F)^T g
        Sq = np.einsum("qsb,eb->eqs", self.psi, S_c)
        Lq = np.einsum("rsa,eqs->eqra", T, Sq)
        dom_KS = _einsum("eq,eqra,eqrt,qtb->eab", self.wdet, self.dphi, Lq, self.theta)
        gq = np.einsum("eqra,ea->eqr", self.dphi, v_c)
        Pq = np.einsum("rsa,eqr->eqsa", T, gq)
        dom_Kv = _einsum("eq,qsc,eqsa,qab->ecb", self.wdet, self.psi, Pq, self.theta)

        Sb = np.einsum("fqsb,fb->fqs", t.psi, S_c[t.cells])
        Lb = np.einsum("rsa,fqs->fqra", T, Sb)
        bnd_KS = -_einsum("fq,fqia,fir,fqrt,fqtb->fab", t.weights, t.phi, t.normal_mats, Lb, t.theta)

        def boundary_transpose(w_vel: np.ndarray, sign: float) -> np.ndarray:
            # g = N^T w is the gradient vector of w (x) N
            wb = np.einsum("fqia,fa->fqi", t.phi, w_vel[sv.cell_dofs[t.cells]])
            gb = np.einsum("fir,fqi->fqr", t.normal_mats, wb)
            Pb = np.einsum("rsa,fqr->fqsa", T, gb)
            return sign * _einsum("fq,fqsc,fqsa,fqab->fcb", t.weights, t.psi, Pb, t.theta)

        bnd_Kv = boundary_transpose(np.asarray(v_hat, dtype=float), -1.0)
        bnd_Gnu = boundary_transpose(self.E_nu @ np.asarray(nu_hat, dtype=float), 1.0)

        dKS = self._dKS(np.concatenate([dom_KS.ravel(), bnd_KS.ravel()]))
        dKv = self._dSF(np.concatenate([dom_Kv.ravel(), bnd_Kv.ravel()]))
        dGnu = self._dSF(np.concatenate([np.zeros(dom_Kv.size), bnd_Gnu.ravel()]))
        return dKS, dKv, dGnu


@dataclass(frozen=True)
class MassSpectrum:
    lambda_min: float
    lambda_max: float

    @property
    def condition(self) -> float:
        return self.lambda_max / self.lambda_min


def _extreme_eigenvalues(M: sp.csr_matrix, blocks: np.ndarray | None) -> MassSpectrum:
    if blocks is not None:
        # cell-local (discontinuous) spaces: the spectrum is the union of the block spectra
        rows = np.repeat(blocks, blocks.shape[1], axis=1).ravel()
        cols = np.tile(blocks, (1, blocks.shape[1])).ravel()
        loc = np.asarray(M[rows, cols]).reshape(blocks.shape[0], blocks.shape[1], blocks.shape[1])
        w = np.linalg.eigvalsh(loc)
        return MassSpectrum(float(w.min()), float(w.max()))
    w = np.linalg.eigvalsh(M.toarray())
    return MassSpectrum(float(w[0]), float(w[-1]))


def mass_spectra(assembler: Assembler, ops: ConstantOperators) -> dict[str, MassSpectrum]:
    """Extreme eigenvalues of the three mass matrices (for diagnostics)."""
    sp_ = assembler.spaces
    return {
        "M_v": _extreme_eigenvalues(ops.M_v, None),
        "M_S": _extreme_eigenvalues(ops.M_S, sp_.stress.cell_dofs),
        "M_F": _extreme_eigenvalues(ops.M_F, sp_.defgrad.cell_dofs),
    }


def dump_matrix_market(matrices: dict[str, sp.spmatrix], directory: str) -> list[str]:
    """Write each matrix as ``<name>.mtx`` in Matrix Market coordinate format."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, A in matrices.items():
        path = os.path.join(directory, f"{name}.mtx")
        scipy.io.mmwrite(path, sp.coo_matrix(A), field="real", symmetry="general")
        paths.append(path)
    return paths
