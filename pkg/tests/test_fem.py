import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phsvk.fem import (
    BasisSpec,
    FunctionSpace,
    PointLocationError,
    evaluate,
    interpolate,
    lagrange_points,
    quadrature,
    shape_functions,
)
from phsvk.mesh import BoundaryTag, interval_mesh, rect_tri_mesh
from phsvk.voigt import grad_to_vec


def triangle_monomial(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


class TestShapeFunctions:
    def test_interval_p1_midpoint(self):
        N, _ = shape_functions(1, 1, [[0.5]])
        np.testing.assert_allclose(N[0], [0.5, 0.5])

    def test_triangle_p1_barycentre(self):
        N, _ = shape_functions(2, 1, [[1 / 3, 1 / 3]])
        np.testing.assert_allclose(N[0], [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_interval_p2_midpoint(self):
        N, _ = shape_functions(1, 2, [[0.5]])
        np.testing.assert_allclose(N[0], [0.0, 0.0, 1.0], atol=1e-15)

    @pytest.mark.parametrize("dim,degree", [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)])
    def test_kronecker_property(self, dim, degree):
        pts = lagrange_points(dim, degree)
        N, _ = shape_functions(dim, degree, pts)
        np.testing.assert_allclose(N, np.eye(len(pts)), atol=1e-13)

    @pytest.mark.parametrize("dim,degree", [(1, 1), (1, 2), (2, 1), (2, 2)])
    def test_partition_of_unity(self, dim, degree, rng):
        pts = rng.random((20, dim)) / dim
        N, dN = shape_functions(dim, degree, pts)
        np.testing.assert_allclose(N.sum(axis=1), 1.0, atol=1e-13)
        np.testing.assert_allclose(dN.sum(axis=1), 0.0, atol=1e-12)

    @pytest.mark.parametrize("degree", [1, 2])
    def test_reproduces_polynomials(self, degree, rng):
        pts = lagrange_points(2, degree)
        for a, b in itertools.product(range(degree + 1), repeat=2):
            if a + b > degree:
                continue
            x = rng.random((10, 2)) * 0.5
            N, dN = shape_functions(2, degree, x)
            nodal = pts[:, 0] ** a * pts[:, 1] ** b
            np.testing.assert_allclose(N @ nodal, x[:, 0] ** a * x[:, 1] ** b, atol=1e-13)
            dx = a * x[:, 0] ** max(a - 1, 0) * x[:, 1] ** b
            np.testing.assert_allclose(dN[:, :, 0] @ nodal, dx, atol=1e-12)


class TestQuadrature:
    def test_interval_midpoint_rule(self):
        r = quadrature(1, 1)
        np.testing.assert_array_equal(r.points, [[0.5]])
        np.testing.assert_array_equal(r.weights, [1.0])

    def test_interval_degree_five(self):
        r = quadrature(1, 5)
        assert len(r.weights) == 3
        assert r.weights @ r.points[:, 0] ** 5 == pytest.approx(1 / 6, abs=1e-15)

    def test_triangle_degree_two(self):
        r = quadrature(2, 2)
        assert len(r.weights) == 3
        assert r.weights @ r.points[:, 0] ** 2 == pytest.approx(1 / 12, abs=1e-15)

    @pytest.mark.parametrize("degree", range(0, 7))
    def test_triangle_exactness(self, degree):
        r = quadrature(2, degree)
        assert np.all(r.weights > 0)
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                val = r.weights @ (r.points[:, 0] ** a * r.points[:, 1] ** b)
                assert val == pytest.approx(triangle_monomial(a, b), abs=1e-15)

    @pytest.mark.parametrize("degree", range(0, 7))
    def test_interval_exactness(self, degree):
        r = quadrature(1, degree)
        for a in range(degree + 1):
            assert r.weights @ r.points[:, 0] ** a == pytest.approx(1 / (a + 1), abs=1e-15)

    def test_degree_out_of_range(self):
        with pytest.raises(ValueError):
            quadrature(2, 7)


class TestSpaces:
    def test_rod_dof_counts(self):
        m = interval_mesh(3.0, 100)
        assert FunctionSpace(m, BasisSpec("CG", 2)).dim == 201
        assert FunctionSpace(m, BasisSpec("DG", 2)).dim == 300

    def test_beam_defgrad_dofs(self):
        m = rect_tri_mesh(25.0, 1.0, 125, 5)
        assert FunctionSpace(m, BasisSpec("DG", 0, 4)).dim == 5000

    def test_dg_layout_cell_major_component_minor(self):
        V = FunctionSpace(rect_tri_mesh(1.0, 1.0, 2, 1), BasisSpec("DG", 1, 3))
        np.testing.assert_array_equal(V.cell_dofs[1], np.arange(9, 18))

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            BasisSpec("CG", 0)
        with pytest.raises(ValueError):
            BasisSpec("RT", 1)
        with pytest.raises(ValueError):
            BasisSpec("DG", 3)

    def test_constant_interpolation(self):
        V = FunctionSpace(interval_mesh(3.0, 100), BasisSpec("CG", 2))
        c = interpolate(V, 0.5)
        assert np.all(c == 0.5)
        for X in (0.0, 0.123, 1.5, 3.0):
            assert evaluate(V, c, [X])[0] == pytest.approx(0.5, abs=1e-14)

    def test_identity_defgrad_per_cell(self):
        V = FunctionSpace(rect_tri_mesh(25.0, 1.0, 125, 5), BasisSpec("DG", 0, 4))
        c = interpolate(V, grad_to_vec(np.eye(2)))
        np.testing.assert_array_equal(c.reshape(-1, 4), np.tile([1.0, 1.0, 0.0, 0.0], (1250, 1)))

    @pytest.mark.parametrize("degree", [1, 2])
    def test_linear_field_reproduced(self, degree, rng):
        V = FunctionSpace(rect_tri_mesh(2.0, 1.0, 4, 3), BasisSpec("CG", degree, 2))
        A, b = rng.standard_normal((2, 2)), rng.standard_normal(2)
        c = interpolate(V, lambda X: X @ A.T + b)
        for X in rng.random((10, 2)) * [2.0, 1.0]:
            np.testing.assert_allclose(evaluate(V, c, X), A @ X + b, atol=1e-12)

    def test_continuity_across_cells(self, rng):
        V = FunctionSpace(rect_tri_mesh(1.0, 1.0, 3, 3), BasisSpec("CG", 2))
        c = rng.standard_normal(V.dim)
        # a point on an interior edge, evaluated from both neighbours
        X = np.array([0.5, 1 / 3])
        owners = [k for k in range(V.mesh.n_cells) if _contains(V, k, X)]
        assert len(owners) == 2
        vals = [evaluate(V, c, X, cell=k)[0] for k in owners]
        assert vals[0] == pytest.approx(vals[1], abs=1e-13)

    def test_boundary_dofs(self):
        V = FunctionSpace(rect_tri_mesh(25.0, 1.0, 125, 5), BasisSpec("CG", 1, 2))
        dofs = V.boundary_dofs(BoundaryTag.DIRICHLET)
        assert dofs.size == 12
        np.testing.assert_allclose(V.scalar_coords[dofs // 2, 0], 0.0)
        V2 = FunctionSpace(interval_mesh(3.0, 4), BasisSpec("CG", 2))
        np.testing.assert_array_equal(V2.boundary_dofs(BoundaryTag.NEUMANN_LOADED), [4])

    def test_locate_outside(self):
        V = FunctionSpace(rect_tri_mesh(1.0, 1.0, 2, 2), BasisSpec("CG", 1))
        with pytest.raises(PointLocationError):
            V.locate([1.5, 0.5])


def _contains(V, k, X, tol=1e-12):
    m = V.mesh
    xi = np.linalg.solve(m.jacobians()[k], X - m.nodes[m.cells[k, 0]])
    return np.all(xi >= -tol) and xi.sum() <= 1 + tol


@given(degree=st.sampled_from([0, 1, 2]), seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_interpolation_round_trip_at_nodes(degree, seed):
    rng = np.random.default_rng(seed)
    family = "DG" if degree == 0 else rng.choice(["CG", "DG"])
    V = FunctionSpace(rect_tri_mesh(1.0, 1.0, 2, 2), BasisSpec(family, degree))
    c = rng.standard_normal(V.dim)
    values = interpolate(V, lambda X: np.array([evaluate(V, c, x)[0] for x in X])) if family == "CG" else c
    np.testing.assert_allclose(values, c, atol=1e-12)
