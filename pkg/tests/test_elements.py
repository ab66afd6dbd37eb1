"""
Finite Element Space Test Suite

Tests the reference elements and global spaces:
1. DOF counts for every supported (family, k, r, dim)
2. Basis evaluation against a symbolic oracle
3. Duality of basis and DOF functionals
4. Canonical interpolation and the commuting property with d
5. Inter-element continuity and the subcomplex property
"""

import numpy as np
import pytest
import sympy

from src.assembly.forms import l2_error
from src.assembly.quadrature import quadrature
from src.elements.interpolation import canonical_interpolate
from src.elements.reference import SUPPORTED, evaluate_dofs, reference_element, reference_mesh
from src.elements.spaces import (
    Field,
    build_space,
    build_space_pair,
    derivative_matrix,
    evaluate_at,
    evaluate_field,
)
from src.exceptions import (
    InvalidParameterError,
    MeshMismatchError,
    ShapeMismatchError,
    UnsupportedConfigurationError,
)
from src.geometry import build_square_annulus, build_unit_cube, build_unit_square


# ============================================================================
# FIXTURES
# ============================================================================

@pytest.fixture
def annulus():
    """Square annulus n=4: 24 vertices, 48 edges, 24 triangles"""
    return build_square_annulus(4)


@pytest.fixture
def cube():
    """Unit cube n=1: 8 vertices, 19 edges"""
    return build_unit_cube(1)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def basis_function(element, j):
    """Callable of physical points on the reference cell returning basis j"""
    def func(x):
        values = element.tabulate(x.reshape(-1, element.dim))[0][j]
        if element.value_size == 1:
            return values[:, 0].reshape(x.shape[:-1])
        return values.reshape(x.shape)
    return func


def all_elements():
    return [
        (family, k, r, dim)
        for (family, k, r), dims in SUPPORTED.items()
        for dim in dims
    ]


# ============================================================================
# DOF COUNTS
# ============================================================================

class TestDofCounts:
    """Global dimension formulas"""

    def test_annulus_lowest_order(self, annulus):
        """P1 Lambda^0 -> 24, P1^- Lambda^1 -> 48"""
        sigma_space, u_space = build_space_pair(annulus, 1)
        assert sigma_space.dof_count == 24
        assert u_space.dof_count == 48

    def test_annulus_second_order(self, annulus):
        """P2 Lambda^0 -> V + E = 72, P2^- Lambda^1 -> 2E + 2T = 144"""
        sigma_space, u_space = build_space_pair(annulus, 2)
        assert sigma_space.dof_count == 72
        assert u_space.dof_count == 144

    def test_full_pairing(self, annulus):
        """P1 Lambda^1 (rotated BDM) has two DOFs per edge"""
        _, u_space = build_space_pair(annulus, 2, pairing='full')
        assert u_space.family == 'full_P'
        assert u_space.dof_count == 96

    def test_cube_edges(self, cube):
        """Kuhn cube n=1: 19 Whitney DOFs"""
        _, u_space = build_space_pair(cube, 1)
        assert u_space.dof_count == 19

    def test_cell_dof_map_in_range(self, annulus):
        """Every local DOF maps to a valid global index and every global DOF is used"""
        _, u_space = build_space_pair(annulus, 2)
        used = np.unique(u_space.cell_dof_map)
        assert np.array_equal(used, np.arange(u_space.dof_count))

    def test_signs_are_unit(self, annulus):
        """Orientation signs are +1 or -1"""
        _, u_space = build_space_pair(annulus, 2)
        assert set(np.unique(u_space.cell_dof_signs)) <= {-1.0, 1.0}

    @pytest.mark.parametrize('family, k, r', [
        ('lagrange_P', 0, 2),
        ('trimmed_Pminus', 1, 2),
        ('full_P', 1, 1),
    ])
    def test_unsupported_in_3d(self, cube, family, k, r):
        """Second-order and full families exist only in 2D"""
        with pytest.raises(UnsupportedConfigurationError):
            build_space(cube, family, k, r)

    def test_unknown_triple(self, annulus):
        """k=2 is not built"""
        with pytest.raises(UnsupportedConfigurationError):
            build_space(annulus, 'trimmed_Pminus', 2, 1)

    def test_full_pairing_needs_r2(self, annulus):
        with pytest.raises(UnsupportedConfigurationError):
            build_space_pair(annulus, 1, pairing='full')


# ============================================================================
# BASIS EVALUATION
# ============================================================================

class TestBasisEvaluation:
    """Reference and physical basis values"""

    def test_partition_of_unity_at_barycentre(self):
        """P1 on the reference triangle: all three values 1/3"""
        space = build_space(reference_mesh(2), 'lagrange_P', 0, 1)
        values, _ = space.eval_basis(0, np.array([[1 / 3, 1 / 3]]))
        assert np.allclose(values[:, 0, 0], 1 / 3)

    @pytest.mark.parametrize('r, dim', [(1, 2), (2, 2), (1, 3)])
    def test_partition_of_unity_at_quadrature_points(self, r, dim):
        """Lagrange bases sum to one and their gradients to zero"""
        element = reference_element('lagrange_P', 0, r, dim)
        values, derivs = element.tabulate(quadrature(dim, 6).ref_points)
        assert np.allclose(values.sum(axis=0), 1.0, atol=1e-14)
        assert np.allclose(derivs.sum(axis=0), 0.0, atol=1e-13)

    def test_whitney_rot_is_plus_minus_two(self):
        """Edges (0,1), (0,2), (1,2) of the unit right triangle: rot = 2, -2, 2"""
        element = reference_element('trimmed_Pminus', 1, 1, 2)
        _, derivs = element.tabulate(quadrature(2, 2).ref_points)
        assert np.allclose(derivs[:, :, 0], np.array([[2.0], [-2.0], [2.0]]))

    def test_whitney_matches_symbolic_oracle(self):
        """lambda_a grad lambda_b - lambda_b grad lambda_a and its rot, symbolically"""
        x, y = sympy.symbols('x y')
        lam = [1 - x - y, x, y]
        grads = [[sympy.diff(l, x), sympy.diff(l, y)] for l in lam]
        point = np.array([[0.2, 0.3]])
        element = reference_element('trimmed_Pminus', 1, 1, 2)
        values, derivs = element.tabulate(point)
        for index, (a, b) in enumerate([(0, 1), (0, 2), (1, 2)]):
            phi = [lam[a] * grads[b][i] - lam[b] * grads[a][i] for i in range(2)]
            rot = sympy.diff(phi[1], x) - sympy.diff(phi[0], y)
            expected = [float(c.subs({x: 0.2, y: 0.3})) for c in phi]
            assert np.allclose(values[index, 0], expected, atol=1e-15)
            assert derivs[index, 0, 0] == pytest.approx(float(rot))

    def test_rotated_rt_rot_matches_finite_differences(self):
        """Closed-form rot of the second-order trimmed basis agrees with central differences"""
        element = reference_element('trimmed_Pminus', 1, 2, 2)
        point, step = np.array([[0.25, 0.35]]), 1e-6
        _, derivs = element.tabulate(point)
        dx = (element.tabulate(point + [step, 0])[0] - element.tabulate(point - [step, 0])[0]) / (2 * step)
        dy = (element.tabulate(point + [0, step])[0] - element.tabulate(point - [0, step])[0]) / (2 * step)
        rot = dx[:, 0, 1] - dy[:, 0, 0]
        assert np.allclose(derivs[:, 0, 0], rot, atol=1e-7)

    def test_covariant_push_forward(self, annulus):
        """Whitney values on a physical cell equal J^{-T} times reference values"""
        space = build_space(annulus, 'trimmed_Pminus', 1, 1)
        point = np.array([[0.2, 0.2]])
        values, derivs = space.eval_basis(3, point)
        ref_values, ref_derivs = space.element.tabulate(point)
        jinv = annulus.jacobian_invs[3]
        signs = space.cell_dof_signs[3]
        expected = np.einsum('ba,kqb->kqa', jinv, ref_values) * signs[:, None, None]
        assert np.allclose(values, expected)
        assert np.allclose(derivs, ref_derivs * signs[:, None, None] / annulus.jacobian_dets[3])

    @pytest.mark.parametrize('cell', [-1, 24])
    def test_cell_index_out_of_range(self, annulus, cell):
        """Negative indices do not wrap; indices past the last cell raise"""
        space = build_space(annulus, 'trimmed_Pminus', 1, 1)
        with pytest.raises(InvalidParameterError):
            space.eval_basis(cell, np.array([[0.2, 0.2]]))


# ============================================================================
# DUALITY
# ============================================================================

class TestDuality:
    """DOF functionals applied to the basis give the identity"""

    @pytest.mark.parametrize('family, k, r, dim', all_elements())
    def test_dof_matrix_is_identity(self, family, k, r, dim):
        """DOF_i(phi_j) = delta_ij on the reference cell"""
        element = reference_element(family, k, r, dim)
        mesh = reference_mesh(dim)
        matrix = np.column_stack([
            evaluate_dofs(element, basis_function(element, j), mesh)[0] for j in range(element.n_local)
        ])
        assert np.allclose(matrix, np.eye(element.n_local), atol=1e-12)

    def test_local_derivative_is_incidence(self, cube):
        """P1 -> Whitney: D equals the signed vertex-edge incidence"""
        sigma_space, u_space = build_space_pair(cube, 1)
        d = derivative_matrix(sigma_space, u_space)
        assert np.allclose(d.toarray(), cube.incidence[0].toarray(), atol=1e-14)

    def test_derivative_needs_same_mesh(self, annulus):
        sigma_space, _ = build_space_pair(annulus, 1)
        _, other = build_space_pair(build_square_annulus(4), 1)
        with pytest.raises(MeshMismatchError):
            derivative_matrix(sigma_space, other)


# ============================================================================
# INTERPOLATION
# ============================================================================

class TestInterpolation:
    """Canonical interpolation"""

    def test_constant_into_lagrange(self, annulus):
        """1 -> all coefficients 1"""
        space = build_space(annulus, 'lagrange_P', 0, 2)
        field = canonical_interpolate(space, lambda x: np.ones(x.shape[:-1]))
        assert np.allclose(field.coeffs, 1.0)

    @pytest.mark.parametrize('mesh_builder, r, pairing', [
        (lambda: build_square_annulus(4), 1, 'trimmed'),
        (lambda: build_square_annulus(4), 2, 'trimmed'),
        (lambda: build_square_annulus(4), 2, 'full'),
        (lambda: build_unit_cube(2), 1, 'trimmed'),
    ])
    def test_commutes_with_gradient(self, mesh_builder, r, pairing):
        """D (interpolant of s) = interpolant of grad s for s of degree r"""
        mesh = mesh_builder()
        sigma_space, u_space = build_space_pair(mesh, r, pairing)
        coefficients = np.array([0.7, -1.3, 0.4])[:mesh.dim]

        def scalar(x):
            linear = 1.0 + x @ coefficients
            return linear + (r - 1) * x[..., 0] * x[..., 1]

        def gradient(x):
            grad = np.broadcast_to(coefficients, x.shape).copy()
            if r == 2:
                grad[..., 0] += x[..., 1]
                grad[..., 1] += x[..., 0]
            return grad

        d = derivative_matrix(sigma_space, u_space)
        lhs = d @ canonical_interpolate(sigma_space, scalar).coeffs
        rhs = canonical_interpolate(u_space, gradient).coeffs
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_interpolation_is_first_order(self):
        """Whitney interpolant of (sin pi x1, sin pi x2): error halves from h=1/8 to 1/16"""
        def exact(x, t=None):
            return np.sin(np.pi * x)

        errors = []
        for n in (8, 16):
            space = build_space(build_unit_square(n), 'trimmed_Pminus', 1, 1)
            errors.append(l2_error(canonical_interpolate(space, exact), exact))
        assert 1.7 <= errors[0] / errors[1] <= 2.3


# ============================================================================
# CONTINUITY AND SUBCOMPLEX
# ============================================================================

class TestConformity:
    """Tangential continuity and d V^0 inside V^1"""

    @pytest.mark.parametrize('family, k, r', [
        ('lagrange_P', 0, 2),
        ('trimmed_Pminus', 1, 1),
        ('trimmed_Pminus', 1, 2),
        ('full_P', 1, 1),
    ])
    def test_trace_continuity_across_edges(self, annulus, rng, family, k, r):
        """Values (k=0) or tangential components (k=1) agree from both sides"""
        space = build_space(annulus, family, k, r)
        field = Field(space, rng.standard_normal(space.dof_count))
        s = np.array([0.15, 0.5, 0.85])
        worst = 0.0
        for edge in annulus.interior_facets():
            a, b = annulus.vertices[annulus.edges[edge]]
            points = a + s[:, None] * (b - a)
            traces = []
            for cell in annulus.facet_neighbors[edge]:
                origin = annulus.vertices[annulus.cells[cell, 0]]
                ref = (points - origin) @ annulus.jacobian_invs[cell].T
                values, _ = evaluate_at(field, cell, ref)
                traces.append(values[:, 0] if k == 0 else values @ (b - a))
            worst = max(worst, np.abs(traces[0] - traces[1]).max())
        assert worst <= 1e-12

    @pytest.mark.parametrize('mesh_builder, r', [
        (lambda: build_square_annulus(4), 1),
        (lambda: build_square_annulus(4), 2),
        (lambda: build_unit_cube(2), 1),
    ])
    def test_gradients_are_representable(self, rng, mesh_builder, r):
        """grad of a random V^0 field equals the V^1 field D c at quadrature points"""
        sigma_space, u_space = build_space_pair(mesh_builder(), r)
        c = rng.standard_normal(sigma_space.dof_count)
        rule = quadrature(sigma_space.dim, 4)
        grad = evaluate_field(Field(sigma_space, c), rule, derivative=True)
        image = evaluate_field(Field(u_space, derivative_matrix(sigma_space, u_space) @ c), rule)
        assert np.abs(grad - image).max() <= 1e-12 * max(1.0, np.abs(grad).max())

    def test_field_length_checked(self, annulus):
        space = build_space(annulus, 'lagrange_P', 0, 1)
        with pytest.raises(ShapeMismatchError):
            Field(space, np.zeros(3))


if __name__ == "__main__":
    """Run tests with pytest"""
    pytest.main([__file__, "-v", "--tb=short"])
