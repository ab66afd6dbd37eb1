"""
Hodge Laplacian Test Suite

Tests the discrete operators built on a (V^0, V^1) pair:
1. Codifferential d*_h and its adjointness
2. Harmonic forms and their dimension
3. Galerkin Hodge-Laplace solve with the harmonic constraint
4. Elliptic projection
5. L_h, the discrete Hodge decomposition and P_h f
"""

import numpy as np
import pytest
import scipy.linalg as la

from src.assembly.forms import l2_error, l2_projection, load_vector
from src.elements.reference import reference_mesh
from src.elements.spaces import Field, build_space_pair
from src.exceptions import TopologyMismatchError
from src.geometry import build_square_annulus, build_unit_cube, build_unit_square
from src.services.mms import get_case
from src.solvers.hodge import (
    apply_Lh,
    dstar_h,
    elliptic_projection,
    harmonic_basis,
    hodge_complex,
    hodge_decomposition,
    hodge_laplacian_solve,
    semidiscrete_rhs,
)


# ============================================================================
# FIXTURES
# ============================================================================

@pytest.fixture
def annulus_pair():
    """Lowest-order pair on the n=4 annulus"""
    return build_space_pair(build_square_annulus(4), 1)


@pytest.fixture
def rng():
    return np.random.default_rng(5)


@pytest.fixture
def steady():
    return get_case('square2d_steady')


def zero_vector(x, t=None):
    return np.zeros(x.shape)


# ============================================================================
# CODIFFERENTIAL
# ============================================================================

class TestCodifferential:
    """M_sigma s = B^T v"""

    def test_orthogonal_to_gradients_gives_zero(self, annulus_pair):
        """v with B^T v = 0 -> d*_h v = 0"""
        sigma_space, u_space = annulus_pair
        coupling = hodge_complex(sigma_space, u_space).coupling.toarray()
        v = la.null_space(coupling.T)[:, 0]
        s = dstar_h(sigma_space, u_space, Field(u_space, v))
        assert np.abs(s.coeffs).max() <= 1e-10

    def test_single_triangle_dense_oracle(self):
        """One Whitney edge function on the reference triangle"""
        sigma_space, u_space = build_space_pair(reference_mesh(2), 1)
        complex_ = hodge_complex(sigma_space, u_space)
        e = np.array([0.0, 1.0, 0.0])
        expected = np.linalg.solve(complex_.mass_sigma.toarray(), complex_.coupling.toarray().T @ e)
        s = dstar_h(sigma_space, u_space, Field(u_space, e))
        assert np.allclose(s.coeffs, expected, atol=1e-13)

    def test_adjointness(self, annulus_pair, rng):
        """<d*_h v, tau> = <v, d tau> for every basis tau"""
        sigma_space, u_space = annulus_pair
        complex_ = hodge_complex(sigma_space, u_space)
        v = rng.standard_normal(u_space.dof_count)
        s = dstar_h(sigma_space, u_space, Field(u_space, v)).coeffs
        lhs = complex_.mass_sigma @ s
        rhs = complex_.coupling.T @ v
        assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()

    def test_complex_is_cached(self, annulus_pair):
        """Matrices of a pair are assembled once"""
        assert hodge_complex(*annulus_pair) is hodge_complex(*annulus_pair)


# ============================================================================
# HARMONIC FORMS
# ============================================================================

class TestHarmonicForms:
    """Discrete harmonic 1-forms"""

    def test_cube_has_none(self):
        """Unit cube: empty basis"""
        basis = harmonic_basis(*build_space_pair(build_unit_cube(2), 1))
        assert basis.dim == 0

    def test_square_has_none(self):
        basis = harmonic_basis(*build_space_pair(build_unit_square(4), 1))
        assert basis.dim == 0

    @pytest.mark.parametrize('r', [1, 2])
    def test_annulus_has_one(self, r):
        """One M-normalized field with ||dq|| and ||d*_h q|| below 1e-8"""
        sigma_space, u_space = build_space_pair(build_square_annulus(4), r)
        basis = harmonic_basis(sigma_space, u_space)
        assert basis.dim == 1
        q = basis.fields[0].coeffs
        mass = hodge_complex(sigma_space, u_space).mass_u
        assert q @ (mass @ q) == pytest.approx(1.0, abs=1e-12)
        assert basis.d_norms.max() <= 1e-8
        assert basis.dstar_norms.max() <= 1e-8

    def test_gap_above_harmonic_value(self, annulus_pair):
        """The next Ritz value is far from the harmonic one"""
        basis = harmonic_basis(*annulus_pair)
        assert basis.eigenvalues[1] >= 1e3 * max(basis.eigenvalues[0], 1e-8)

    def test_wrong_dimension_is_rejected(self, annulus_pair):
        """Asking for no harmonic fields on the annulus fails the gap test"""
        with pytest.raises(TopologyMismatchError):
            harmonic_basis(*annulus_pair, expected_dim=0)

    def test_too_many_fields_rejected(self, annulus_pair):
        with pytest.raises(TopologyMismatchError):
            harmonic_basis(*annulus_pair, expected_dim=2)


# ============================================================================
# GALERKIN SOLVE
# ============================================================================

class TestHodgeLaplacianSolve:
    """Mixed Hodge-Laplace problem with harmonic constraint"""

    def test_zero_source(self, annulus_pair):
        sigma, u, p = hodge_laplacian_solve(*annulus_pair, zero_vector)
        assert not np.any(sigma.coeffs) and not np.any(u.coeffs) and not np.any(p.coeffs)

    def test_harmonic_source_goes_to_p(self, annulus_pair):
        """Load M_u q -> u = 0, sigma = 0, p = q"""
        complex_ = hodge_complex(*annulus_pair)
        system, factorization = complex_.galerkin_system()
        q, h = complex_.harmonic_columns()
        rhs = np.concatenate([np.zeros(system.n_sigma), h[:, 0], np.zeros(system.n_harmonic)])
        sigma, u, p = system.split(factorization.solve(rhs))
        assert np.abs(sigma).max() <= 1e-9
        assert np.abs(u).max() <= 1e-9
        assert p == pytest.approx([1.0], abs=1e-9)

    def test_square_first_order(self, steady):
        """f = pi^2 u: ||u - u_h|| halves under refinement for r=1"""
        errors = []
        for n in (8, 16):
            sigma_space, u_space = build_space_pair(build_unit_square(n), 1)
            _, u_h, _ = hodge_laplacian_solve(sigma_space, u_space, steady.source_f)
            errors.append(l2_error(u_h, steady.exact_u))
        assert 0.85 <= np.log2(errors[0] / errors[1]) <= 1.15

    def test_solution_satisfies_constraint(self):
        """<u_h, q> = 0 on the annulus"""
        sigma_space, u_space = build_space_pair(build_square_annulus(8), 1)
        source = lambda x, t: np.stack([np.cos(3 * x[..., 1]), x[..., 0] ** 2], axis=-1)
        _, u_h, _ = hodge_laplacian_solve(sigma_space, u_space, source, t=0.0)
        _, h = hodge_complex(sigma_space, u_space).harmonic_columns()
        assert np.abs(h.T @ u_h.coeffs).max() <= 1e-10


# ============================================================================
# ELLIPTIC PROJECTION
# ============================================================================

class TestEllipticProjection:
    """(sigma_hat, u_hat, p_hat) of an exact solution"""

    def test_zero_data(self, annulus_pair):
        result = elliptic_projection(*annulus_pair, zero_vector, zero_vector)
        assert not np.any(result.u_hat.coeffs)
        assert not np.any(result.sigma_hat.coeffs)
        assert result.p_norm == 0.0

    def test_annulus_harmonic_moments(self, annulus_pair):
        """<u_hat, q> = <u, q> and the system residual is below 1e-9"""
        sigma_space, u_space = annulus_pair
        case = get_case('annulus2d')
        result = elliptic_projection(sigma_space, u_space, case.exact_u, case.lu, t=0.5)
        q, h = hodge_complex(sigma_space, u_space).harmonic_columns()
        exact = q.T @ load_vector(u_space, case.exact_u, 0.5)
        assert np.allclose(h.T @ result.u_hat.coeffs, exact, atol=1e-9 * max(1.0, np.abs(exact).max()))
        assert result.residual <= 1e-9

    @pytest.mark.parametrize('r', [1, 2])
    def test_square_rate(self, steady, r):
        """||u - u_hat|| decays like h^r"""
        errors = []
        for n in (4, 8, 16):
            sigma_space, u_space = build_space_pair(build_unit_square(n), r)
            result = elliptic_projection(sigma_space, u_space, steady.exact_u, steady.lu)
            errors.append(l2_error(result.u_hat, steady.exact_u))
        rate = np.log2(errors[-2] / errors[-1])
        assert r - 0.2 <= rate <= r + 0.2

    def test_initial_data_of_linear_in_time_cases(self, annulus_pair):
        """u = 0 at t = 0 projects to zero"""
        case = get_case('annulus2d')
        result = elliptic_projection(*annulus_pair, case.exact_u, case.lu, t=0.0)
        assert np.abs(result.u_hat.coeffs).max() == 0.0


# ============================================================================
# L_h AND DECOMPOSITION
# ============================================================================

class TestLaplacianAndDecomposition:
    """L_h, Hodge decomposition, P_h f"""

    def test_harmonic_in_kernel(self, annulus_pair):
        """L_h q = 0"""
        q = harmonic_basis(*annulus_pair).fields[0]
        assert np.abs(apply_Lh(*annulus_pair, q).coeffs).max() <= 1e-6

    def test_energy_identity(self, annulus_pair, rng):
        """<L_h v, v> = ||dv||^2 + ||d*_h v||^2"""
        sigma_space, u_space = annulus_pair
        complex_ = hodge_complex(sigma_space, u_space)
        v = Field(u_space, rng.standard_normal(u_space.dof_count))
        lv = apply_Lh(sigma_space, u_space, v)
        s = dstar_h(sigma_space, u_space, v).coeffs
        lhs = lv.coeffs @ (complex_.mass_u @ v.coeffs)
        rhs = v.coeffs @ (complex_.stiffness @ v.coeffs) + s @ (complex_.mass_sigma @ s)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_gradient_energy(self, annulus_pair, rng):
        """v = d tau -> <L_h v, v> = ||d*_h v||^2"""
        sigma_space, u_space = annulus_pair
        complex_ = hodge_complex(sigma_space, u_space)
        v = Field(u_space, complex_.derivative @ rng.standard_normal(sigma_space.dof_count))
        s = dstar_h(sigma_space, u_space, v).coeffs
        lhs = apply_Lh(sigma_space, u_space, v).coeffs @ (complex_.mass_u @ v.coeffs)
        assert lhs == pytest.approx(s @ (complex_.mass_sigma @ s), rel=1e-10)

    def test_self_adjoint(self, annulus_pair, rng):
        """<L_h v, w> = <v, L_h w>"""
        sigma_space, u_space = annulus_pair
        mass = hodge_complex(sigma_space, u_space).mass_u
        v = Field(u_space, rng.standard_normal(u_space.dof_count))
        w = Field(u_space, rng.standard_normal(u_space.dof_count))
        a = apply_Lh(sigma_space, u_space, v).coeffs @ (mass @ w.coeffs)
        b = v.coeffs @ (mass @ apply_Lh(sigma_space, u_space, w).coeffs)
        assert a == pytest.approx(b, rel=1e-10)

    def test_decomposition(self, annulus_pair, rng):
        """Parts reassemble v, are M-orthogonal, and each has its defining property"""
        sigma_space, u_space = annulus_pair
        complex_ = hodge_complex(sigma_space, u_space)
        mass = complex_.mass_u
        v = Field(u_space, rng.standard_normal(u_space.dof_count))
        parts = hodge_decomposition(sigma_space, u_space, v)

        total = parts.exact.coeffs + parts.harmonic.coeffs + parts.coexact.coeffs
        assert np.abs(total - v.coeffs).max() <= 1e-10
        scale = v.coeffs @ (mass @ v.coeffs)
        size = np.abs(v.coeffs).max()
        for a, b in [(parts.exact, parts.harmonic), (parts.exact, parts.coexact), (parts.harmonic, parts.coexact)]:
            assert abs(a.coeffs @ (mass @ b.coeffs)) <= 1e-8 * scale

        # coexact part is orthogonal to every gradient
        assert np.abs(complex_.coupling.T @ parts.coexact.coeffs).max() <= 1e-8 * size
        # exact part has no rot
        assert np.abs(complex_.stiffness @ parts.exact.coeffs).max() <= 1e-10 * size

    def test_semidiscrete_rhs_is_l2_projection(self, annulus_pair):
        """P_h f equals the mass-matrix projection of f"""
        case = get_case('annulus2d')
        sigma_space, u_space = annulus_pair
        rhs = semidiscrete_rhs(sigma_space, u_space, case.source_f, 0.3)
        projected = l2_projection(u_space, case.source_f, 0.3)
        assert np.allclose(rhs.coeffs, projected.coeffs, atol=1e-12)


if __name__ == "__main__":
    """Run tests with pytest"""
    pytest.main([__file__, "-v", "--tb=short"])
