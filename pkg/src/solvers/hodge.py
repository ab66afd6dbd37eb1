"""
Discrete Hodge Laplacian on a (V^{k-1}, V^k) space pair.

Coefficient identities used throughout:
    d*_h v:   M_sigma s = B^T v
    L_h v:    M_u (L_h v) = K v + B M_sigma^{-1} B^T v
with B[i, j] = <d tau_j, v_i> and K[i, j] = <d phi_j, d phi_i>.

Harmonic forms are found by inverse subspace iteration on the saddle form
of L_h + s with a unit shift s, so the iterated matrix stays nonsingular
while harmonic fields are amplified most. The subspace has one more vector
than the expected dimension; the extra Ritz value backs the gap test.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from src.assembly.forms import (
    curl_stiffness_matrix,
    field_norm,
    load_vector,
    mass_matrix,
    mixed_derivative_matrix,
)
from src.config import settings
from src.elements.spaces import FeSpace, Field, check_same_mesh, derivative_matrix
from src.exceptions import TopologyMismatchError, UnsupportedConfigurationError
from src.geometry.topology import betti_numbers
from src.solvers.linsolve import BlockSaddleSystem, Factorization, factor

logger = logging.getLogger(__name__)


@dataclass
class HarmonicBasis:
    """
    M-orthonormal discrete harmonic fields.

    Attributes:
        fields: basis fields in V^k
        eigenvalues: Ritz values of L_h, harmonic ones first, plus the gap value
        d_norms: ||d q|| per field
        dstar_norms: ||d*_h q|| per field
    """

    fields: List[Field]
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dstar_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dim(self) -> int:
        return len(self.fields)

    def matrix(self, n: int) -> np.ndarray:
        """(n, dim) coefficient columns"""
        if not self.fields:
            return np.zeros((n, 0))
        return np.column_stack([q.coeffs for q in self.fields])


@dataclass
class EllipticProjectionResult:
    """
    Solution of the elliptic projection system.

    Attributes:
        sigma_hat: projection in V^{k-1}
        u_hat: projection in V^k
        p_hat: harmonic coefficients (one per basis field)
        p_norm: ||p_hat||, expected to decay like h^r
        residual: relative residual of the bordered system
    """

    sigma_hat: Field
    u_hat: Field
    p_hat: np.ndarray
    p_norm: float
    residual: float


@dataclass
class HodgeDecomposition:
    """M-orthogonal split v = exact + harmonic + coexact"""

    exact: Field
    harmonic: Field
    coexact: Field


class HodgeComplex:
    """
    Space pair with assembled matrices and lazily built factorizations.

    Attributes:
        sigma_space, u_space: V^{k-1} and V^k on one mesh
        mass_sigma, mass_u: mass matrices
        coupling: B, (n_u, n_sigma)
        stiffness: K
    """

    def __init__(self, sigma_space: FeSpace, u_space: FeSpace):
        check_same_mesh(sigma_space, u_space)
        if sigma_space.form_degree + 1 != u_space.form_degree:
            raise UnsupportedConfigurationError("Space pair must have consecutive form degrees")

        self.sigma_space = sigma_space
        self.u_space = u_space
        self.mass_sigma = mass_matrix(sigma_space)
        self.mass_u = mass_matrix(u_space)
        self.coupling = mixed_derivative_matrix(sigma_space, u_space)
        self.stiffness = curl_stiffness_matrix(u_space)

        self._derivative: Optional[sp.csr_matrix] = None
        self._mass_sigma_factor: Optional[Factorization] = None
        self._mass_u_factor: Optional[Factorization] = None
        self._harmonic: Optional[HarmonicBasis] = None
        self._galerkin: Optional[Tuple[BlockSaddleSystem, Factorization]] = None

        logger.info(
            f"Hodge complex on {sigma_space.mesh!r}: n_sigma={sigma_space.dof_count} n_u={u_space.dof_count}"
        )

    @property
    def mesh(self):
        return self.u_space.mesh

    @property
    def derivative(self) -> sp.csr_matrix:
        """Coefficient matrix D of d: V^{k-1} -> V^k"""
        if self._derivative is None:
            self._derivative = derivative_matrix(self.sigma_space, self.u_space)
        return self._derivative

    @property
    def mass_sigma_factor(self) -> Factorization:
        if self._mass_sigma_factor is None:
            self._mass_sigma_factor = factor(self.mass_sigma, label='M_sigma')
        return self._mass_sigma_factor

    @property
    def mass_u_factor(self) -> Factorization:
        if self._mass_u_factor is None:
            self._mass_u_factor = factor(self.mass_u, label='M_u')
        return self._mass_u_factor

    # ------------------------------------------------------------------
    # Operators
    # ------------------------------------------------------------------

    def dstar(self, coeffs: np.ndarray) -> np.ndarray:
        return self.mass_sigma_factor.solve(self.coupling.T @ coeffs)

    def laplacian_form(self, coeffs: np.ndarray) -> np.ndarray:
        """M_u L_h v = K v + B M_sigma^{-1} B^T v (columns allowed)"""
        if coeffs.ndim == 1:
            return self.stiffness @ coeffs + self.coupling @ self.dstar(coeffs)
        return np.column_stack([self.laplacian_form(c) for c in coeffs.T])

    def harmonic_basis(self, expected_dim: Optional[int] = None) -> HarmonicBasis:
        if self._harmonic is None or (expected_dim is not None and self._harmonic.dim != expected_dim):
            if expected_dim is None:
                expected_dim = betti_numbers(self.mesh)[self.u_space.form_degree]
            self._harmonic = _harmonic_iteration(self, expected_dim)
        return self._harmonic

    def harmonic_columns(self) -> Tuple[np.ndarray, np.ndarray]:
        """(Q, H = M_u Q) for the current harmonic basis"""
        q = self.harmonic_basis().matrix(self.u_space.dof_count)
        return q, np.asarray(self.mass_u @ q)

    def galerkin_system(self) -> Tuple[BlockSaddleSystem, Factorization]:
        """[[-M_sigma, B^T, 0], [B, K, H], [0, H^T, 0]] and its factorization"""
        if self._galerkin is None:
            _, h = self.harmonic_columns()
            system = BlockSaddleSystem(self.mass_sigma, self.coupling, self.stiffness, h)
            self._galerkin = (system, factor(system.assemble(), label='Hodge-Laplace saddle'))
        return self._galerkin


def hodge_complex(sigma_space: FeSpace, u_space: FeSpace) -> HodgeComplex:
    """Cached HodgeComplex of a space pair"""
    cache = sigma_space.__dict__.setdefault('_hodge_complexes', [])
    for other, complex_ in cache:
        if other is u_space:
            return complex_
    complex_ = HodgeComplex(sigma_space, u_space)
    cache.append((u_space, complex_))
    return complex_


def _m_orthonormalize(x: np.ndarray, mass) -> np.ndarray:
    """Gram-Schmidt in the M inner product, applied twice"""
    x = x.copy()
    for j in range(x.shape[1]):
        for _ in range(2):
            for i in range(j):
                x[:, j] -= (x[:, i] @ (mass @ x[:, j])) * x[:, i]
        x[:, j] /= np.sqrt(x[:, j] @ (mass @ x[:, j]))
    return x


def _harmonic_residuals(complex_: HodgeComplex, columns: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """||dq|| by quadrature and ||d*_h q||_M for each coefficient column"""
    d_norms, dstar_norms = [], []
    for coeffs in columns.T:
        s = complex_.dstar(coeffs)
        d_norms.append(field_norm(Field(complex_.u_space, coeffs), derivative=True))
        dstar_norms.append(float(np.sqrt(max(s @ (complex_.mass_sigma @ s), 0.0))))
    return np.array(d_norms), np.array(dstar_norms)


def _harmonic_iteration(complex_: HodgeComplex, expected_dim: int) -> HarmonicBasis:
    n_u = complex_.u_space.dof_count
    n_sigma = complex_.sigma_space.dof_count
    n_vectors = min(expected_dim + 1, n_u)
    mass = complex_.mass_u

    shifted = BlockSaddleSystem(
        complex_.mass_sigma, complex_.coupling, complex_.stiffness + settings.harmonic_shift * mass
    )
    shifted_factor = factor(shifted.assemble(), label='shifted Hodge-Laplace saddle')

    rng = np.random.default_rng(settings.random_seed)
    x = _m_orthonormalize(rng.standard_normal((n_u, n_vectors)), mass)
    floor = settings.harmonic_tolerance
    previous = None
    ritz = np.zeros(n_vectors)

    for iteration in range(1, settings.harmonic_max_iterations + 1):
        rhs = np.vstack([np.zeros((n_sigma, n_vectors)), np.asarray(mass @ x)])
        y = np.column_stack([shifted_factor.solve(rhs[:, j]) for j in range(n_vectors)])[n_sigma:]
        y = _m_orthonormalize(y, mass)

        # Rayleigh-Ritz; eigh normalises the Ritz vectors in the M inner product
        stiff = y.T @ complex_.laplacian_form(y)
        gram = y.T @ (mass @ y)
        ritz, vectors = la.eigh(0.5 * (stiff + stiff.T), 0.5 * (gram + gram.T))
        x = y @ vectors

        # harmonic fields are judged by their own d and d*_h norms; the
        # Ritz value above them only needs to settle for the gap test
        d_norms, dstar_norms = _harmonic_residuals(complex_, x[:, :expected_dim])
        resolved = not expected_dim or max(d_norms.max(), dstar_norms.max()) <= 0.1 * floor
        settled = previous is not None and abs(ritz[-1] - previous) <= 1e-6 * max(abs(ritz[-1]), floor)
        previous = ritz[-1]
        if resolved and settled and iteration >= 3:
            break
    logger.debug(f"Harmonic iteration: {iteration} iterations, Ritz values {ritz}")

    if expected_dim < n_vectors:
        below = ritz[expected_dim - 1] if expected_dim > 0 else 0.0
        if ritz[expected_dim] < settings.harmonic_gap_factor * max(below, floor):
            raise TopologyMismatchError(
                f"No spectral gap after {expected_dim} harmonic fields: Ritz values {ritz}"
            )

    fields = [Field(complex_.u_space, x[:, j].copy()) for j in range(expected_dim)]
    if expected_dim and max(d_norms.max(), dstar_norms.max()) > floor:
        raise TopologyMismatchError(
            f"Harmonic fields not resolved: ||dq||={d_norms.max():.3e} ||d*q||={dstar_norms.max():.3e}"
        )

    logger.info(f"Harmonic basis of dimension {expected_dim} (gap value {ritz[min(expected_dim, len(ritz) - 1)]:.4g})")
    return HarmonicBasis(fields=fields, eigenvalues=ritz, d_norms=d_norms, dstar_norms=dstar_norms)


# ----------------------------------------------------------------------
# Operations on space pairs
# ----------------------------------------------------------------------


def dstar_h(sigma_space: FeSpace, u_space: FeSpace, v: Field) -> Field:
    """
    Discrete codifferential: <d*_h v, tau> = <v, d tau> for all tau in V^{k-1}.

    Returns:
        Field s in V^{k-1} with M_sigma s = B^T v
    """
    complex_ = hodge_complex(sigma_space, u_space)
    return Field(sigma_space, complex_.dstar(v.coeffs))


def harmonic_basis(sigma_space: FeSpace, u_space: FeSpace, expected_dim: Optional[int] = None) -> HarmonicBasis:
    """
    Discrete harmonic k-forms.

    Args:
        expected_dim: Betti number b_k; computed from the mesh when omitted

    Raises:
        TopologyMismatchError: the spectrum shows no gap after expected_dim
            near-zero values, or the fields are not harmonic to tolerance

    Examples:
        unit cube, k=1 -> dim 0; square annulus, k=1 -> dim 1
    """
    return hodge_complex(sigma_space, u_space).harmonic_basis(expected_dim)


def hodge_laplacian_solve(sigma_space: FeSpace, u_space: FeSpace, f: Callable,
                          t: Optional[float] = None) -> Tuple[Field, Field, Field]:
    """
    Galerkin solve of the mixed Hodge Laplace problem with harmonic constraint.

    Finds (sigma_h, u_h, p_h) with
        <sigma, tau> - <d tau, u> = 0
        <d sigma, v> + <du, dv> + <p, v> = <f, v>
        <u, q> = 0 for every harmonic q

    Returns:
        (sigma_h, u_h, p_h) fields; p_h is the harmonic part of f
    """
    complex_ = hodge_complex(sigma_space, u_space)
    system, factorization = complex_.galerkin_system()
    rhs = np.concatenate([
        np.zeros(system.n_sigma),
        load_vector(u_space, f, t),
        np.zeros(system.n_harmonic),
    ])
    sigma, u, p = system.split(factorization.solve(rhs))
    q, _ = complex_.harmonic_columns()
    return Field(sigma_space, sigma), Field(u_space, u), Field(u_space, q @ p)


def elliptic_projection(sigma_space: FeSpace, u_space: FeSpace, u: Callable, lu: Callable,
                        t: Optional[float] = None) -> EllipticProjectionResult:
    """
    Elliptic projection of an exact solution:
        <sigma_hat, tau> - <d tau, u_hat> = 0
        <d sigma_hat, v> + <d u_hat, dv> + <p_hat, v> = <Lu, v>
        <u_hat, q> = <u, q>

    Args:
        u, lu: exact field and L u as callables of (x, t) (or x when t is None)
    """
    complex_ = hodge_complex(sigma_space, u_space)
    system, factorization = complex_.galerkin_system()
    q, _ = complex_.harmonic_columns()
    rhs = np.concatenate([
        np.zeros(system.n_sigma),
        load_vector(u_space, lu, t),
        q.T @ load_vector(u_space, u, t),
    ])
    solution = factorization.solve(rhs)
    sigma, u_hat, p = system.split(solution)

    rhs_norm = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(factorization.matrix @ solution - rhs) / rhs_norm) if rhs_norm > 0 else 0.0
    p_norm = float(np.linalg.norm(p))
    logger.debug(f"Elliptic projection: residual={residual:.3e} ||p_hat||={p_norm:.3e}")
    return EllipticProjectionResult(
        sigma_hat=Field(sigma_space, sigma),
        u_hat=Field(u_space, u_hat),
        p_hat=p,
        p_norm=p_norm,
        residual=residual,
    )


def apply_Lh(sigma_space: FeSpace, u_space: FeSpace, v: Field) -> Field:
    """L_h v = d*_h d v + d d*_h v, via M_u (L_h v) = K v + B M_sigma^{-1} B^T v"""
    complex_ = hodge_complex(sigma_space, u_space)
    return Field(u_space, complex_.mass_u_factor.solve(complex_.laplacian_form(v.coeffs)))


def hodge_decomposition(sigma_space: FeSpace, u_space: FeSpace, v: Field) -> HodgeDecomposition:
    """
    Split v into d V^{k-1}, harmonic and coexact parts, mutually M-orthogonal.

    The exact part is D tau with (D^T M_u D) tau = B^T v; the constant
    kernel of d on V^{k-1} is removed by fixing tau at DOF 0 (connected meshes).
    """
    complex_ = hodge_complex(sigma_space, u_space)
    derivative = complex_.derivative
    normal = (derivative.T @ complex_.mass_u @ derivative).tocsc()
    rhs = complex_.coupling.T @ v.coeffs

    tau = np.zeros(sigma_space.dof_count)
    tau[1:] = factor(normal[1:, 1:], label='grounded D^T M D').solve(rhs[1:])
    exact = derivative @ tau

    q, h = complex_.harmonic_columns()
    harmonic = q @ (h.T @ v.coeffs)
    coexact = v.coeffs - exact - harmonic
    return HodgeDecomposition(
        exact=Field(u_space, exact), harmonic=Field(u_space, harmonic), coexact=Field(u_space, coexact)
    )


def semidiscrete_rhs(sigma_space: FeSpace, u_space: FeSpace, f: Callable, t: float) -> Field:
    """P_h f(t), the right-hand side of u_h' + L_h u_h = P_h f"""
    complex_ = hodge_complex(sigma_space, u_space)
    return Field(u_space, complex_.mass_u_factor.solve(load_vector(u_space, f, t)))
