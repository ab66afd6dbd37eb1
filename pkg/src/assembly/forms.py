"""
Global assembly of the bilinear and linear forms of the mixed method.

Element matrices are computed for all cells at once and scattered through a
coordinate-format buffer; conversion to csr sums duplicates, and symmetric
forms are averaged with their transpose so symmetry is exact.

Quadrature exactness: 2 * degree for matrices (exact for polynomial
integrands), 2r + 2 + settings.quadrature_extra_degree for loads and errors.
"""
import logging
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from src.assembly.quadrature import MAX_DEGREE, QuadratureRule, quadrature
from src.config import settings
from src.elements.spaces import FeSpace, Field, check_same_mesh, evaluate_field
from src.solvers.linsolve import factor

logger = logging.getLogger(__name__)


def matrix_degree(*spaces: FeSpace) -> int:
    return min(2 * max(s.degree for s in spaces), MAX_DEGREE)


def load_degree(space: FeSpace) -> int:
    """Exactness for non-polynomial data: 2r + 2 plus the configured extra"""
    return min(2 * space.poly_degree + 2 + settings.quadrature_extra_degree, MAX_DEGREE)


def _weights(space: FeSpace, rule: QuadratureRule) -> np.ndarray:
    """(n_cells, Q) physical quadrature weights"""
    return np.abs(space.mesh.jacobian_dets)[:, None] * rule.weights[None, :]


def _scatter(rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape, symmetric: bool = False) -> sp.csr_matrix:
    row_index = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    col_index = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    matrix = sp.coo_matrix((local.ravel(), (row_index, col_index)), shape=shape).tocsr()
    if symmetric:
        # duplicate summation order differs between (i, j) and (j, i)
        matrix = ((matrix + matrix.T) * 0.5).tocsr()
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def mass_matrix(space: FeSpace, degree: Optional[int] = None) -> sp.csr_matrix:
    """
    M[i, j] = <phi_j, phi_i>.

    Examples:
        P1 Lambda^0 on one triangle T -> |T| (1 + delta_ij) / 12
    """
    rule = quadrature(space.dim, degree if degree is not None else matrix_degree(space))
    values, _ = space.tabulate(rule)
    local = np.einsum('ciqv,cjqv,cq->cij', values, values, _weights(space, rule))
    matrix = _scatter(space.cell_dof_map, space.cell_dof_map, local,
                      (space.dof_count, space.dof_count), symmetric=True)
    logger.debug(f"Assembled mass matrix {matrix.shape} nnz={matrix.nnz} for {space!r}")
    return matrix


def mixed_derivative_matrix(sigma_space: FeSpace, u_space: FeSpace, degree: Optional[int] = None) -> sp.csr_matrix:
    """
    B[i, j] = <d tau_j, v_i>, shape (n_u, n_sigma).

    Raises:
        MeshMismatchError: spaces on different meshes
    """
    check_same_mesh(sigma_space, u_space)
    rule = quadrature(sigma_space.dim, degree if degree is not None else matrix_degree(sigma_space, u_space))
    _, grads = sigma_space.tabulate(rule)
    values, _ = u_space.tabulate(rule)
    local = np.einsum('ciqv,cjqv,cq->cij', values, grads, _weights(u_space, rule))
    return _scatter(u_space.cell_dof_map, sigma_space.cell_dof_map, local,
                    (u_space.dof_count, sigma_space.dof_count))


def curl_stiffness_matrix(u_space: FeSpace, degree: Optional[int] = None) -> sp.csr_matrix:
    """K[i, j] = <d phi_j, d phi_i> (rot in 2D, curl in 3D)"""
    rule = quadrature(u_space.dim, degree if degree is not None else matrix_degree(u_space))
    _, derivs = u_space.tabulate(rule)
    local = np.einsum('ciqv,cjqv,cq->cij', derivs, derivs, _weights(u_space, rule))
    return _scatter(u_space.cell_dof_map, u_space.cell_dof_map, local,
                    (u_space.dof_count, u_space.dof_count), symmetric=True)


def _sample(func: Callable, points: np.ndarray, t: Optional[float], value_size: int) -> np.ndarray:
    """Evaluate func(x[, t]) at (n_cells, Q, dim) points as (n_cells, Q, value_size)"""
    values = np.asarray(func(points) if t is None else func(points, t), dtype=float)
    if values.ndim == points.ndim - 1:
        values = values[..., None]
    return np.broadcast_to(values, points.shape[:-1] + (value_size,))


def load_vector(space: FeSpace, func: Callable, t: Optional[float] = None,
                degree: Optional[int] = None) -> np.ndarray:
    """
    F[i] = <f(t), phi_i>.

    Args:
        space: test space
        func: f(x, t) (or f(x) when t is None) on points (..., dim)
        t: time
        degree: quadrature exactness (default 2r + 2 + extra)
    """
    rule = quadrature(space.dim, degree if degree is not None else load_degree(space))
    values, _ = space.tabulate(rule)
    points = space.mesh.map_to_physical(rule.ref_points)
    f = _sample(func, points, t, values.shape[-1])
    local = np.einsum('ciqv,cqv,cq->ci', values, f, _weights(space, rule))
    return np.bincount(space.cell_dof_map.ravel(), weights=local.ravel(), minlength=space.dof_count)


def l2_projection(space: FeSpace, func: Callable, t: Optional[float] = None, mass_factor=None) -> Field:
    """
    L2 projection P_h f: M c = F.

    Args:
        mass_factor: optional factorization of the mass matrix to reuse
    """
    if mass_factor is None:
        mass_factor = factor(mass_matrix(space), label='mass')
    return Field(space, mass_factor.solve(load_vector(space, func, t)))


def inner_product(a: Field, b: Field, mass: Optional[sp.spmatrix] = None) -> float:
    """<a, b> in L2, through the mass matrix"""
    if mass is None:
        mass = mass_matrix(a.space)
    return float(a.coeffs @ (mass @ b.coeffs))


def field_norm(f: Field, derivative: bool = False, degree: Optional[int] = None) -> float:
    """||f|| or ||d f|| by quadrature"""
    if degree is None:
        degree = matrix_degree(f.space)
    rule = quadrature(f.space.dim, degree)
    values = evaluate_field(f, rule, derivative=derivative)
    return float(np.sqrt(np.einsum('cqv,cqv,cq->', values, values, _weights(f.space, rule))))


def l2_error(f: Optional[Field], exact: Callable, t: Optional[float] = None, derivative: bool = False,
             space: Optional[FeSpace] = None, degree: Optional[int] = None) -> float:
    """
    ||exact - f|| (or of d f against an exact derivative) by quadrature.

    Args:
        f: discrete form, or None to measure ||exact|| on `space`
        exact: exact(x, t) (or exact(x) when t is None)
        derivative: compare d f against `exact`
    """
    space = f.space if f is not None else space
    rule = quadrature(space.dim, degree if degree is not None else load_degree(space))
    points = space.mesh.map_to_physical(rule.ref_points)
    if f is not None:
        discrete = evaluate_field(f, rule, derivative=derivative)
    else:
        size = space.element.derivative_size if derivative else space.element.value_size
        discrete = np.zeros(points.shape[:-1] + (size,))
    diff = _sample(exact, points, t, discrete.shape[-1]) - discrete
    return float(np.sqrt(np.einsum('cqv,cqv,cq->', diff, diff, _weights(space, rule))))
