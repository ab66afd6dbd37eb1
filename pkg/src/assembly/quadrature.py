"""
Quadrature on reference simplices.

Degrees 0-2 use the classical symmetric rules; higher degrees use
collapsed-coordinate (conical product) Gauss-Jacobi rules, which have
positive weights and interior points for every degree up to 8.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, factorial
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi

from src.exceptions import UnsupportedConfigurationError

MAX_DEGREE = 8


@dataclass(frozen=True)
class QuadratureRule:
    """
    Quadrature rule on the reference simplex.

    Attributes:
        dim: simplex dimension
        points: (Q, dim+1) barycentric coordinates
        weights: (Q,) weights summing to the reference measure 1/dim!
        exactness_degree: total polynomial degree integrated exactly
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def ref_points(self) -> np.ndarray:
        """(Q, dim) reference coordinates (x_i = lambda_i)"""
        return self.points[:, 1:]

    def __len__(self) -> int:
        return len(self.weights)


def _freeze(*arrays: np.ndarray) -> None:
    for array in arrays:
        array.setflags(write=False)


def _from_reference(dim: int, ref: np.ndarray, weights: np.ndarray, degree: int) -> QuadratureRule:
    bary = np.column_stack([1.0 - ref.sum(axis=1), ref])
    _freeze(bary, weights)
    return QuadratureRule(dim=dim, points=bary, weights=weights, exactness_degree=degree)


def _unit_interval(n: int) -> Tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (1.0 + t), 0.5 * w


def _unit_jacobi(n: int, alpha: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi for the weight (1-u)^alpha on [0, 1]"""
    t, w = roots_jacobi(n, alpha, 0)
    return 0.5 * (1.0 + t), w / 2.0 ** (alpha + 1)


def _conical_product(dim: int, degree: int) -> QuadratureRule:
    n = max(1, ceil((degree + 1) / 2))
    if dim == 2:
        u, wu = _unit_jacobi(n, 1)
        v, wv = _unit_interval(n)
        U, V = np.meshgrid(u, v, indexing='ij')
        W = np.outer(wu, wv)
        ref = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
        return _from_reference(2, ref, W.ravel(), degree)

    u, wu = _unit_jacobi(n, 2)
    v, wv = _unit_jacobi(n, 1)
    w, ww = _unit_interval(n)
    U, V, Wc = np.meshgrid(u, v, w, indexing='ij')
    weights = np.einsum('i,j,k->ijk', wu, wv, ww).ravel()
    ref = np.column_stack([
        U.ravel(),
        (V * (1.0 - U)).ravel(),
        (Wc * (1.0 - U) * (1.0 - V)).ravel(),
    ])
    return _from_reference(3, ref, weights, degree)


@lru_cache(maxsize=None)
def quadrature(dim: int, exactness_degree: int) -> QuadratureRule:
    """
    Quadrature rule on the reference triangle (dim=2) or tetrahedron (dim=3).

    Args:
        dim: 2 or 3
        exactness_degree: requested polynomial exactness, 0..8

    Returns:
        a rule of at least the requested exactness

    Raises:
        UnsupportedConfigurationError: degree above 8 or unsupported dimension
    """
    if dim not in (2, 3):
        raise UnsupportedConfigurationError(f"No simplex quadrature for dim={dim}")
    if exactness_degree < 0 or exactness_degree > MAX_DEGREE:
        raise UnsupportedConfigurationError(
            f"Quadrature degree {exactness_degree} not supported (max {MAX_DEGREE})"
        )

    measure = 1.0 / factorial(dim)
    if exactness_degree <= 1:
        ref = np.full((1, dim), 1.0 / (dim + 1))
        return _from_reference(dim, ref, np.array([measure]), 1)

    if exactness_degree == 2:
        if dim == 2:
            ref = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        else:
            a, b = 0.5854101966249685, 0.1381966011250105
            ref = np.array([[b, b, b], [a, b, b], [b, a, b], [b, b, a]])
        return _from_reference(dim, ref, np.full(dim + 1, measure / (dim + 1)), 2)

    return _conical_product(dim, exactness_degree)


@lru_cache(maxsize=None)
def edge_quadrature(exactness_degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre rule on [0, 1].

    Returns:
        (points, weights) with weights summing to 1
    """
    s, w = _unit_interval(max(1, ceil((exactness_degree + 1) / 2)))
    _freeze(s, w)
    return s, w
