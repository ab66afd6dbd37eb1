"""
Direct sparse factorization and the symmetric saddle-point layout.

Saddle systems are stored as

    [[-M_sigma, B^T, 0],
     [ B,       C,   H],
     [ 0,       H^T, 0]]

with the first block row negated so the matrix is symmetric. Factorization
uses SuperLU with partial pivoting; a factorization is immutable and may be
shared between threads solving different right-hand sides.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from src.config import settings
from src.exceptions import ShapeMismatchError, SingularMatrixError, LinearSolverError

logger = logging.getLogger(__name__)


class Factorization:
    """
    LU factorization of a square sparse matrix.

    Attributes:
        matrix: the factored matrix (csc)
        shape: matrix shape
        norm_max: largest absolute entry of the matrix
    """

    def __init__(self, matrix, label: str = 'matrix'):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ShapeMismatchError(f"Cannot factor non-square {label} of shape {matrix.shape}")

        self.matrix = matrix
        self.shape = matrix.shape
        self.label = label
        self.norm_max = float(abs(matrix).max()) if matrix.nnz else 0.0
        if self.norm_max == 0.0:
            raise SingularMatrixError(f"{label} is identically zero")

        try:
            self._lu = spla.splu(matrix)
        except RuntimeError as e:
            # SuperLU reports exact zero pivots as RuntimeError
            raise SingularMatrixError(f"{label} is singular: {e}") from e

        pivots = np.abs(self._lu.U.diagonal())
        threshold = settings.pivot_tolerance * self.norm_max
        if pivots.min() < threshold:
            raise SingularMatrixError(
                f"{label} is singular: pivot {pivots.min():.3e} below {threshold:.3e}"
            )
        logger.debug(f"Factored {label} n={self.shape[0]} nnz={matrix.nnz}")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Solve A x = rhs.

        A relative residual above settings.solve_residual_tolerance is logged
        as a warning; the solution is still returned.
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.shape[0]:
            raise ShapeMismatchError(f"rhs of length {rhs.shape[0]} for {self.label} of order {self.shape[0]}")

        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise LinearSolverError(f"Non-finite solution for {self.label}")

        rhs_norm = np.linalg.norm(rhs)
        if rhs_norm > 0:
            residual = np.linalg.norm(self.matrix @ x - rhs) / rhs_norm
            if residual > settings.solve_residual_tolerance:
                logger.warning(f"Relative residual {residual:.3e} for {self.label} exceeds tolerance")
        return x


def factor(matrix, label: str = 'matrix') -> Factorization:
    """
    Factor a square sparse matrix.

    Raises:
        SingularMatrixError: a pivot below pivot_tolerance * max|A|
        ShapeMismatchError: non-square input

    Examples:
        solve(factor(sp.identity(3)), b) -> b
    """
    return Factorization(matrix, label=label)


def solve(factorization: Factorization, rhs: np.ndarray) -> np.ndarray:
    return factorization.solve(rhs)


@dataclass(frozen=True)
class BlockSaddleSystem:
    """
    Blocks of a (possibly bordered) saddle-point system.

    Attributes:
        mass_sigma: M_sigma (n_sigma x n_sigma), SPD
        coupling: B (n_u x n_sigma)
        block_u: C (n_u x n_u)
        harmonic: optional dense H (n_u x m), full column rank
    """

    mass_sigma: sp.spmatrix
    coupling: sp.spmatrix
    block_u: sp.spmatrix
    harmonic: Optional[np.ndarray] = None

    @property
    def n_sigma(self) -> int:
        return self.mass_sigma.shape[0]

    @property
    def n_u(self) -> int:
        return self.block_u.shape[0]

    @property
    def n_harmonic(self) -> int:
        return 0 if self.harmonic is None else self.harmonic.shape[1]

    @property
    def order(self) -> int:
        return self.n_sigma + self.n_u + self.n_harmonic

    def split(self, x: np.ndarray):
        """Split a solution vector into (sigma, u, p) blocks"""
        a, b = self.n_sigma, self.n_sigma + self.n_u
        return x[:a], x[a:b], x[b:]

    def assemble(self) -> sp.csr_matrix:
        return assemble_saddle(self.mass_sigma, self.coupling, self.block_u, self.harmonic)


def assemble_saddle(mass_sigma, coupling, block_u, harmonic: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """
    Assemble [[-M_sigma, B^T, 0], [B, C, H], [0, H^T, 0]].

    Args:
        mass_sigma: (n_sigma, n_sigma)
        coupling: B, (n_u, n_sigma)
        block_u: C, (n_u, n_u)
        harmonic: optional (n_u, m) dense constraint columns; m = 0 is the same as None

    Returns:
        exactly symmetric csr matrix when M_sigma and C are symmetric

    Raises:
        ShapeMismatchError: inconsistent block shapes
    """
    n_sigma = mass_sigma.shape[0]
    n_u = block_u.shape[0]
    if mass_sigma.shape != (n_sigma, n_sigma) or block_u.shape != (n_u, n_u):
        raise ShapeMismatchError(f"Diagonal blocks must be square: {mass_sigma.shape}, {block_u.shape}")
    if coupling.shape != (n_u, n_sigma):
        raise ShapeMismatchError(f"Coupling block has shape {coupling.shape}, expected {(n_u, n_sigma)}")

    coupling = sp.csr_matrix(coupling)
    blocks = [[-sp.csr_matrix(mass_sigma), coupling.T], [coupling, sp.csr_matrix(block_u)]]
    if harmonic is not None and harmonic.shape[1] > 0:
        if harmonic.shape[0] != n_u:
            raise ShapeMismatchError(f"Harmonic block has {harmonic.shape[0]} rows, expected {n_u}")
        h = sp.csr_matrix(harmonic)
        blocks = [
            [blocks[0][0], blocks[0][1], None],
            [blocks[1][0], blocks[1][1], h],
            [None, h.T, None],
        ]

    matrix = sp.bmat(blocks, format='csr')
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix
