"""
Betti numbers of simplicial meshes from the ranks of their incidence matrices.

Two routes are available:
    rank           exact rank of every incidence matrix by elimination over
                   a large prime field (dense, small meshes only)
    combinatorial  the outer ranks from connected components and the middle
                   rank in 3D from the boundary surface, b1 = b1(boundary) / 2
"""
import logging
from typing import Literal, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from src.config import settings
from src.geometry.mesh import SimplicialMesh

logger = logging.getLogger(__name__)

PRIME = 2_147_483_647


def integer_rank(matrix) -> int:
    """
    Exact rank of an integer matrix, computed modulo a 31-bit prime.

    Args:
        matrix: dense or sparse integer matrix

    Returns:
        rank over GF(p), equal to the rational rank for incidence matrices
    """
    a = matrix.toarray() if sp.issparse(matrix) else np.array(matrix)
    a = np.mod(a.astype(np.int64), PRIME)
    n_rows, n_cols = a.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        candidates = np.flatnonzero(a[rank:, col])
        if len(candidates) == 0:
            continue
        pivot = rank + candidates[0]
        if pivot != rank:
            a[[rank, pivot]] = a[[pivot, rank]]
        inverse = pow(int(a[rank, col]), PRIME - 2, PRIME)
        a[rank] = (a[rank] * inverse) % PRIME
        below = rank + 1 + np.flatnonzero(a[rank + 1:, col])
        if len(below):
            factors = a[below, col][:, None]
            a[below] = (a[below] - (factors * a[rank][None, :]) % PRIME) % PRIME
        rank += 1
    return rank


def _component_count(n_nodes: int, pairs: np.ndarray) -> int:
    if n_nodes == 0:
        return 0
    graph = sp.coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n_nodes, n_nodes)
    )
    count, _ = connected_components(graph, directed=False)
    return int(count)


def _closed_cell_components(mesh: SimplicialMesh) -> int:
    """Cell-connected components without any boundary facet"""
    neighbors = mesh.facet_neighbors
    interior = neighbors[neighbors[:, 1] >= 0]
    graph = sp.coo_matrix(
        (np.ones(len(interior)), (interior[:, 0], interior[:, 1])), shape=(mesh.n_cells, mesh.n_cells)
    )
    count, labels = connected_components(graph, directed=False)
    open_labels = np.unique(labels[neighbors[mesh.boundary_faces, 0]])
    return int(count - len(open_labels))


def _boundary_first_betti(mesh: SimplicialMesh) -> int:
    """First Betti number of the closed boundary surface of a 3D mesh"""
    faces = mesh.simplices[2][mesh.boundary_faces]
    if len(faces) == 0:
        return 0
    edges = np.unique(np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [0, 2]], faces[:, [1, 2]]])), axis=0)
    vertices, local = np.unique(edges, return_inverse=True)
    local = local.reshape(edges.shape)
    b0 = _component_count(len(vertices), local)
    euler = len(vertices) - len(edges) + len(faces)
    return 2 * b0 - euler


def incidence_ranks(mesh: SimplicialMesh, method: Literal['rank', 'combinatorial']) -> Tuple[int, ...]:
    """Ranks of incidence[0..dim-1]"""
    if method == 'rank':
        return tuple(integer_rank(m) for m in mesh.incidence)

    counts = mesh.counts
    r0 = counts[0] - _component_count(counts[0], mesh.edges)
    r_top = counts[-1] - _closed_cell_components(mesh)
    if mesh.dim == 2:
        return r0, r_top
    b1 = _boundary_first_betti(mesh) // 2
    r1 = counts[1] - r0 - b1
    return r0, r1, r_top


def betti_numbers(mesh: SimplicialMesh, method: Literal['auto', 'rank', 'combinatorial'] = 'auto') -> Tuple[int, ...]:
    """
    Betti numbers (b_0, ..., b_dim) from incidence ranks.

    Args:
        mesh: simplicial mesh
        method: 'rank' (exact elimination), 'combinatorial', or 'auto'
            (rank when every simplex count is within settings.betti_rank_limit)

    Returns:
        tuple of dim+1 Betti numbers; (1, 1, 0) for the annulus, (1, 0, 0, 0) for the cube
    """
    if method == 'auto':
        method = 'rank' if max(mesh.counts) <= settings.betti_rank_limit else 'combinatorial'

    ranks = incidence_ranks(mesh, method)
    counts = mesh.counts
    betti = []
    for d in range(mesh.dim + 1):
        r_out = ranks[d] if d < mesh.dim else 0
        r_in = ranks[d - 1] if d > 0 else 0
        betti.append(counts[d] - r_out - r_in)
    logger.debug(f"Betti numbers ({method}): {betti}")
    return tuple(betti)
