"""
Oriented simplicial meshes.

Every simplex is stored with its vertex indices in ascending order, so the
orientation of each edge, face and cell is induced by the global vertex
order. Incidence (coboundary) matrices follow the alternating-face rule:
the face of s = (v0, ..., v_{d+1}) obtained by dropping v_i carries sign (-1)^i.
"""
import logging
from itertools import combinations
from math import factorial
from typing import List, Optional, TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

from src.exceptions import InvalidParameterError

if TYPE_CHECKING:
    from src.geometry.generators import MeshFamily

logger = logging.getLogger(__name__)


def local_subsimplices(dim: int, d: int) -> List[tuple]:
    """Local vertex tuples of the d-dimensional faces of a dim-simplex, in canonical order"""
    return list(combinations(range(dim + 1), d + 1))


def _encode(simplices: np.ndarray, base: int) -> np.ndarray:
    """Integer key of each ascending vertex tuple; lexicographic order is key order"""
    keys = np.zeros(simplices.shape[0], dtype=np.int64)
    for column in range(simplices.shape[1]):
        keys = keys * base + simplices[:, column]
    return keys


class SimplicialMesh:
    """
    Simplicial mesh with all sub-simplices and signed incidence tables.

    Attributes:
        dim: spatial dimension (2 or 3)
        vertices: (V, dim) coordinates
        simplices: simplices[d] is an (n_d, d+1) array of ascending vertex indices
        incidence: incidence[d] is the (n_{d+1}, n_d) signed coboundary matrix
        cell_subsimplices: cell_subsimplices[d] maps (cell, local d-face) to global index
        boundary_faces: indices of (dim-1)-simplices on the domain boundary
        family: generator metadata when the mesh came from a built-in family
    """

    def __init__(self, vertices, cells, family: Optional['MeshFamily'] = None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.sort(np.asarray(cells, dtype=np.int64), axis=1)

        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise InvalidParameterError(f"Vertices must have shape (V, 2) or (V, 3), got {vertices.shape}")
        if not np.all(np.isfinite(vertices)):
            raise InvalidParameterError("Vertex coordinates must be finite")
        dim = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != dim + 1:
            raise InvalidParameterError(f"Cells of a {dim}D mesh need {dim + 1} vertices each")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise InvalidParameterError("Cell references a vertex index out of range")
        if np.any(cells[:, 1:] == cells[:, :-1]):
            raise InvalidParameterError("Cell with repeated vertex")

        self.dim = dim
        self.vertices = vertices
        self.family = family
        self.vertices.setflags(write=False)

        self._build_topology(cells)
        self._build_geometry()

        logger.debug(
            f"Built {dim}D mesh: counts={self.counts} boundary_faces={len(self.boundary_faces)}"
        )

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    def _build_topology(self, cells: np.ndarray) -> None:
        dim = self.dim
        n_vertices = len(self.vertices)
        n_cells = len(cells)

        simplices = [np.arange(n_vertices, dtype=np.int64)[:, None]]
        cell_subsimplices = [cells.copy()]
        for d in range(1, dim):
            local = np.array(local_subsimplices(dim, d))
            all_faces = cells[:, local].reshape(-1, d + 1)
            unique, inverse = np.unique(all_faces, axis=0, return_inverse=True)
            simplices.append(unique)
            cell_subsimplices.append(inverse.reshape(n_cells, len(local)))
        simplices.append(cells)
        cell_subsimplices.append(np.arange(n_cells, dtype=np.int64)[:, None])

        # Sorted-key lookup of (d)-faces of (d+1)-simplices
        keys = [_encode(s, n_vertices) for s in simplices]
        incidence = []
        for d in range(dim):
            upper = simplices[d + 1]
            rows, cols, vals = [], [], []
            for i in range(d + 2):
                face = np.delete(upper, i, axis=1)
                face_index = np.searchsorted(keys[d], _encode(face, n_vertices))
                rows.append(np.arange(len(upper)))
                cols.append(face_index)
                vals.append(np.full(len(upper), -1 if i % 2 else 1, dtype=np.int64))
            matrix = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(len(upper), len(simplices[d]))
            )
            matrix.sort_indices()
            incidence.append(matrix)

        facet_of_cell = cell_subsimplices[dim - 1]
        counts = np.bincount(facet_of_cell.ravel(), minlength=len(simplices[dim - 1]))
        if np.any(counts > 2):
            raise InvalidParameterError("A facet is shared by more than two cells")

        neighbors = np.full((len(simplices[dim - 1]), 2), -1, dtype=np.int64)
        order = np.argsort(facet_of_cell.ravel(), kind='stable')
        owner = np.repeat(np.arange(n_cells), dim + 1)[order]
        facet_sorted = facet_of_cell.ravel()[order]
        first = np.ones(len(facet_sorted), dtype=bool)
        first[1:] = facet_sorted[1:] != facet_sorted[:-1]
        neighbors[facet_sorted[first], 0] = owner[first]
        neighbors[facet_sorted[~first], 1] = owner[~first]

        self.simplices = simplices
        self.cell_subsimplices = cell_subsimplices
        self.incidence = incidence
        self.facet_neighbors = neighbors
        self.boundary_faces = np.flatnonzero(counts == 1)

    def _build_geometry(self) -> None:
        cells = self.cells
        origin = self.vertices[cells[:, 0]]
        # J[c, :, i] = x_{i+1} - x_0
        jac = np.transpose(self.vertices[cells[:, 1:]] - origin[:, None, :], (0, 2, 1))
        det = np.linalg.det(jac)
        scale = self.max_edge_length() ** self.dim
        degenerate = ~(np.abs(det) > 1e-13 * scale)
        if np.any(degenerate):
            bad = int(np.flatnonzero(degenerate)[0])
            raise InvalidParameterError(f"Cell {bad} has non-positive volume")

        self.jacobians = jac
        self.jacobian_dets = det
        self.jacobian_invs = np.linalg.inv(jac)
        self.volumes = np.abs(det) / factorial(self.dim)
        for array in (self.jacobians, self.jacobian_dets, self.jacobian_invs, self.volumes):
            array.setflags(write=False)

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    @property
    def cells(self) -> np.ndarray:
        """Top-dimensional simplices"""
        return self.simplices[self.dim]

    @property
    def edges(self) -> np.ndarray:
        return self.simplices[1]

    @property
    def counts(self) -> List[int]:
        """Number of simplices per dimension"""
        return [len(s) for s in self.simplices]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def measure(self) -> float:
        """Total volume (area in 2D)"""
        return float(self.volumes.sum())

    def max_edge_length(self) -> float:
        edges = self.simplices[1] if len(self.simplices) > 1 else None
        if edges is None or len(edges) == 0:
            return 0.0
        vectors = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        return float(np.sqrt((vectors ** 2).sum(axis=1)).max())

    @property
    def h(self) -> float:
        """Nominal mesh size: the family's h when known, else the longest edge"""
        if self.family is not None and self.family.generator != 'from_file':
            return self.family.mesh_size
        return self.max_edge_length()

    def map_to_physical(self, ref_points: np.ndarray) -> np.ndarray:
        """
        Map reference-cell points to every cell.

        Args:
            ref_points: (Q, dim) reference coordinates

        Returns:
            (n_cells, Q, dim) physical coordinates
        """
        origin = self.vertices[self.cells[:, 0]]
        return origin[:, None, :] + np.einsum('cij,qj->cqi', self.jacobians, ref_points)

    def interior_facets(self) -> np.ndarray:
        """Indices of (dim-1)-simplices shared by two cells"""
        return np.flatnonzero(self.facet_neighbors[:, 1] >= 0)

    def __repr__(self) -> str:
        return f"SimplicialMesh(dim={self.dim}, counts={self.counts})"
