"""
Built-in mesh families: unit square, square annulus, unit cube (Kuhn
subdivision), plus uniform refinement.
"""
import logging
from itertools import permutations
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.exceptions import InvalidParameterError, UnsupportedConfigurationError
from src.geometry.mesh import SimplicialMesh

logger = logging.getLogger(__name__)


class MeshFamily(BaseModel):
    """
    A refinement family of meshes.

    Examples:
        MeshFamily(generator='square_annulus', base_resolution=8, level=2).build()
        MeshFamily(generator='unit_cube', base_resolution=4, level=1).mesh_size -> 0.125
    """

    generator: Literal['unit_cube', 'unit_square', 'square_annulus', 'from_file']
    level: int = Field(default=0, ge=0)
    base_resolution: int = Field(default=1, ge=1)
    path: Optional[str] = None

    @model_validator(mode='after')
    def check_generator(self) -> 'MeshFamily':
        """Annulus needs a multiple of 4; file families need a path"""
        if self.generator == 'square_annulus' and self.base_resolution % 4:
            raise ValueError("square_annulus base_resolution must be a multiple of 4")
        if self.generator == 'from_file' and not self.path:
            raise ValueError("from_file family requires a path")
        return self

    @property
    def resolution(self) -> int:
        """Cells per axis at this level"""
        return self.base_resolution * 2 ** self.level

    @property
    def mesh_size(self) -> float:
        """Nominal h; halves per level"""
        return 1.0 / self.resolution

    def at_level(self, level: int) -> 'MeshFamily':
        return self.model_copy(update={'level': level})

    def build(self) -> SimplicialMesh:
        """Build the mesh of this family at this level"""
        if self.generator == 'unit_cube':
            return build_unit_cube(self.resolution, family=self)

        if self.generator == 'unit_square':
            mesh = build_unit_square(self.base_resolution, family=self.at_level(0))
        elif self.generator == 'square_annulus':
            mesh = build_square_annulus(self.base_resolution, family=self.at_level(0))
        else:
            from src.geometry.mesh_io import read_mesh
            mesh = read_mesh(self.path)
            mesh.family = self.at_level(0)

        for _ in range(self.level):
            mesh = refine_uniform(mesh)
        return mesh


def _grid_vertex_index(n: int):
    return lambda i, j: i + (n + 1) * j


def _square_cells(n: int, keep) -> np.ndarray:
    """Two triangles per retained square, diagonal from (i, j) to (i+1, j+1)"""
    index = _grid_vertex_index(n)
    cells = []
    for j in range(n):
        for i in range(n):
            if not keep(i, j):
                continue
            v00, v10 = index(i, j), index(i + 1, j)
            v01, v11 = index(i, j + 1), index(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v01, v11))
    return np.array(cells, dtype=np.int64)


def _grid_vertices(n: int) -> np.ndarray:
    coords = np.arange(n + 1) / n
    x, y = np.meshgrid(coords, coords, indexing='xy')
    return np.column_stack([x.ravel(), y.ravel()])


def _compress(vertices: np.ndarray, cells: np.ndarray):
    """Drop unreferenced vertices, keeping the relative vertex order"""
    used = np.unique(cells)
    renumber = np.full(len(vertices), -1, dtype=np.int64)
    renumber[used] = np.arange(len(used))
    return vertices[used], renumber[cells]


def build_unit_square(n: int, family: Optional[MeshFamily] = None) -> SimplicialMesh:
    """
    Structured triangulation of [0,1]^2 with n cells per axis.

    Raises:
        InvalidParameterError: if n < 1
    """
    if n < 1:
        raise InvalidParameterError(f"unit square needs n >= 1, got {n}")
    cells = _square_cells(n, lambda i, j: True)
    family = family or MeshFamily(generator='unit_square', base_resolution=n)
    mesh = SimplicialMesh(_grid_vertices(n), cells, family=family)
    logger.info(f"Built unit square n={n}: V={mesh.counts[0]} T={mesh.n_cells}")
    return mesh


def build_square_annulus(n: int, family: Optional[MeshFamily] = None) -> SimplicialMesh:
    """
    Structured triangulation of [0,1]^2 minus [0.25,0.75]^2.

    Args:
        n: cells per axis of the full square, a positive multiple of 4

    Raises:
        InvalidParameterError: if n is not a positive multiple of 4
    """
    if n < 4 or n % 4:
        raise InvalidParameterError(f"square annulus needs n a positive multiple of 4, got {n}")
    lo, hi = n // 4, 3 * n // 4

    def keep(i: int, j: int) -> bool:
        return not (lo <= i < hi and lo <= j < hi)

    vertices, cells = _compress(_grid_vertices(n), _square_cells(n, keep))
    family = family or MeshFamily(generator='square_annulus', base_resolution=n)
    mesh = SimplicialMesh(vertices, cells, family=family)
    logger.info(f"Built square annulus n={n}: V={mesh.counts[0]} E={mesh.counts[1]} T={mesh.n_cells}")
    return mesh


def build_unit_cube(n: int, family: Optional[MeshFamily] = None) -> SimplicialMesh:
    """
    Kuhn (Freudenthal) subdivision of [0,1]^3: n^3 subcubes, six tetrahedra each.

    Every tetrahedron follows a monotone lattice path from a subcube corner
    to the opposite corner, so neighbouring subcubes agree on shared faces.

    Raises:
        InvalidParameterError: if n < 1
    """
    if n < 1:
        raise InvalidParameterError(f"unit cube needs n >= 1, got {n}")

    coords = np.arange(n + 1) / n
    z, y, x = np.meshgrid(coords, coords, coords, indexing='ij')
    vertices = np.column_stack([x.ravel(), y.ravel(), z.ravel()])

    stride = np.array([1, n + 1, (n + 1) ** 2], dtype=np.int64)
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing='ij')
    corners = (np.column_stack([i.ravel(), j.ravel(), k.ravel()]) @ stride)

    cells = []
    for perm in permutations(range(3)):
        path = [0]
        for axis in perm:
            path.append(path[-1] + stride[axis])
        cells.append(corners[:, None] + np.array(path)[None, :])
    cells = np.concatenate(cells, axis=0)

    family = family or MeshFamily(generator='unit_cube', base_resolution=n)
    mesh = SimplicialMesh(vertices, cells, family=family)
    logger.info(f"Built unit cube n={n}: V={mesh.counts[0]} E={mesh.counts[1]} tets={mesh.n_cells}")
    return mesh


def refine_uniform(mesh: SimplicialMesh) -> SimplicialMesh:
    """
    Uniform refinement halving h.

    2D: every triangle is split into four congruent children through its
    edge midpoints; parent vertices keep their indices. 3D built-in cubes
    are regenerated at doubled resolution.

    Raises:
        UnsupportedConfigurationError: for 3D meshes outside the unit_cube family
    """
    family = mesh.family.model_copy(update={'level': mesh.family.level + 1}) if mesh.family else None

    if mesh.dim == 3:
        if family is None or family.generator != 'unit_cube':
            raise UnsupportedConfigurationError("3D refinement is only available for the unit_cube family")
        return build_unit_cube(family.resolution, family=family)

    n_vertices = mesh.counts[0]
    edges = mesh.edges
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    # local edges (0,1), (0,2), (1,2)
    cell_edges = mesh.cell_subsimplices[1] + n_vertices
    a, b, c = mesh.cells.T
    m01, m02, m12 = cell_edges.T
    children = np.concatenate([
        np.column_stack([a, m01, m02]),
        np.column_stack([b, m01, m12]),
        np.column_stack([c, m02, m12]),
        np.column_stack([m01, m02, m12]),
    ])
    refined = SimplicialMesh(vertices, children, family=family)
    logger.debug(f"Refined mesh {mesh.counts} -> {refined.counts}")
    return refined
