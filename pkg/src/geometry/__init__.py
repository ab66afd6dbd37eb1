"""Simplicial meshes: construction, refinement, file I/O and topology"""
from src.geometry.mesh import SimplicialMesh
from src.geometry.generators import (
    MeshFamily,
    build_square_annulus,
    build_unit_cube,
    build_unit_square,
    refine_uniform,
)
from src.geometry.mesh_io import read_mesh, write_mesh
from src.geometry.topology import betti_numbers, integer_rank

__all__ = [
    'SimplicialMesh',
    'MeshFamily',
    'build_square_annulus',
    'build_unit_cube',
    'build_unit_square',
    'refine_uniform',
    'read_mesh',
    'write_mesh',
    'betti_numbers',
    'integer_rank',
]
