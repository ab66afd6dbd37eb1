"""
Plain-text mesh files.

Format (UTF-8):
    # comment
    dim 2
    v 0.0 0.0
    v 1.0 0.0
    v 0.0 1.0
    c 0 1 2

Vertex lines come before cell lines; indices are 0-based.
"""
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from src.exceptions import InvalidParameterError, MeshParseError
from src.geometry.mesh import SimplicialMesh

logger = logging.getLogger(__name__)


def read_mesh(path: Union[str, Path]) -> SimplicialMesh:
    """
    Parse a mesh file.

    Args:
        path: Path to the mesh file

    Returns:
        SimplicialMesh built from the vertices and cells in the file

    Raises:
        MeshParseError: malformed line, index out of range or degenerate cell,
            with the offending line number
    """
    dim = None
    vertices: List[List[float]] = []
    cells: List[List[int]] = []
    cell_lines: List[int] = []

    try:
        text = Path(path).read_text(encoding='utf-8')
    except UnicodeDecodeError as e:
        raise MeshParseError(f"{path} is not valid UTF-8: {e}")

    for line_num, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword, args = tokens[0], tokens[1:]

        if keyword == 'dim':
            if dim is not None:
                raise MeshParseError("duplicate dim header", line_num)
            if args not in (['2'], ['3']):
                raise MeshParseError(f"dim must be 2 or 3, got {' '.join(args)!r}", line_num)
            dim = int(args[0])
            continue

        if dim is None:
            raise MeshParseError("expected 'dim <2|3>' header before data", line_num)

        if keyword == 'v':
            if cells:
                raise MeshParseError("vertex line after cell lines", line_num)
            if len(args) != dim:
                raise MeshParseError(f"vertex needs {dim} coordinates, got {len(args)}", line_num)
            try:
                coords = [float(a) for a in args]
            except ValueError:
                raise MeshParseError(f"invalid coordinate in {line!r}", line_num)
            if not np.all(np.isfinite(coords)):
                raise MeshParseError(f"non-finite coordinate in {line!r}", line_num)
            vertices.append(coords)
        elif keyword == 'c':
            if len(args) != dim + 1:
                raise MeshParseError(f"cell needs {dim + 1} vertex indices, got {len(args)}", line_num)
            try:
                indices = [int(a) for a in args]
            except ValueError:
                raise MeshParseError(f"invalid vertex index in {line!r}", line_num)
            for index in indices:
                if index < 0 or index >= len(vertices):
                    raise MeshParseError(
                        f"vertex index {index} out of range (have {len(vertices)} vertices)", line_num
                    )
            if len(set(indices)) != len(indices):
                raise MeshParseError("cell repeats a vertex", line_num)
            cells.append(indices)
            cell_lines.append(line_num)
        else:
            raise MeshParseError(f"unknown record type {keyword!r}", line_num)

    if dim is None:
        raise MeshParseError("missing 'dim' header")
    if not cells:
        raise MeshParseError("no cells")

    vertex_array = np.array(vertices, dtype=float)
    cell_array = np.array(cells, dtype=np.int64)
    _check_volumes(vertex_array, cell_array, cell_lines)

    try:
        mesh = SimplicialMesh(vertex_array, cell_array)
    except InvalidParameterError as e:
        raise MeshParseError(str(e))

    logger.info(f"Read {dim}D mesh from {path}: {mesh.counts}")
    return mesh


def _check_volumes(vertices: np.ndarray, cells: np.ndarray, cell_lines: List[int]) -> None:
    origin = vertices[cells[:, 0]]
    jac = vertices[cells[:, 1:]] - origin[:, None, :]
    det = np.linalg.det(jac)
    spread = np.ptp(vertices, axis=0).max() if len(vertices) else 0.0
    degenerate = ~(np.abs(det) > 1e-13 * max(spread, 1e-300) ** vertices.shape[1])
    if np.any(degenerate):
        bad = int(np.flatnonzero(degenerate)[0])
        raise MeshParseError("cell has non-positive volume", cell_lines[bad])


def write_mesh(mesh: SimplicialMesh, path: Union[str, Path]) -> None:
    """
    Write a mesh; coordinates use 17 significant digits so a re-read is exact.
    """
    lines = [f"dim {mesh.dim}"]
    for vertex in mesh.vertices:
        lines.append('v ' + ' '.join(format(x, '.17g') for x in vertex))
    for cell in mesh.cells:
        lines.append('c ' + ' '.join(str(int(i)) for i in cell))

    Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')
    logger.info(f"Wrote mesh with {mesh.n_cells} cells to {path}")
