"""
Global finite element spaces of 0-forms and 1-forms.

Global DOF numbering is entity-major: all DOFs on vertices, then on edges,
then cell interiors. An entity carrying m DOFs owns the consecutive block
offset_d + m * entity + j, j < m.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.assembly.quadrature import QuadratureRule, quadrature
from src.elements.reference import (
    ReferenceElement,
    reference_derivative_matrix,
    reference_element,
)
from src.exceptions import (
    InvalidParameterError,
    MeshMismatchError,
    ShapeMismatchError,
    UnsupportedConfigurationError,
)
from src.geometry.mesh import SimplicialMesh, local_subsimplices

logger = logging.getLogger(__name__)


class FeSpace:
    """
    Finite element space on a mesh.

    Attributes:
        mesh: underlying mesh
        family: 'lagrange_P', 'trimmed_Pminus' or 'full_P'
        form_degree: k (0 or 1)
        poly_degree: r
        element: reference element
        dof_count: number of global DOFs
        cell_dof_map: (n_cells, n_local) global DOF index per local DOF
        cell_dof_signs: (n_cells, n_local) orientation signs (+1/-1)
    """

    def __init__(self, mesh: SimplicialMesh, family: str, form_degree: int, poly_degree: int):
        self.mesh = mesh
        self.family = family
        self.form_degree = form_degree
        self.poly_degree = poly_degree
        self.element: ReferenceElement = reference_element(family, form_degree, poly_degree, mesh.dim)
        self._tabulations: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        self._number_dofs()
        logger.debug(f"Built {self!r}")

    def _number_dofs(self) -> None:
        mesh = self.mesh
        blocks, signs = [], []
        offset = 0
        for d in range(mesh.dim + 1):
            per_entity = self.element.entity_dofs.get(d, 0)
            n_entities = mesh.counts[d]
            if per_entity:
                entities = mesh.cell_subsimplices[d]
                dofs = offset + per_entity * entities[:, :, None] + np.arange(per_entity)[None, None, :]
                blocks.append(dofs.reshape(mesh.n_cells, -1))

                if d == 1:
                    local = np.array(local_subsimplices(mesh.dim, 1))
                    edge_sign = np.sign(mesh.cells[:, local[:, 1]] - mesh.cells[:, local[:, 0]])
                    signs.append(np.repeat(edge_sign, per_entity, axis=1))
                else:
                    signs.append(np.ones(blocks[-1].shape, dtype=np.int64))
            offset += per_entity * n_entities

        self.dof_count = offset
        self.cell_dof_map = np.concatenate(blocks, axis=1)
        self.cell_dof_signs = np.concatenate(signs, axis=1).astype(float)
        if self.cell_dof_map.shape[1] != self.element.n_local:
            raise UnsupportedConfigurationError(f"DOF layout mismatch for {self!r}")

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def degree(self) -> int:
        """Highest polynomial degree present in the basis"""
        return self.element.degree

    def tabulate(self, rule: QuadratureRule) -> Tuple[np.ndarray, np.ndarray]:
        """
        Physical basis values and exterior derivatives at the points of `rule`
        on every cell, orientation signs applied.

        Returns:
            values (n_cells, n_local, Q, value_size),
            derivatives (n_cells, n_local, Q, derivative_size)
        """
        key = rule.exactness_degree
        if key not in self._tabulations:
            self._tabulations[key] = self._push_forward(rule.ref_points)
        return self._tabulations[key]

    def _push_forward(self, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mesh = self.mesh
        values, derivs = self.element.tabulate(ref_points)
        jinv = mesh.jacobian_invs

        if self.form_degree == 0:
            phys_values = np.broadcast_to(values[None], (mesh.n_cells,) + values.shape)
            phys_derivs = np.einsum('cba,kqb->ckqa', jinv, derivs)
        else:
            # covariant: J^{-T} phi_hat
            phys_values = np.einsum('cba,kqb->ckqa', jinv, values)
            if mesh.dim == 2:
                phys_derivs = derivs[None] / mesh.jacobian_dets[:, None, None, None]
            else:
                phys_derivs = np.einsum('cab,kqb->ckqa', mesh.jacobians, derivs) / mesh.jacobian_dets[:, None, None, None]

        signs = self.cell_dof_signs[:, :, None, None]
        return phys_values * signs, phys_derivs * signs

    def eval_basis(self, cell: int, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Basis functions of one cell mapped to physical space.

        Args:
            cell: cell index
            ref_points: (Q, dim) reference coordinates

        Returns:
            values (n_local, Q, value_size) and derivatives (n_local, Q, derivative_size)

        Raises:
            InvalidParameterError: cell index outside [0, n_cells)
        """
        mesh = self.mesh
        if not 0 <= cell < mesh.n_cells:
            raise InvalidParameterError(f"Cell index {cell} out of range for {mesh.n_cells} cells")
        ref_points = np.atleast_2d(ref_points)
        values, derivs = self.element.tabulate(ref_points)
        jinv = mesh.jacobian_invs[cell]
        det = mesh.jacobian_dets[cell]
        if self.form_degree == 0:
            derivs = np.einsum('ba,kqb->kqa', jinv, derivs)
        else:
            values = np.einsum('ba,kqb->kqa', jinv, values)
            if mesh.dim == 2:
                derivs = derivs / det
            else:
                derivs = np.einsum('ab,kqb->kqa', mesh.jacobians[cell], derivs) / det
        signs = self.cell_dof_signs[cell][:, None, None]
        return values * signs, derivs * signs

    def __repr__(self) -> str:
        return (
            f"FeSpace({self.family}, k={self.form_degree}, r={self.poly_degree}, "
            f"dim={self.dim}, dofs={self.dof_count})"
        )


@dataclass
class Field:
    """Coefficient vector of a discrete form in a given space"""

    space: FeSpace
    coeffs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.coeffs is None:
            self.coeffs = np.zeros(self.space.dof_count)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dof_count,):
            raise ShapeMismatchError(
                f"Field needs {self.space.dof_count} coefficients, got shape {self.coeffs.shape}"
            )

    def copy(self) -> 'Field':
        return Field(self.space, self.coeffs.copy())


def build_space(mesh: SimplicialMesh, family: str, form_degree: int, poly_degree: int) -> FeSpace:
    """
    Build a finite element space.

    Supported: lagrange_P k=0 r=1 (2D/3D) and r=2 (2D); trimmed_Pminus
    k=1 r=1 (2D/3D) and r=2 (2D); full_P k=1 r=1 (2D).

    Raises:
        UnsupportedConfigurationError: any other combination
    """
    return FeSpace(mesh, family, form_degree, poly_degree)


def build_space_pair(mesh: SimplicialMesh, poly_degree: int, pairing: str = 'trimmed') -> Tuple[FeSpace, FeSpace]:
    """
    Stable (V^0, V^1) pair.

    Args:
        pairing: 'trimmed' gives (P_r Lambda^0, P_r^- Lambda^1);
            'full' gives (P_r Lambda^0, P_{r-1} Lambda^1)

    Examples:
        build_space_pair(mesh, 2, 'full') -> (lagrange_P r=2, full_P r=1)
    """
    sigma_space = build_space(mesh, 'lagrange_P', 0, poly_degree)
    if pairing == 'trimmed':
        u_space = build_space(mesh, 'trimmed_Pminus', 1, poly_degree)
    elif pairing == 'full':
        if poly_degree < 2:
            raise UnsupportedConfigurationError("full pairing needs r >= 2")
        u_space = build_space(mesh, 'full_P', 1, poly_degree - 1)
    else:
        raise UnsupportedConfigurationError(f"Unknown pairing {pairing!r}")
    return sigma_space, u_space


def check_same_mesh(*spaces: FeSpace) -> None:
    meshes = {id(s.mesh) for s in spaces}
    if len(meshes) > 1:
        raise MeshMismatchError("Spaces are defined on different meshes")


def derivative_matrix(sigma_space: FeSpace, u_space: FeSpace) -> sp.csr_matrix:
    """
    Coefficients of d: V^0 -> V^1, D[i, j] = DOF_i^u(grad phi_j).

    The local matrix is identical on every cell; shared DOFs receive the
    same value from each cell, so entries are set, not summed.

    Raises:
        MeshMismatchError: spaces on different meshes
        UnsupportedConfigurationError: u_space is not a 1-form space
    """
    check_same_mesh(sigma_space, u_space)
    if sigma_space.form_degree != 0 or u_space.form_degree != 1:
        raise UnsupportedConfigurationError("derivative_matrix maps 0-forms to 1-forms")

    local = reference_derivative_matrix(sigma_space.element, u_space.element)
    rows = np.repeat(u_space.cell_dof_map[:, :, None], sigma_space.element.n_local, axis=2)
    cols = np.repeat(sigma_space.cell_dof_map[:, None, :], u_space.element.n_local, axis=1)
    vals = (
        u_space.cell_dof_signs[:, :, None] * sigma_space.cell_dof_signs[:, None, :] * local[None]
    )

    rows, cols, vals = rows.ravel(), cols.ravel(), vals.ravel()
    nonzero = vals != 0.0
    rows, cols, vals = rows[nonzero], cols[nonzero], vals[nonzero]
    _, first = np.unique(rows * sigma_space.dof_count + cols, return_index=True)

    matrix = sp.csr_matrix(
        (vals[first], (rows[first], cols[first])), shape=(u_space.dof_count, sigma_space.dof_count)
    )
    matrix.sort_indices()
    return matrix


def evaluate_field(f: Field, rule: Optional[QuadratureRule] = None, degree: Optional[int] = None,
                   derivative: bool = False) -> np.ndarray:
    """
    Values (or exterior derivative) of a discrete form at quadrature points.

    Returns:
        (n_cells, Q, components)
    """
    space = f.space
    if rule is None:
        rule = quadrature(space.dim, degree if degree is not None else 2 * space.degree)
    values, derivs = space.tabulate(rule)
    table = derivs if derivative else values
    local = f.coeffs[space.cell_dof_map]
    return np.einsum('ci,ciqv->cqv', local, table)


def evaluate_at(f: Field, cell: int, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Field value and derivative at reference points of one cell"""
    values, derivs = f.space.eval_basis(cell, ref_points)
    local = f.coeffs[f.space.cell_dof_map[cell]]
    return np.einsum('i,iqv->qv', local, values), np.einsum('i,iqv->qv', local, derivs)

