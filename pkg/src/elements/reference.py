"""
Reference finite elements for 0-forms and 1-forms on simplices.

Local DOFs are ordered entity-major: vertex DOFs, then edge DOFs (local
edges (0,1), (0,2), (1,2), ... as in itertools.combinations), then cell
DOFs. Edge functionals use the unnormalised tangent x_b - x_a of the local
edge (a, b), a < b; cell functionals are moments of the pulled-back field
against the reference axis directions. All functionals are invariant under
the covariant pull-back, so one reference basis serves every cell.

1-form proxies: in 2D d is rot(u) = du2/dx1 - du1/dx2, in 3D d is curl.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.assembly.quadrature import edge_quadrature, quadrature
from src.exceptions import UnsupportedConfigurationError
from src.geometry.mesh import SimplicialMesh, local_subsimplices

logger = logging.getLogger(__name__)

FAMILIES = ('lagrange_P', 'trimmed_Pminus', 'full_P')

# (family, form_degree, poly_degree) -> supported dimensions
SUPPORTED = {
    ('lagrange_P', 0, 1): (2, 3),
    ('lagrange_P', 0, 2): (2,),
    ('trimmed_Pminus', 1, 1): (2, 3),
    ('trimmed_Pminus', 1, 2): (2,),
    ('full_P', 1, 1): (2,),
}


def reference_vertices(dim: int) -> np.ndarray:
    return np.vstack([np.zeros(dim), np.eye(dim)])


@dataclass(frozen=True)
class DofFunctional:
    """
    One degree of freedom.

    kind: 'point' (value at `point`), 'edge' (tangential moment along local
    edge `edge` against `weight(s)`), or 'cell' (moment of the pulled-back
    field against reference axis `axis`)
    """

    kind: str
    entity_dim: int
    point: Optional[Tuple[float, ...]] = None
    edge: Optional[Tuple[int, int]] = None
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None
    axis: Optional[int] = None


def _barycentric(points: np.ndarray) -> np.ndarray:
    return np.column_stack([1.0 - points.sum(axis=1), points])


def _barycentric_gradients(dim: int) -> np.ndarray:
    """(dim+1, dim) reference gradients of the barycentric coordinates"""
    return np.vstack([-np.ones(dim), np.eye(dim)])


def _cross2(a: np.ndarray, b: np.ndarray) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _one(s: np.ndarray) -> np.ndarray:
    return np.ones_like(s)


def _first(s: np.ndarray) -> np.ndarray:
    return 1.0 - s


def _second(s: np.ndarray) -> np.ndarray:
    return s


class ReferenceElement:
    """
    Base class: subclasses provide `dofs` and `tabulate`.

    Attributes:
        family, form_degree, poly_degree, dim: element identity
        degree: highest polynomial degree of any basis function
        entity_dofs: DOFs per entity, keyed by entity dimension
        value_size: 1 for 0-forms, dim for 1-forms
        derivative_size: dim (gradient), 1 (2D rot) or 3 (3D curl)
    """

    family = ''
    form_degree = 0

    def __init__(self, poly_degree: int, dim: int):
        self.poly_degree = poly_degree
        self.dim = dim
        self.degree = poly_degree
        self.entity_dofs: Dict[int, int] = {}
        self.dofs: List[DofFunctional] = []

    @property
    def n_local(self) -> int:
        return len(self.dofs)

    @property
    def value_size(self) -> int:
        return 1 if self.form_degree == 0 else self.dim

    @property
    def derivative_size(self) -> int:
        if self.form_degree == 0:
            return self.dim
        return 1 if self.dim == 2 else 3

    def tabulate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Reference basis values and exterior derivatives.

        Args:
            points: (Q, dim) reference coordinates

        Returns:
            values (n_local, Q, value_size), derivatives (n_local, Q, derivative_size)
        """
        raise NotImplementedError

    def _edge_dofs(self, weights) -> List[DofFunctional]:
        return [
            DofFunctional(kind='edge', entity_dim=1, edge=edge, weight=w)
            for edge in local_subsimplices(self.dim, 1)
            for w in weights
        ]

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(r={self.poly_degree}, dim={self.dim})"


class LagrangeElement(ReferenceElement):
    """P_r Lambda^0: continuous Lagrange elements, r = 1 (2D/3D) or 2 (2D)"""

    family = 'lagrange_P'
    form_degree = 0

    def __init__(self, poly_degree: int, dim: int):
        super().__init__(poly_degree, dim)
        verts = reference_vertices(dim)
        self.dofs = [DofFunctional(kind='point', entity_dim=0, point=tuple(v)) for v in verts]
        self.entity_dofs = {0: 1}
        if poly_degree == 2:
            self.dofs += [
                DofFunctional(kind='point', entity_dim=1, point=tuple(0.5 * (verts[a] + verts[b])))
                for a, b in local_subsimplices(dim, 1)
            ]
            self.entity_dofs[1] = 1

    def tabulate(self, points):
        lam = _barycentric(points)
        grad = _barycentric_gradients(self.dim)
        n_points = len(points)

        if self.poly_degree == 1:
            values = lam.T[:, :, None]
            derivs = np.broadcast_to(grad[:, None, :], (self.dim + 1, n_points, self.dim)).copy()
            return values, derivs

        values, derivs = [], []
        for i in range(self.dim + 1):
            values.append(lam[:, i] * (2.0 * lam[:, i] - 1.0))
            derivs.append(np.outer(4.0 * lam[:, i] - 1.0, grad[i]))
        for a, b in local_subsimplices(self.dim, 1):
            values.append(4.0 * lam[:, a] * lam[:, b])
            derivs.append(4.0 * (np.outer(lam[:, a], grad[b]) + np.outer(lam[:, b], grad[a])))
        return np.array(values)[:, :, None], np.array(derivs)


class WhitneyElement(ReferenceElement):
    """P_1^- Lambda^1: Whitney edge forms lambda_a grad lambda_b - lambda_b grad lambda_a"""

    family = 'trimmed_Pminus'
    form_degree = 1

    def __init__(self, dim: int):
        super().__init__(1, dim)
        self.dofs = self._edge_dofs([_one])
        self.entity_dofs = {1: 1}

    def tabulate(self, points):
        lam = _barycentric(points)
        grad = _barycentric_gradients(self.dim)
        values, derivs = [], []
        for a, b in local_subsimplices(self.dim, 1):
            values.append(np.outer(lam[:, a], grad[b]) - np.outer(lam[:, b], grad[a]))
            if self.dim == 2:
                rot = 2.0 * _cross2(grad[a], grad[b])
                derivs.append(np.full((len(points), 1), rot))
            else:
                curl = 2.0 * np.cross(grad[a], grad[b])
                derivs.append(np.tile(curl, (len(points), 1)))
        return np.array(values), np.array(derivs)


class DualBasisElement(ReferenceElement):
    """
    Element whose nodal basis is obtained once by inverting the matrix of
    DOF functionals applied to a closed-form prime basis.
    """

    def __init__(self, poly_degree: int, dim: int):
        super().__init__(poly_degree, dim)
        self._coefficients: Optional[np.ndarray] = None

    def prime_basis(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def coefficients(self) -> np.ndarray:
        if self._coefficients is None:
            self._coefficients = _dual_coefficients(self)
        return self._coefficients

    def tabulate(self, points):
        prime_values, prime_derivs = self.prime_basis(points)
        coeffs = self.coefficients
        return (
            np.einsum('jk,jqc->kqc', coeffs, prime_values),
            np.einsum('jk,jqc->kqc', coeffs, prime_derivs),
        )


class RotatedRaviartThomasElement(DualBasisElement):
    """
    P_2^- Lambda^1 in 2D (rotated Raviart-Thomas of index 1): P_1^2 plus
    (-x2, x1) times homogeneous linears. DOFs: two tangential moments per
    edge against 1-s and s, two interior moments.
    """

    family = 'trimmed_Pminus'
    form_degree = 1

    def __init__(self):
        super().__init__(2, 2)
        self.dofs = self._edge_dofs([_first, _second]) + [
            DofFunctional(kind='cell', entity_dim=2, axis=m) for m in range(2)
        ]
        self.entity_dofs = {1: 2, 2: 2}

    def prime_basis(self, points):
        x, y = points[:, 0], points[:, 1]
        one, zero = np.ones_like(x), np.zeros_like(x)
        values = np.array([
            np.column_stack([one, zero]),
            np.column_stack([x, zero]),
            np.column_stack([y, zero]),
            np.column_stack([zero, one]),
            np.column_stack([zero, x]),
            np.column_stack([zero, y]),
            np.column_stack([-x * y, x * x]),
            np.column_stack([-y * y, x * y]),
        ])
        rot = np.array([zero, zero, -one, zero, one, zero, 3.0 * x, 3.0 * y])[:, :, None]
        return values, rot


class FullLinearOneFormElement(DualBasisElement):
    """P_1 Lambda^1 in 2D (rotated Brezzi-Douglas-Marini): all linear vector fields"""

    family = 'full_P'
    form_degree = 1

    def __init__(self):
        super().__init__(1, 2)
        self.dofs = self._edge_dofs([_first, _second])
        self.entity_dofs = {1: 2}

    def prime_basis(self, points):
        x, y = points[:, 0], points[:, 1]
        one, zero = np.ones_like(x), np.zeros_like(x)
        values = np.array([
            np.column_stack([one, zero]),
            np.column_stack([x, zero]),
            np.column_stack([y, zero]),
            np.column_stack([zero, one]),
            np.column_stack([zero, x]),
            np.column_stack([zero, y]),
        ])
        rot = np.array([zero, zero, -one, zero, one, zero])[:, :, None]
        return values, rot


@lru_cache(maxsize=None)
def reference_mesh(dim: int) -> SimplicialMesh:
    """The reference simplex as a one-cell mesh (J = I)"""
    return SimplicialMesh(reference_vertices(dim), [list(range(dim + 1))])


def evaluate_dofs(element: ReferenceElement, func: Callable, mesh: SimplicialMesh,
                  degree: Optional[int] = None) -> np.ndarray:
    """
    Apply every local DOF functional of `element` to `func` on every cell.

    Args:
        element: reference element
        func: callable of physical points (..., dim) returning (...) for
            0-forms or (..., dim) for 1-forms
        mesh: cells to evaluate on
        degree: exactness of the moment quadratures (default 2*degree+2)

    Returns:
        (n_cells, n_local) DOF values in local orientation
    """
    if degree is None:
        degree = min(2 * element.degree + 2, 8)
    verts = reference_vertices(mesh.dim)
    out = np.zeros((mesh.n_cells, element.n_local))
    cells = mesh.cells

    s, ws = edge_quadrature(degree)
    rule = quadrature(mesh.dim, degree)
    cell_points = cell_weights = None

    for i, dof in enumerate(element.dofs):
        if dof.kind == 'point':
            x = mesh.map_to_physical(np.array([dof.point]))
            out[:, i] = np.asarray(func(x))[:, 0]
        elif dof.kind == 'edge':
            a, b = dof.edge
            ref = verts[a][None, :] + s[:, None] * (verts[b] - verts[a])[None, :]
            x = mesh.map_to_physical(ref)
            tangent = mesh.vertices[cells[:, b]] - mesh.vertices[cells[:, a]]
            values = np.asarray(func(x))
            out[:, i] = np.einsum('cqd,cd,q->c', values, tangent, ws * dof.weight(s))
        else:
            if cell_points is None:
                cell_points = mesh.map_to_physical(rule.ref_points)
                cell_weights = rule.weights
            values = np.asarray(func(cell_points))
            direction = mesh.jacobians[:, :, dof.axis]
            out[:, i] = np.einsum('cqd,cd,q->c', values, direction, cell_weights)
    return out


def _dual_coefficients(element: DualBasisElement) -> np.ndarray:
    """Coefficients C with DOF_i(sum_j C[j, k] prime_j) = delta_ik"""
    mesh = reference_mesh(element.dim)
    n_prime = len(element.prime_basis(np.zeros((1, element.dim)))[0])
    if n_prime != element.n_local:
        raise UnsupportedConfigurationError(f"{element!r}: {n_prime} prime functions for {element.n_local} DOFs")

    matrix = np.zeros((element.n_local, n_prime))
    for j in range(n_prime):
        def prime_j(x, j=j):
            flat = x.reshape(-1, element.dim)
            return element.prime_basis(flat)[0][j].reshape(x.shape[:-1] + (element.value_size,))
        matrix[:, j] = evaluate_dofs(element, prime_j, mesh, degree=element.degree + 2)[0]

    coefficients = np.linalg.inv(matrix)
    logger.debug(f"Dual basis for {element!r}: cond={np.linalg.cond(matrix):.3g}")
    return coefficients


@lru_cache(maxsize=None)
def reference_element(family: str, form_degree: int, poly_degree: int, dim: int) -> ReferenceElement:
    """
    Look up the reference element of a supported configuration.

    Raises:
        UnsupportedConfigurationError: outside the supported table
    """
    dims = SUPPORTED.get((family, form_degree, poly_degree))
    if dims is None or dim not in dims:
        raise UnsupportedConfigurationError(
            f"No element for family={family} k={form_degree} r={poly_degree} dim={dim}"
        )
    if family == 'lagrange_P':
        return LagrangeElement(poly_degree, dim)
    if family == 'full_P':
        return FullLinearOneFormElement()
    if poly_degree == 1:
        return WhitneyElement(dim)
    return RotatedRaviartThomasElement()


def reference_derivative_matrix(element_sigma: ReferenceElement, element_u: ReferenceElement) -> np.ndarray:
    """
    Local coefficient matrix of d: D[i, j] = DOF_i^u(grad phi_j^sigma).

    Entries that vanish up to quadrature round-off are set to zero.
    """
    mesh = reference_mesh(element_sigma.dim)
    matrix = np.zeros((element_u.n_local, element_sigma.n_local))
    for j in range(element_sigma.n_local):
        def grad_j(x, j=j):
            flat = x.reshape(-1, element_sigma.dim)
            return element_sigma.tabulate(flat)[1][j].reshape(x.shape)
        matrix[:, j] = evaluate_dofs(element_u, grad_j, mesh, degree=element_u.degree + 2)[0]
    matrix[np.abs(matrix) < 1e-12] = 0.0
    return matrix
