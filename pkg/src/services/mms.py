"""
Manufactured solutions of the Hodge heat equation for 1-forms.

Every case provides, as callables of points x with shape (..., dim) and a
time t, the exact u, sigma = -div u, grad sigma, d u (rot or curl), L u and
the source f = u_t + L u. All satisfy u.n = 0 and rot u = 0 (curl u x n = 0)
on the boundary, the natural conditions of the mixed formulation.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from src.assembly.forms import l2_error
from src.elements.spaces import Field
from src.exceptions import ConfigurationError
from src.geometry.generators import MeshFamily

logger = logging.getLogger(__name__)

PI = np.pi


@dataclass(frozen=True)
class ManufacturedCase:
    """
    Exact solution with its derived data and the mesh family it lives on.

    Attributes:
        name: registry key
        dim: spatial dimension
        family: base mesh family (level 0)
        exact_u, exact_sigma, grad_sigma, exact_du, lu, source_f, du_dt:
            callables of (x, t)
        steady: True when u does not depend on t
    """

    name: str
    dim: int
    family: MeshFamily
    exact_u: Callable
    exact_sigma: Callable
    grad_sigma: Callable
    exact_du: Callable
    lu: Callable
    source_f: Callable
    du_dt: Callable
    steady: bool = False

    def mesh_family(self, base_resolution: int = None) -> MeshFamily:
        if base_resolution is None:
            return self.family
        return self.family.model_copy(update={'base_resolution': base_resolution})


def _vector(*components: np.ndarray) -> np.ndarray:
    return np.stack(components, axis=-1)


# ----------------------------------------------------------------------
# Square annulus: u = 100 t (q(x), q(y)), q(s) = s (s - 1)(s - 1/4)(s - 3/4)
# ----------------------------------------------------------------------

def _q(s):
    return s ** 4 - 2.0 * s ** 3 + 1.1875 * s ** 2 - 0.1875 * s


def _dq(s):
    return 4.0 * s ** 3 - 6.0 * s ** 2 + 2.375 * s - 0.1875


def _d2q(s):
    return 12.0 * s ** 2 - 12.0 * s + 2.375


def case_annulus2d() -> ManufacturedCase:
    """
    u = 100 t (q(x1), q(x2)) on [0,1]^2 minus [1/4,3/4]^2.

    rot u = 0 since each component depends on one variable; q vanishes at
    0, 1/4, 3/4 and 1, so u.n = 0 on both boundary squares.
    """
    def exact_u(x, t):
        return 100.0 * t * _vector(_q(x[..., 0]), _q(x[..., 1]))

    def exact_sigma(x, t):
        return -100.0 * t * (_dq(x[..., 0]) + _dq(x[..., 1]))

    def grad_sigma(x, t):
        return -100.0 * t * _vector(_d2q(x[..., 0]), _d2q(x[..., 1]))

    def exact_du(x, t):
        return np.zeros(x.shape[:-1])

    def du_dt(x, t):
        return 100.0 * _vector(_q(x[..., 0]), _q(x[..., 1]))

    return ManufacturedCase(
        name='annulus2d',
        dim=2,
        family=MeshFamily(generator='square_annulus', base_resolution=4),
        exact_u=exact_u,
        exact_sigma=exact_sigma,
        grad_sigma=grad_sigma,
        exact_du=exact_du,
        lu=grad_sigma,
        source_f=lambda x, t: du_dt(x, t) + grad_sigma(x, t),
        du_dt=du_dt,
    )


# ----------------------------------------------------------------------
# Unit cube: u = t (sin pi x1, sin pi x2, sin pi x3)
# ----------------------------------------------------------------------

def case_cube3d() -> ManufacturedCase:
    """u = t sin(pi x_i) on the unit cube; f = (1 + pi^2 t) sin(pi x_i)"""
    def exact_u(x, t):
        return t * np.sin(PI * x)

    def exact_sigma(x, t):
        return -PI * t * np.cos(PI * x).sum(axis=-1)

    def grad_sigma(x, t):
        return PI ** 2 * t * np.sin(PI * x)

    def exact_du(x, t):
        return np.zeros(x.shape)

    return ManufacturedCase(
        name='cube3d',
        dim=3,
        family=MeshFamily(generator='unit_cube', base_resolution=4),
        exact_u=exact_u,
        exact_sigma=exact_sigma,
        grad_sigma=grad_sigma,
        exact_du=exact_du,
        lu=grad_sigma,
        source_f=lambda x, t: (1.0 + PI ** 2 * t) * np.sin(PI * x),
        du_dt=lambda x, t: np.sin(PI * x),
    )


def case_square2d_steady() -> ManufacturedCase:
    """u = (sin pi x1, sin pi x2) on the unit square, L u = f = pi^2 u"""
    def exact_u(x, t=None):
        return np.sin(PI * x)

    def exact_sigma(x, t=None):
        return -PI * np.cos(PI * x).sum(axis=-1)

    def lu(x, t=None):
        return PI ** 2 * np.sin(PI * x)

    return ManufacturedCase(
        name='square2d_steady',
        dim=2,
        family=MeshFamily(generator='unit_square', base_resolution=4),
        exact_u=exact_u,
        exact_sigma=exact_sigma,
        grad_sigma=lu,
        exact_du=lambda x, t=None: np.zeros(x.shape[:-1]),
        lu=lu,
        source_f=lu,
        du_dt=lambda x, t=None: np.zeros(x.shape),
        steady=True,
    )


CASES: Dict[str, Callable[[], ManufacturedCase]] = {
    'annulus2d': case_annulus2d,
    'cube3d': case_cube3d,
    'square2d_steady': case_square2d_steady,
}


def get_case(name: str) -> ManufacturedCase:
    """
    Look up a registered case.

    Raises:
        ConfigurationError: unknown case name
    """
    try:
        return CASES[name]()
    except KeyError:
        raise ConfigurationError(f"Unknown case {name!r}; choose from {sorted(CASES)}")


def error_norms(field_sigma: Field, field_u: Field, case: ManufacturedCase, t: float) -> Tuple[float, float, float]:
    """
    L2 errors (||sigma - sigma_h||, ||grad(sigma - sigma_h)||, ||u - u_h||) at time t,
    with quadrature of exactness 2r + 2.
    """
    err_sigma = l2_error(field_sigma, case.exact_sigma, t)
    err_dsigma = l2_error(field_sigma, case.grad_sigma, t, derivative=True)
    err_u = l2_error(field_u, case.exact_u, t)
    return err_sigma, err_dsigma, err_u


def derivative_error(field_u: Field, case: ManufacturedCase, t: float) -> float:
    """||d(u - u_h)||: rot error in 2D, curl error in 3D"""
    return l2_error(field_u, case.exact_du, t, derivative=True)


def pde_residual(case: ManufacturedCase, x: np.ndarray, t: float, step: float = 1e-5) -> np.ndarray:
    """
    u_t + curl rot u - grad div u - f at points x by central differences.

    Used as an independent check of the hand-derived source terms.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dim = case.dim
    eye = np.eye(dim) * step

    def partial(func, i, points):
        return (func(points + eye[i], t) - func(points - eye[i], t)) / (2.0 * step)

    def div_u(points):
        return sum(partial(case.exact_u, i, points)[..., i] for i in range(dim))

    grad_div = _vector(*[(div_u(x + eye[i]) - div_u(x - eye[i])) / (2.0 * step) for i in range(dim)])

    def curl_u(points):
        du = [partial(case.exact_u, i, points) for i in range(dim)]
        if dim == 2:
            return du[0][..., 1] - du[1][..., 0]
        return _vector(du[1][..., 2] - du[2][..., 1], du[2][..., 0] - du[0][..., 2], du[0][..., 1] - du[1][..., 0])

    def rotation(points, _t):
        return curl_u(points)

    d = [partial(rotation, i, x) for i in range(dim)]
    if dim == 2:
        # curl of the scalar rot: (d/dx2, -d/dx1)
        curl_rot = _vector(d[1], -d[0])
    else:
        curl_rot = _vector(d[1][..., 2] - d[2][..., 1], d[2][..., 0] - d[0][..., 2], d[0][..., 1] - d[1][..., 0])

    u_t = 0.0
    if not case.steady:
        u_t = (case.exact_u(x, t + step) - case.exact_u(x, t - step)) / (2.0 * step)
    return u_t + curl_rot - grad_div - case.source_f(x, t)
