"""
Structural property checks of the discretization on small meshes.

Each check returns a PropertyResult; the CLI `check` command prints one
PASS/FAIL line per result.
"""
import logging
from typing import Callable, List, Tuple

import numpy as np
import scipy.linalg as la
from pydantic import BaseModel

from src.assembly.forms import inner_product
from src.assembly.quadrature import quadrature
from src.config import settings
from src.elements.spaces import FeSpace, Field, build_space_pair
from src.exceptions import FeecHeatError
from src.geometry import betti_numbers, build_square_annulus, build_unit_cube, build_unit_square
from src.services.convergence import elliptic_study
from src.services.mms import get_case
from src.solvers.hodge import (
    apply_Lh,
    dstar_h,
    elliptic_projection,
    harmonic_basis,
    hodge_complex,
    hodge_decomposition,
)
from src.solvers.stepper import EnergyObserver, InitialCondition, TransientConfig, TransientSolver

logger = logging.getLogger(__name__)


class PropertyResult(BaseModel):
    """Outcome of one property check"""

    name: str
    passed: bool
    detail: str = ''


def _small_pairs() -> List[Tuple[str, FeSpace, FeSpace]]:
    annulus = build_square_annulus(4)
    cube = build_unit_cube(2)
    pairs = [
        ('annulus r=1', *build_space_pair(annulus, 1)),
        ('annulus r=2', *build_space_pair(annulus, 2)),
        ('annulus r=2 full', *build_space_pair(annulus, 2, 'full')),
        ('cube r=1', *build_space_pair(cube, 1)),
    ]
    return pairs


def check_dd_zero() -> PropertyResult:
    """d(grad tau) vanishes at quadrature points for every 0-form basis function"""
    worst = 0.0
    for _, sigma_space, u_space in _small_pairs():
        derivative = hodge_complex(sigma_space, u_space).derivative
        rows = np.broadcast_to(u_space.cell_dof_map[:, :, None],
                               u_space.cell_dof_map.shape + (sigma_space.element.n_local,))
        cols = np.broadcast_to(sigma_space.cell_dof_map[:, None, :], rows.shape)
        local = np.asarray(derivative[rows.ravel(), cols.ravel()]).reshape(rows.shape)
        _, derivs = u_space.tabulate(quadrature(u_space.dim, 2 * u_space.degree))
        worst = max(worst, float(np.abs(np.einsum('ciqv,cij->cjqv', derivs, local)).max()))
    return PropertyResult(name='d∘d = 0', passed=worst <= 1e-12, detail=f"max |d grad| = {worst:.2e}")


def check_mass_and_stiffness() -> PropertyResult:
    """Mass matrices SPD (Cholesky succeeds); stiffness PSD with the gradients in its kernel"""
    details = []
    passed = True
    for name, sigma_space, u_space in _small_pairs():
        complex_ = hodge_complex(sigma_space, u_space)
        for mass in (complex_.mass_sigma, complex_.mass_u):
            try:
                la.cholesky(mass.toarray())
            except la.LinAlgError:
                passed = False
                details.append(f"{name}: mass not SPD")
        stiffness = complex_.stiffness.toarray()
        min_eig = la.eigvalsh(stiffness).min()
        scale = np.abs(stiffness).max()
        kernel = np.abs(complex_.stiffness @ complex_.derivative).max()
        if min_eig < -1e-12 * scale or kernel > 1e-12 * scale:
            passed = False
        details.append(f"{name}: min eig(K)={min_eig:.1e} |K D|={kernel:.1e}")
    return PropertyResult(name='mass SPD, stiffness PSD', passed=passed, detail='; '.join(details))


def check_dstar_adjoint() -> PropertyResult:
    """<d*_h v, tau> = <v, d tau> for random v, tau"""
    rng = np.random.default_rng(settings.random_seed)
    worst = 0.0
    for _, sigma_space, u_space in _small_pairs():
        complex_ = hodge_complex(sigma_space, u_space)
        v = Field(u_space, rng.standard_normal(u_space.dof_count))
        tau = rng.standard_normal(sigma_space.dof_count)
        s = dstar_h(sigma_space, u_space, v)
        lhs = s.coeffs @ (complex_.mass_sigma @ tau)
        rhs = v.coeffs @ (complex_.coupling @ tau)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return PropertyResult(name='d*_h adjointness', passed=worst <= 1e-12, detail=f"relative gap {worst:.2e}")


def check_energy_decay(steps: int = 50, dt: float = 1e-3) -> PropertyResult:
    """f = 0 from random u^0 on the annulus n=8: ||u^n||_M is nonincreasing"""
    rng = np.random.default_rng(settings.random_seed)
    sigma_space, u_space = build_space_pair(build_square_annulus(8), 1)
    initial = InitialCondition(kind='coefficients', coefficients=rng.standard_normal(u_space.dof_count))
    config = TransientConfig(dt=dt, t_final=steps * dt, initial=initial)
    observer = EnergyObserver()
    TransientSolver(sigma_space, u_space, config).run([observer])
    passed = len(observer.energies) == steps + 1 and observer.is_nonincreasing(rtol=1e-13)
    return PropertyResult(
        name='energy decay', passed=passed,
        detail=f"||u^0||={observer.energies[0]:.4e} ||u^M||={observer.energies[-1]:.4e}",
    )


def check_harmonic_dimensions() -> PropertyResult:
    """dim H_h^1 = b_1: 1 on the annulus, 0 on the cube and the square"""
    details = []
    passed = True
    meshes = [('annulus', build_square_annulus(4), 1), ('cube', build_unit_cube(2), 0),
              ('square', build_unit_square(4), 0)]
    for name, mesh, expected in meshes:
        betti = betti_numbers(mesh)[1]
        try:
            basis = harmonic_basis(*build_space_pair(mesh, 1), expected_dim=betti)
        except FeecHeatError as e:
            passed = False
            details.append(f"{name}: {e}")
            continue
        residual = max([*basis.d_norms, *basis.dstar_norms, 0.0])
        ok = basis.dim == expected == betti and residual <= 1e-8
        passed = passed and ok
        details.append(f"{name}: dim={basis.dim} b1={betti} residual={residual:.1e}")
    return PropertyResult(name='harmonic dimensions', passed=passed, detail='; '.join(details))


def check_hodge_decomposition() -> PropertyResult:
    """Decomposition reassembles v with M-orthogonal parts; L_h is M-self-adjoint"""
    rng = np.random.default_rng(settings.random_seed)
    sigma_space, u_space = build_space_pair(build_square_annulus(4), 1)
    mass = hodge_complex(sigma_space, u_space).mass_u
    v = Field(u_space, rng.standard_normal(u_space.dof_count))
    w = Field(u_space, rng.standard_normal(u_space.dof_count))

    parts = hodge_decomposition(sigma_space, u_space, v)
    scale = inner_product(v, v, mass)
    reassembly = np.abs(parts.exact.coeffs + parts.harmonic.coeffs + parts.coexact.coeffs - v.coeffs).max()
    orthogonality = max(
        abs(inner_product(parts.exact, parts.harmonic, mass)),
        abs(inner_product(parts.exact, parts.coexact, mass)),
        abs(inner_product(parts.harmonic, parts.coexact, mass)),
    ) / scale

    lv, lw = apply_Lh(sigma_space, u_space, v), apply_Lh(sigma_space, u_space, w)
    a, b = inner_product(lv, w, mass), inner_product(v, lw, mass)
    symmetry = abs(a - b) / max(abs(a), 1e-300)

    worst = max(reassembly, orthogonality, symmetry)
    return PropertyResult(
        name='Hodge decomposition, L_h self-adjoint', passed=worst <= 1e-8,
        detail=f"reassembly={reassembly:.1e} orthogonality={orthogonality:.1e} symmetry={symmetry:.1e}",
    )


def check_elliptic_projection() -> PropertyResult:
    """Defining-equation residuals and the ||u - u_hat|| rate on the steady square case"""
    case = get_case('square2d_steady')
    details, passed = [], True

    sigma_space, u_space = build_space_pair(build_square_annulus(4), 1)
    annulus = get_case('annulus2d')
    result = elliptic_projection(sigma_space, u_space, annulus.exact_u, annulus.lu, t=0.5)
    passed = passed and result.residual <= 1e-9
    details.append(f"residual={result.residual:.1e}")

    for r in (1, 2):
        table = elliptic_study(case, r, levels=3)
        rates = [row.rate_u for row in table.rows[1:]]
        ok = all(rate is not None and r - 0.2 <= rate <= r + 0.2 for rate in rates)
        passed = passed and ok
        details.append(f"r={r} rates_u={['%.3f' % x for x in rates]}")
    return PropertyResult(name='elliptic projection', passed=passed, detail='; '.join(details))


CHECKS: List[Callable[[], PropertyResult]] = [
    check_dd_zero,
    check_mass_and_stiffness,
    check_dstar_adjoint,
    check_energy_decay,
    check_harmonic_dimensions,
    check_hodge_decomposition,
    check_elliptic_projection,
]


def run_property_suite() -> List[PropertyResult]:
    """Run every check; a check that raises counts as failed"""
    results = []
    for check in CHECKS:
        try:
            result = check()
        except FeecHeatError as e:
            logger.error(f"{check.__name__} raised: {e}")
            result = PropertyResult(name=check.__name__, passed=False, detail=str(e))
        logger.info(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
        results.append(result)
    return results
