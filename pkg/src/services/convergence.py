"""
Convergence studies: spatial refinement at fixed dt, and temporal
refinement on a fixed mesh.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator
from scipy.stats import linregress

from src.config import settings
from src.elements.spaces import build_space_pair
from src.exceptions import InvalidParameterError
from src.services.mms import ManufacturedCase, derivative_error, error_norms
from src.solvers.hodge import elliptic_projection, hodge_complex
from src.solvers.stepper import InitialCondition, TransientConfig, TransientSolver

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['level', 'h', 'err_sigma', 'rate_sigma', 'err_dsigma', 'rate_dsigma', 'err_u', 'rate_u']


def rate(coarse: float, fine: float) -> Optional[float]:
    """log2(coarse / fine); None when either error is not positive"""
    if coarse <= 0 or fine <= 0:
        return None
    return math.log2(coarse / fine)


class ConvergenceRow(BaseModel):
    """Final-time errors on one refinement level"""

    level: int = Field(ge=0)
    h: float = Field(gt=0)
    err_sigma: float
    err_dsigma: float
    err_u: float
    err_du: float = 0.0
    rate_sigma: Optional[float] = None
    rate_dsigma: Optional[float] = None
    rate_u: Optional[float] = None
    p_norm: Optional[float] = None
    dofs: int = 0


class ConvergenceTable(BaseModel):
    """
    Errors and pairwise rates over refinement levels.

    rate[i] = log2(err[i-1] / err[i]); the first row has no rates.
    """

    case: str
    r: int
    dt: float
    t_final: float
    pairing: str = 'trimmed'
    rows: List[ConvergenceRow] = Field(default_factory=list)

    @field_validator('rows')
    @classmethod
    def sort_rows(cls, rows: List[ConvergenceRow]) -> List[ConvergenceRow]:
        return sorted(rows, key=lambda row: row.level)

    def with_rates(self) -> 'ConvergenceTable':
        rows = [row.model_copy() for row in self.rows]
        for previous, row in zip(rows, rows[1:]):
            row.rate_sigma = rate(previous.err_sigma, row.err_sigma)
            row.rate_dsigma = rate(previous.err_dsigma, row.err_dsigma)
            row.rate_u = rate(previous.err_u, row.err_u)
        return self.model_copy(update={'rows': rows})

    def final_rates(self, pair: int = -1) -> Dict[str, Optional[float]]:
        """Rates of one level pair (default the finest), keyed sigma/dsigma/u"""
        row = self.rows[pair]
        return {'sigma': row.rate_sigma, 'dsigma': row.rate_dsigma, 'u': row.rate_u}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=CSV_COLUMNS)

    def to_csv(self) -> str:
        """CSV text with 17 significant digits; empty rate cells on level 0"""
        frame = self.to_frame()
        frame['level'] = frame['level'].astype(int)
        return frame.to_csv(index=False, float_format='%.17g', na_rep='', lineterminator='\n')

    def metadata(self) -> Dict[str, Any]:
        return {
            'case': self.case,
            'r': self.r,
            'pairing': self.pairing,
            'dt': self.dt,
            't_final': self.t_final,
            'levels': len(self.rows),
            'err_du': [row.err_du for row in self.rows],
            'p_norm': [row.p_norm for row in self.rows],
            'dofs': [row.dofs for row in self.rows],
        }


def solve_level(case: ManufacturedCase, r: int, level: int, dt: float, t_final: float,
                base_resolution: Optional[int] = None, pairing: str = 'trimmed',
                initial: Literal['zero', 'elliptic_projection'] = 'elliptic_projection') -> ConvergenceRow:
    """Run the transient solver on one level and measure final-time errors"""
    family = case.mesh_family(base_resolution).at_level(level)
    mesh = family.build()
    sigma_space, u_space = build_space_pair(mesh, r, pairing)

    if initial == 'elliptic_projection':
        condition = InitialCondition(kind='elliptic_projection', u=case.exact_u, lu=case.lu)
    else:
        condition = InitialCondition(kind='zero')
    config = TransientConfig(dt=dt, t_final=t_final, source=case.source_f, initial=condition)

    solver = TransientSolver(sigma_space, u_space, config)
    final = solver.run()
    err_sigma, err_dsigma, err_u = error_norms(final.sigma, final.u, case, final.t)
    row = ConvergenceRow(
        level=level,
        h=mesh.h,
        err_sigma=err_sigma,
        err_dsigma=err_dsigma,
        err_u=err_u,
        err_du=derivative_error(final.u, case, final.t),
        dofs=sigma_space.dof_count + u_space.dof_count,
    )
    logger.info(
        f"{case.name} r={r} level={level} h={row.h:.4g}: "
        f"err_sigma={err_sigma:.6e} err_dsigma={err_dsigma:.6e} err_u={err_u:.6e}"
    )
    return row


def convergence_study(case: ManufacturedCase, r: int, levels: int, dt: float, t_final: float,
                      base_resolution: Optional[int] = None, pairing: str = 'trimmed',
                      initial: Literal['zero', 'elliptic_projection'] = 'elliptic_projection') -> ConvergenceTable:
    """
    Final-time errors and rates over `levels` uniformly refined meshes.

    Levels run on settings.max_workers threads; rows are ordered by level,
    so the table does not depend on completion order.

    Raises:
        InvalidParameterError: fewer than two levels
    """
    if levels < 2:
        raise InvalidParameterError(f"A convergence study needs at least 2 levels, got {levels}")

    def job(level: int) -> ConvergenceRow:
        return solve_level(case, r, level, dt, t_final, base_resolution, pairing, initial)

    if settings.max_workers > 1:
        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            rows = list(pool.map(job, range(levels)))
    else:
        rows = [job(level) for level in range(levels)]

    table = ConvergenceTable(case=case.name, r=r, dt=dt, t_final=t_final, pairing=pairing, rows=rows)
    return table.with_rates()


def elliptic_study(case: ManufacturedCase, r: int, levels: int, base_resolution: Optional[int] = None,
                   pairing: str = 'trimmed', t: Optional[float] = None) -> ConvergenceTable:
    """
    Errors of the elliptic projection over refinement levels (steady data).

    Row errors are ||sigma - sigma_hat||, ||grad(sigma - sigma_hat)||,
    ||u - u_hat||; p_norm records ||p_hat||.
    """
    rows = []
    for level in range(levels):
        mesh = case.mesh_family(base_resolution).at_level(level).build()
        sigma_space, u_space = build_space_pair(mesh, r, pairing)
        result = elliptic_projection(sigma_space, u_space, case.exact_u, case.lu, t=t)
        err_sigma, err_dsigma, err_u = error_norms(result.sigma_hat, result.u_hat, case, t)
        rows.append(ConvergenceRow(
            level=level, h=mesh.h, err_sigma=err_sigma, err_dsigma=err_dsigma, err_u=err_u,
            err_du=derivative_error(result.u_hat, case, t), p_norm=result.p_norm,
            dofs=sigma_space.dof_count + u_space.dof_count,
        ))
    return ConvergenceTable(case=case.name, r=r, dt=0.0, t_final=0.0, pairing=pairing, rows=rows).with_rates()


class TemporalStudy(BaseModel):
    """
    Time-discretization errors on a fixed mesh.

    time_errors[i] = ||u_h(dts[i]) - u_h(reference_dt)|| at t_final, which
    removes the spatial error shared by all runs; rates are pairwise and
    `fitted_rate` is the least-squares slope of log(error) against log(dt).
    """

    case: str
    level: int
    t_final: float
    reference_dt: float
    dts: List[float]
    err_u: List[float]
    time_errors: List[float]
    rates: List[Optional[float]]
    fitted_rate: float

    def to_csv(self) -> str:
        frame = pd.DataFrame({
            'dt': self.dts,
            'time_error': self.time_errors,
            'rate': self.rates,
            'err_u': self.err_u,
        })
        return frame.to_csv(index=False, float_format='%.17g', na_rep='', lineterminator='\n')

    def metadata(self) -> Dict[str, Any]:
        return self.model_dump(exclude={'dts', 'err_u', 'time_errors', 'rates'})


def temporal_study(case: ManufacturedCase, level: int, dts: Sequence[float], t_final: float,
                   reference_dt: float, r: int = 1, base_resolution: Optional[int] = None) -> TemporalStudy:
    """
    Backward Euler time-error rate on a fixed mesh.

    Raises:
        InvalidParameterError: fewer than two step sizes, or reference_dt
            not smaller than every dt
    """
    dts = sorted(dts, reverse=True)
    if len(dts) < 2:
        raise InvalidParameterError("temporal_study needs at least two step sizes")
    if reference_dt >= min(dts):
        raise InvalidParameterError("reference_dt must be smaller than every dt")

    mesh = case.mesh_family(base_resolution).at_level(level).build()
    sigma_space, u_space = build_space_pair(mesh, r)
    initial = InitialCondition(kind='elliptic_projection', u=case.exact_u, lu=case.lu)

    def final_state(dt: float):
        config = TransientConfig(dt=dt, t_final=t_final, source=case.source_f, initial=initial)
        return TransientSolver(sigma_space, u_space, config).run()

    reference = final_state(reference_dt)
    mass = hodge_complex(sigma_space, u_space).mass_u
    err_u, time_errors = [], []
    for dt in dts:
        state = final_state(dt)
        err_u.append(error_norms(state.sigma, state.u, case, t_final)[2])
        difference = state.u.coeffs - reference.u.coeffs
        time_errors.append(float(np.sqrt(difference @ (mass @ difference))))
        logger.info(f"{case.name} dt={dt:g}: err_u={err_u[-1]:.6e} time_error={time_errors[-1]:.6e}")

    rates = [None] + [rate(a, b) for a, b in zip(time_errors, time_errors[1:])]
    fit = linregress(np.log(dts), np.log(time_errors))
    return TemporalStudy(
        case=case.name, level=level, t_final=t_final, reference_dt=reference_dt, dts=list(dts),
        err_u=err_u, time_errors=time_errors, rates=rates, fitted_rate=float(fit.slope),
    )
