"""
Backward Euler time stepping of the mixed Hodge heat equation.

At each step n the pair (sigma^n, u^n) solves

    [[-M_sigma, B^T], [B, M_u / dt + K]] (sigma; u) = (0; F(t^n) + M_u u^{n-1} / dt)

with t^n = n * dt. The step matrix is factored once per solver and reused.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Protocol, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator

from src.assembly.forms import l2_error, load_vector
from src.elements.spaces import FeSpace, Field
from src.solvers.hodge import elliptic_projection, hodge_complex
from src.solvers.linsolve import BlockSaddleSystem, factor

logger = logging.getLogger(__name__)


class InitialCondition(BaseModel):
    """
    Initial data u_h^0.

    kind:
        zero                  u_h^0 = 0
        elliptic_projection   u_h^0 = u_hat_h of the exact (u, Lu) at t = 0
        coefficients          explicit coefficient vector
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: Literal['zero', 'elliptic_projection', 'coefficients'] = 'zero'
    u: Optional[Callable] = None
    lu: Optional[Callable] = None
    coefficients: Optional[np.ndarray] = None

    @model_validator(mode='after')
    def check_data(self) -> 'InitialCondition':
        if self.kind == 'elliptic_projection' and (self.u is None or self.lu is None):
            raise ValueError("elliptic_projection initial condition needs u and lu")
        if self.kind == 'coefficients' and self.coefficients is None:
            raise ValueError("coefficients initial condition needs a coefficient vector")
        return self


class TransientConfig(BaseModel):
    """
    Time stepping parameters.

    The number of steps M = t_final / dt must be an integer to within half
    an ulp; times are always n * dt.

    Examples:
        TransientConfig(dt=1e-4, t_final=0.01).steps -> 100
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dt: float = PydanticField(gt=0)
    t_final: float = PydanticField(ge=0)
    source: Optional[Callable] = None
    initial: InitialCondition = PydanticField(default_factory=InitialCondition)

    @model_validator(mode='after')
    def check_step_count(self) -> 'TransientConfig':
        ratio = self.t_final / self.dt
        if abs(ratio - round(ratio)) > 0.5 * np.spacing(max(ratio, 1.0)):
            raise ValueError(f"t_final={self.t_final} is not an integer multiple of dt={self.dt}")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def time(self, n: int) -> float:
        return n * self.dt


@dataclass
class TransientState:
    """Discrete solution at step n (t = n * dt)"""

    n: int
    t: float
    sigma: Field
    u: Field


class Observer(Protocol):
    def __call__(self, state: TransientState, solver: 'TransientSolver') -> None:
        ...


class TransientSolver:
    """
    Backward Euler solver on a (V^{k-1}, V^k) pair.

    Usage:
        solver = TransientSolver(sigma_space, u_space, config)
        final = solver.run(observers=[EnergyObserver()])
    """

    def __init__(self, sigma_space: FeSpace, u_space: FeSpace, config: TransientConfig):
        self.sigma_space = sigma_space
        self.u_space = u_space
        self.config = config
        self.complex = hodge_complex(sigma_space, u_space)

        started = time.perf_counter()
        block_u = self.complex.mass_u / config.dt + self.complex.stiffness
        self.system = BlockSaddleSystem(self.complex.mass_sigma, self.complex.coupling, block_u)
        self.factorization = factor(self.system.assemble(), label=f'backward Euler dt={config.dt:g}')
        self.factor_seconds = time.perf_counter() - started
        logger.info(f"Factored step matrix of order {self.system.order} in {self.factor_seconds:.2f}s")

    def init_state(self) -> TransientState:
        """u_h^0 per config; sigma_h^0 = d*_h u_h^0 so the first equation holds at n = 0"""
        initial = self.config.initial
        if initial.kind == 'zero':
            u0 = np.zeros(self.u_space.dof_count)
        elif initial.kind == 'coefficients':
            u0 = np.asarray(initial.coefficients, dtype=float).copy()
        else:
            projection = elliptic_projection(self.sigma_space, self.u_space, initial.u, initial.lu, t=0.0)
            u0 = projection.u_hat.coeffs
        u = Field(self.u_space, u0)
        sigma = Field(self.sigma_space, self.complex.dstar(u.coeffs))
        return TransientState(n=0, t=0.0, sigma=sigma, u=u)

    def step(self, state: TransientState) -> TransientState:
        n = state.n + 1
        t = self.config.time(n)
        rhs_u = self.complex.mass_u @ state.u.coeffs / self.config.dt
        if self.config.source is not None:
            rhs_u = rhs_u + load_vector(self.u_space, self.config.source, t)
        rhs = np.concatenate([np.zeros(self.system.n_sigma), rhs_u])
        sigma, u, _ = self.system.split(self.factorization.solve(rhs))
        return TransientState(n=n, t=t, sigma=Field(self.sigma_space, sigma), u=Field(self.u_space, u))

    def run(self, observers: Sequence[Observer] = (), state: Optional[TransientState] = None) -> TransientState:
        """Execute all M steps from `state` (default: init_state())"""
        state = state if state is not None else self.init_state()
        for observer in observers:
            observer(state, self)

        steps = self.config.steps
        logger.info(f"Running {steps} backward Euler steps, dt={self.config.dt:g}")
        for _ in range(state.n, steps):
            state = self.step(state)
            for observer in observers:
                observer(state, self)
            logger.debug(f"step {state.n}/{steps} t={state.t:g}")
        return state

    def sigma_residual(self, state: TransientState) -> float:
        """Relative residual of <sigma, tau> - <d tau, u> = 0"""
        residual = self.complex.mass_sigma @ state.sigma.coeffs - self.complex.coupling.T @ state.u.coeffs
        scale = max(np.linalg.norm(self.complex.coupling.T @ state.u.coeffs), 1e-300)
        return float(np.linalg.norm(residual) / scale)

    def energy(self, state: TransientState) -> float:
        """||u_h^n||_M"""
        return float(np.sqrt(state.u.coeffs @ (self.complex.mass_u @ state.u.coeffs)))


def init_state(sigma_space: FeSpace, u_space: FeSpace, config: TransientConfig) -> TransientState:
    return TransientSolver(sigma_space, u_space, config).init_state()


def run(sigma_space: FeSpace, u_space: FeSpace, config: TransientConfig,
        observers: Sequence[Observer] = ()) -> TransientState:
    """Build a solver, run it to t_final and return the final state"""
    return TransientSolver(sigma_space, u_space, config).run(observers)


@dataclass
class EnergyObserver:
    """Records ||u_h^n||_M after every step"""

    energies: List[float] = field(default_factory=list)

    def __call__(self, state: TransientState, solver: TransientSolver) -> None:
        self.energies.append(solver.energy(state))

    def is_nonincreasing(self, rtol: float = 1e-13) -> bool:
        e = np.array(self.energies)
        return bool(np.all(e[1:] <= e[:-1] * (1.0 + rtol) + 1e-300))


@dataclass
class ErrorHistoryObserver:
    """
    L2 errors of u_h^n against exact_u(x, t) at every step, with the
    discrete time norms max_n ||e^n|| and (dt sum_{n>=1} ||e^n||^2)^{1/2}.
    """

    exact_u: Callable
    errors: List[float] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    dt: float = 0.0

    def __call__(self, state: TransientState, solver: TransientSolver) -> None:
        self.dt = solver.config.dt
        self.errors.append(l2_error(state.u, self.exact_u, state.t))
        self.times.append(state.t)

    @property
    def linf(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def l2(self) -> float:
        later = np.array([e for e, t in zip(self.errors, self.times) if t > 0])
        return float(np.sqrt(self.dt * np.sum(later ** 2)))
