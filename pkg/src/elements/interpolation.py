"""
Canonical interpolation onto finite element spaces.
"""
import logging
from typing import Callable

import numpy as np

from src.elements.reference import evaluate_dofs
from src.elements.spaces import FeSpace, Field

logger = logging.getLogger(__name__)


def canonical_interpolate(space: FeSpace, func: Callable[[np.ndarray], np.ndarray]) -> Field:
    """
    Apply the global DOF functionals of `space` to a smooth form.

    Commutes with d: interpolating grad(s) into a 1-form space gives
    D @ (interpolant of s) for the matching 0-form space.

    Args:
        space: target space
        func: callable of points (..., dim) returning (...) for 0-forms
            or (..., dim) for 1-forms

    Returns:
        Field of DOF values
    """
    local = evaluate_dofs(space.element, func, space.mesh) * space.cell_dof_signs
    coeffs = np.zeros(space.dof_count)
    coeffs[space.cell_dof_map.ravel()] = local.ravel()
    return Field(space, coeffs)
