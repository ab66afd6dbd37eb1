"""
Error hierarchy for the solver.
Library code raises these; only the CLI turns them into exit codes.
"""
from typing import Optional


class FeecHeatError(Exception):
    """Base class for all solver errors"""


class InvalidParameterError(FeecHeatError, ValueError):
    """A numeric parameter is outside its admissible range"""


class UnsupportedConfigurationError(FeecHeatError):
    """Requested (family, form degree, polynomial degree, dimension) is not built"""


class MeshParseError(FeecHeatError, ValueError):
    """Malformed mesh file"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class MeshMismatchError(FeecHeatError):
    """Two spaces that must share a mesh do not"""


class ShapeMismatchError(FeecHeatError, ValueError):
    """Block or vector shapes are inconsistent"""


class LinearSolverError(FeecHeatError):
    """Factorization or solve failed"""


class SingularMatrixError(LinearSolverError):
    """A pivot fell below the singularity threshold"""


class TopologyMismatchError(FeecHeatError):
    """Discrete harmonic space does not match the expected Betti number"""


class ConfigurationError(FeecHeatError, ValueError):
    """Invalid run configuration"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
