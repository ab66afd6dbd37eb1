"""
Finite element spaces: reference elements, global DOF maps and interpolation.
"""
