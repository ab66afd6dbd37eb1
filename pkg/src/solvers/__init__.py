"""
Linear solvers, the discrete Hodge Laplacian and time stepping.
"""
