"""
Quadrature, bilinear forms and load vectors.
"""
