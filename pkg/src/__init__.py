"""Mixed finite element solver for the Hodge heat equation"""
__version__ = "0.1.0"
