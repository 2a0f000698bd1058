"""Numerical laboratory for the periodic Toda chain under generalised Gibbs ensembles."""

__version__ = "0.1.0"
