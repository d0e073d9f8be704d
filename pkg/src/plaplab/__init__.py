"""Numerical laboratory for the regularized normalized p-Laplace Dirichlet problem in 2D."""

__version__ = "0.1.0"
