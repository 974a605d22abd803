"""Numerical laboratory for inner-outer gluing of forced Navier-Stokes solutions."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
