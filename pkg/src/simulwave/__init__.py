"""Simultaneous controllability laboratory for multi-speed wave systems on ]0, pi[."""
from ._backend import DEFAULT as BACKEND
from .errors import ConvergenceError, NumericalError, SimulwaveError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "NumericalError",
    "SimulwaveError",
    "ValidationError",
    "__version__",
]
