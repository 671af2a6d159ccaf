"""Kernel backend selection.

The compiled Cython module is preferred.  Setting ``SIMULWAVE_PURE_PYTHON=1``
or a missing extension selects the numpy fallback.  Both expose the same
functions with the same signatures.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_MODULES = {"python": _kernels_py}
if _compiled is not None:
    _MODULES["compiled"] = _compiled

if os.environ.get("SIMULWAVE_PURE_PYTHON", "") == "1" or _compiled is None:
    DEFAULT = "python"
else:
    DEFAULT = "compiled"


def available():
    """Names of importable backends, compiled first when present."""
    return sorted(_MODULES, key=lambda s: s != "compiled")


def get(name=None):
    """Return the kernel module for ``name`` (default backend if None)."""
    key = DEFAULT if name is None else name
    try:
        return _MODULES[key]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {key!r}; have {available()}") from None
