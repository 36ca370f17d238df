"""Backend selection for the hot kernels.

The compiled extension ``magspec._kernels`` is used when it was built;
otherwise, or when the environment variable ``MAGSPEC_PURE_PYTHON`` is set
to a non-empty value other than ``0``, the pure-Python twins are used.
"""

import os

from . import _kernels_py

_force_py = os.environ.get("MAGSPEC_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

frustration_objective = _impl.frustration_objective
frustration_descent = _impl.frustration_descent
tree_gauge = _impl.tree_gauge


def backend(name: str):
    """Kernel namespace for ``"cython"`` or ``"python"`` (for benchmarks and parity tests)."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
