"""Backend selection for the dense subsystem kernels.

The compiled Cython extension is used when it imports; otherwise the numpy
fallback is used.  ``use_backend`` switches at runtime (benchmarks, tests).
"""
from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = ("compiled", "python") if _compiled is not None else ("python",)

BACKEND = "compiled" if _compiled is not None else "python"
apply_columns = (_compiled or _kernels_py).apply_columns
project_columns = (_compiled or _kernels_py).project_columns


def use_backend(name: str) -> str:
    """Select ``"compiled"`` or ``"python"`` kernels; returns the previous name."""
    global BACKEND, apply_columns, project_columns
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} not available (have {AVAILABLE})")
    previous = BACKEND
    impl = _compiled if name == "compiled" else _kernels_py
    BACKEND = name
    apply_columns = impl.apply_columns
    project_columns = impl.project_columns
    return previous
