"""Kernel selection.

The compiled extension is used when importable; otherwise the pure-Python
twins in ``_kernels_py`` are used. ``POPPATH_PURE_PYTHON=1`` forces the
fallback. ``BACKEND`` records which one is active.
"""
import os

from . import _kernels_py

if os.environ.get("POPPATH_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

find_windows = _impl.find_windows
precedence_matrix = _impl.precedence_matrix
pair_counts = _impl.pair_counts
