"""Backend selection for the gridworld hot kernels.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension is missing or GOALNAV_PURE_PYTHON=1 is set. Both expose the same
functions with bit-identical outputs (see tests/test_kernels.py).
"""
import os

if os.environ.get("GOALNAV_PURE_PYTHON", "0") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
cast_columns = _impl.cast_columns
paint_columns = _impl.paint_columns
bfs_dist = _impl.bfs_dist
