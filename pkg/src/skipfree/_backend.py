"""Select the compiled kernels when available, else the pure-Python twins.

Set ``SKIPFREE_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("SKIPFREE_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels

    COMPILED = False
else:
    try:
        from . import _ckernels as kernels

        COMPILED = True
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

        COMPILED = False

BACKEND = "compiled" if COMPILED else "python"

__all__ = ["kernels", "COMPILED", "BACKEND"]
