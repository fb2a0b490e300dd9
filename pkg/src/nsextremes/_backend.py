"""Select the kernel implementation at import time.

The compiled ``_core`` extension is used when it was built; otherwise,
or when ``NSEXTREMES_BACKEND=python`` is set, the numpy fallback is used.
"""

import os

from . import _core_py

_requested = os.environ.get("NSEXTREMES_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _core_py
        BACKEND = "python"

__all__ = ["BACKEND", "kernels"]
