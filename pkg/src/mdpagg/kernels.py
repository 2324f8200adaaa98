"""Select the trajectory kernel at import time.

The Cython extension ``mdpagg._walk`` is used when it was built; otherwise,
or when ``MDPAGG_PURE_PYTHON`` is set to a non-empty value, the pure-Python
implementation is used. Both consume uniforms identically, so simulated data
does not depend on the backend.
"""
import os

from . import _walk_py

BACKEND = "python"
walk_batch = _walk_py.walk_batch

if not os.environ.get("MDPAGG_PURE_PYTHON"):
    try:
        from . import _walk
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        walk_batch = _walk.walk_batch

__all__ = ["BACKEND", "walk_batch"]
