"""Backend selection for the hot numeric kernels.

Every kernel in the package exists twice: a loop-style version compiled with
numba, and a vectorized numpy version. Set ``FSIROM_BACKEND=numpy`` (or
``FSIROM_DISABLE_NUMBA=1``) before import to force the numpy path.
"""

import os
import warnings

_requested = os.environ.get("FSIROM_BACKEND", "numba").strip().lower()
if os.environ.get("FSIROM_DISABLE_NUMBA", "0") not in ("", "0"):
    _requested = "numpy"

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None
    if _requested == "numba":
        warnings.warn("numba not found, falling back to the numpy kernels")

USE_NUMBA = _requested == "numba" and _nb is not None
BACKEND = "numba" if USE_NUMBA else "numpy"
HAVE_NUMBA = _nb is not None


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    Kernels decorated here are always compiled when numba is installed so the
    benchmark and the cross-backend tests can call both variants regardless of
    the active backend.
    """
    kwargs.setdefault("cache", True)
    if _nb is None:  # pragma: no cover
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _nb.njit(*args, **kwargs)


def pick(numba_impl, numpy_impl):
    """Return the kernel for the active backend."""
    return numba_impl if USE_NUMBA else numpy_impl
