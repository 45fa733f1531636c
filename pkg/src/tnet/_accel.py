"""Optional numba acceleration.

Set ``TNET_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is read
once at import time; both code paths stay importable so they can be compared.
"""
import os
import warnings

_DISABLED = os.environ.get("TNET_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False
    if not _DISABLED:
        warnings.warn("numba not importable; falling back to numpy kernels", RuntimeWarning)

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Decorated functions are always compiled if possible (regardless of the env
    flag) so that tests and benchmarks can exercise both paths side by side.
    """
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def identity(fn):
        return fn

    return identity
