"""Backend selection for the compiled kernels.

Set ``COVBRACKETS_DISABLE_NUMBA=1`` to force the pure-numpy code paths,
for example when debugging or when numba is not installed.
"""

import os

_FLAG = os.environ.get("COVBRACKETS_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """Wrap ``numba.njit`` with caching, or return the function unchanged."""
    kwargs.setdefault("cache", True)

    def wrap(func):
        if not HAVE_NUMBA:
            return func
        return _numba.njit(**kwargs)(func)

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
