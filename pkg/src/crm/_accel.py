"""Backend selection for the compiled kernels.

Set ``CRM_DISABLE_NUMBA=1`` to force the pure-numpy path.  When numba is not
importable the numpy path is used regardless.
"""
import logging
import os

_FALSY = {"", "0", "false", "no", "off"}


def _numba_requested():
    return os.environ.get("CRM_DISABLE_NUMBA", "").strip().lower() in _FALSY


try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise."""
    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(cache=True, **kwargs)(f)

    if func is not None:
        return wrap(func)
    return wrap


def backend():
    return "numba" if USE_NUMBA else "numpy"
