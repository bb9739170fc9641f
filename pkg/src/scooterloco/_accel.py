"""Numba switch.

Set ``SCOOTERLOCO_DISABLE_NUMBA=1`` before import to run every kernel as
plain Python/numpy. Kernels that have a vectorised numpy form pick it when
numba is off.
"""
import os


def _flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def _have_numba():
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


USE_NUMBA = _have_numba() and not _flag("SCOOTERLOCO_DISABLE_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


if USE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit
