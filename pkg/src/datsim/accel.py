"""Kernel backend selection: numba-compiled or plain numpy.

The hot kernels in ``_kernels.py`` are written as ordinary numpy code and
compiled with ``numba.njit`` when the accelerated backend is active. The
backend is chosen once, at import time, from the ``DATSIM_BACKEND``
environment variable:

* ``auto``  (default) use numba when importable, else plain numpy
* ``numba`` require numba, raise if it is missing
* ``numpy`` force the pure-numpy interpretation of the same kernels

Both backends execute identical source, so traces agree to floating-point
roundoff. ``datsim bench`` compares them in subprocesses.
"""

import os

BACKEND_ENV = "DATSIM_BACKEND"


def _select() -> bool:
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{BACKEND_ENV} must be one of auto|numba|numpy, got {choice!r}"
        )
    if choice == "numpy":
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return False
    return True


USING_NUMBA = _select()

if USING_NUMBA:
    from numba import njit

    def jit(func):
        """Compile ``func`` for the active backend."""
        return njit(cache=True)(func)

else:

    def jit(func):
        """Identity decorator: run ``func`` as plain numpy."""
        return func


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
