"""Numba on/off switch for the hot kernels.

Every hot kernel in :mod:`iscreen.kernels` ships in two flavors: a numba
``@njit`` loop and a pure-numpy fallback. The fallback is used when numba is
not importable or when the environment variable ``ISCREEN_NO_NUMBA`` is set
to anything other than "" or "0". Both flavors compute the same values
(bit-exact for integer/boolean kernels, last-ulp for float accumulations);
``benchmarks/compare_numba.py`` times them against each other.
"""

import os

NUMBA_DISABLED = os.environ.get("ISCREEN_NO_NUMBA", "") not in ("", "0")

if NUMBA_DISABLED:
    HAS_NUMBA = False
else:
    try:
        from numba import njit  # noqa: F401
        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False


def jit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if HAS_NUMBA:
        from numba import njit
        return njit(cache=True)(func)
    return func
