"""Numba availability and kernel-path selection.

Hot kernels ship in two versions: numba ``@njit`` loops and vectorized
numpy. The numba path is used when numba imports cleanly, unless the
environment variable ``LINESTITCH_DISABLE_NUMBA`` is set to a truthy
value, in which case the numpy path runs everywhere. ``benchmarks/``
compares the two.
"""

from __future__ import annotations

import os


def _truthy(value: str | None) -> bool:
    return (value or "").strip().lower() not in ("", "0", "false", "no")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


HAVE_NUMBA = _numba_available()
NUMBA_DISABLED = _truthy(os.environ.get("LINESTITCH_DISABLE_NUMBA"))
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED

if HAVE_NUMBA:
    from numba import njit, prange  # noqa: F401
else:  # pragma: no cover - exercised only without numba installed
    def njit(*args, **kwargs):
        def wrap(func):
            return func
        if args and callable(args[0]) and len(args) == 1 and not kwargs:
            return args[0]
        return wrap

    prange = range


def active_path() -> str:
    """Name of the kernel path selected at import time."""
    return "numba" if USE_NUMBA else "numpy"
