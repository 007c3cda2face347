"""Numba switch.

Set ``SEPVOL_DISABLE_NUMBA=1`` to run the pure-numpy paths instead of the
compiled kernels.  The flag is read once at import time.
"""
import os

_disabled = os.environ.get("SEPVOL_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _nb = None

HAVE_NUMBA = _nb is not None and not _disabled

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def njit(*args, **kwargs):
    """``numba.njit`` with project defaults, or a no-op when numba is off."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    opts = dict(numba_default)
    opts.update(kwargs)
    if args and callable(args[0]):
        return _nb.njit(**opts)(args[0])
    return _nb.njit(*args, **opts)
