"""JIT switch.

Kernels are compiled with numba unless ``SELDOOR_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``; in that case every ``@jit`` function runs
unchanged as plain Python over numpy arrays, with identical arithmetic.
The flag is read once, at import.
"""

import os

_flag = os.environ.get("SELDOOR_DISABLE_NUMBA", "").strip()
USE_NUMBA = _flag in ("", "0")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:

    def jit(fn=None, **kwargs):
        opts = {"cache": True, "nogil": True}
        opts.update(kwargs)
        if fn is None:
            return lambda f: numba.njit(**opts)(f)
        return numba.njit(**opts)(fn)

else:

    def jit(fn=None, **kwargs):
        if fn is None:
            return lambda f: f
        return fn


BACKEND = "numba" if USE_NUMBA else "python"
