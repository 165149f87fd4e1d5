"""JIT toggle for the hot kernels.

Every function in :mod:`oc2sim.kernels` is written once, in plain Python
over NumPy arrays, and compiled with numba unless the environment variable
``OC2_DISABLE_NUMBA`` is set to a non-empty value other than ``0``.  Both
paths execute the identical statements in the identical order, so results
are bit-for-bit the same; only speed differs.  ``benchmarks/bench_kernels.py``
measures the gap.
"""

import os

NUMBA_ENABLED = os.environ.get("OC2_DISABLE_NUMBA", "0") in ("", "0")

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dependency
        numba = None
        NUMBA_ENABLED = False


def njit_kernel(fn):
    """Compile ``fn`` with numba, or return it untouched in fallback mode."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def pure(kernel):
    """The uncompiled Python function behind a kernel (itself in fallback mode)."""
    return getattr(kernel, "py_func", kernel)
