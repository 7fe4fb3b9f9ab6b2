"""Worker-thread control for the compiled parallel kernels.

The kernels parallelize over time-step blocks with numba's threading
layer. The thread count can only be lowered at runtime, never raised above
the value numba captured at import (NUMBA_NUM_THREADS or the host CPU
count), so set_threads clamps requests into [1, max_threads()] and returns
what actually took effect.
"""

import os

import numba

__all__ = ["max_threads", "set_threads", "hardware_threads"]


def max_threads() -> int:
    """Upper bound on usable worker threads for this process."""
    return int(numba.config.NUMBA_NUM_THREADS)


def hardware_threads() -> int:
    """Hardware threads the host reports."""
    return os.cpu_count() or 1


def set_threads(n: int) -> int:
    """Clamp n into the valid range, apply it, and return the value used."""
    n = int(n)
    used = min(max(n, 1), max_threads())
    numba.set_num_threads(used)
    return used
