"""Process-level allocator tuning for array-temporary churn.

Training allocates on the order of 100 MB of short-lived numpy temporaries
per iteration. With glibc's default mmap threshold those come from mmap and
are unmapped on free, so every iteration pays the page faults again; raising
the threshold keeps them on the heap for reuse (2-3x faster iterations).
No-op off glibc. Set MYODYN_NO_MALLOC_TUNING=1 to skip.
"""

import ctypes
import os

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


def tune_allocator():
    if os.environ.get("MYODYN_NO_MALLOC_TUNING"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(_M_MMAP_THRESHOLD, 1 << 30)
        libc.mallopt(_M_TRIM_THRESHOLD, 1 << 30)
        return True
    except (OSError, AttributeError):
        return False
