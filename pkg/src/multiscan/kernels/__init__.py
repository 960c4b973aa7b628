"""Kernel backend selection.

The compiled extension (``_ext``, Cython) is used when it imported cleanly;
otherwise the NumPy fallback (``pure``) takes over.  Set MULTISCAN_PURE_PY=1
to force the fallback.  Both backends expose the same functions; on the
Gaussian path they are bit-identical (see benchmarks/bench_kernels.py for a
speed comparison).
"""

import os

from . import pure

if os.environ.get("MULTISCAN_PURE_PY", "").strip() not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _ext as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND

prefix_sums = _impl.prefix_sums
prefix_sums_batch = _impl.prefix_sums_batch
prefix_table_2d = _impl.prefix_table_2d
prefix_table_2d_batch = _impl.prefix_table_2d_batch
window_stats = _impl.window_stats
scan_reduce = _impl.scan_reduce
max_excess = _impl.max_excess
block_max = _impl.block_max
density_stats = _impl.density_stats
density_max_excess = _impl.density_max_excess
density_block_max = _impl.density_block_max
rect_stats = _impl.rect_stats
rect_max_excess = _impl.rect_max_excess
rect_block_max = _impl.rect_block_max


def available_backends():
    """Names of importable backends (for tests and the benchmark)."""
    names = ["pure"]
    try:
        from . import _ext  # noqa: F401
        names.append("ext")
    except ImportError:
        pass
    return names
