"""NumPy scan kernels.

Reference implementation of the hot loops; mirrors the compiled extension in
``multiscan.kernels._ext``.  Prefix sums accumulate in extended precision
(long double) so window sums stay accurate at large n; the Gaussian window
statistic is computed as ``(ps[k] - ps[j0]) * inv_sqrt_w`` with exactly the
same operation order as the extension, which keeps the two backends
bit-identical on the Gaussian path.

Index conventions: ``j0``/``k`` are half-open window bounds into the prefix
array (window covers values j0+1..k, 1-based).  Density windows use 1-based
order-statistic indices ``j < k``.
"""

import numpy as np

BACKEND = "pure"


def prefix_sums_batch(values: np.ndarray) -> np.ndarray:
    """Row-wise prefix sums with a leading zero, (R, n) -> (R, n+1)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    r, n = values.shape
    out = np.empty((r, n + 1), dtype=np.float64)
    out[:, 0] = 0.0
    out[:, 1:] = np.cumsum(values, axis=1, dtype=np.longdouble)
    return out


def prefix_sums(values: np.ndarray) -> np.ndarray:
    return prefix_sums_batch(np.atleast_2d(values))[0]


def prefix_table_2d(grid: np.ndarray) -> np.ndarray:
    """2D prefix table with zero row/column, (n1, n2) -> (n1+1, n2+1)."""
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    n1, n2 = grid.shape
    out = np.zeros((n1 + 1, n2 + 1), dtype=np.float64)
    acc = np.cumsum(np.cumsum(grid.astype(np.longdouble), axis=0), axis=1)
    out[1:, 1:] = acc
    return out


def prefix_table_2d_batch(grids: np.ndarray) -> np.ndarray:
    grids = np.ascontiguousarray(grids, dtype=np.float64)
    r, n1, n2 = grids.shape
    out = np.zeros((r, n1 + 1, n2 + 1), dtype=np.float64)
    acc = np.cumsum(np.cumsum(grids.astype(np.longdouble), axis=1), axis=2)
    out[:, 1:, 1:] = acc
    return out


def window_stats(ps: np.ndarray, j0: np.ndarray, k: np.ndarray, isw: np.ndarray) -> np.ndarray:
    """Standardized window sums for one sequence."""
    return (ps[k] - ps[j0]) * isw


_SCAN_CHUNK = 16384  # keep per-chunk temporaries cache-resident


def scan_reduce(ps, j0, k, isw, thr):
    """One-dataset scan reduction: (max, tie indices, exceeder indices, stats).

    Returns the maximum statistic, the indices of every window attaining it
    (in collection order), and the indices and statistics of every window
    strictly above its threshold.  Chunked so the working set stays small;
    results are independent of the chunk size.
    """
    nw = j0.shape[0]
    best = -np.inf
    ties = []
    exceed_idx = []
    exceed_stats = []
    for s in range(0, nw, _SCAN_CHUNK):
        e = min(s + _SCAN_CHUNK, nw)
        stats = (ps[k[s:e]] - ps[j0[s:e]]) * isw[s:e]
        mx = stats.max()
        if mx > best:
            best = mx
            ties = [np.flatnonzero(stats == mx) + s]
        elif mx == best:
            ties.append(np.flatnonzero(stats == mx) + s)
        over = np.flatnonzero(stats > thr[s:e])
        if over.size:
            exceed_idx.append(over + s)
            exceed_stats.append(stats[over])
    return (float(best),
            np.concatenate(ties) if ties else np.empty(0, dtype=np.int64),
            np.concatenate(exceed_idx) if exceed_idx else np.empty(0, dtype=np.int64),
            np.concatenate(exceed_stats) if exceed_stats else np.empty(0))


def max_excess(ps: np.ndarray, j0: np.ndarray, k: np.ndarray, isw: np.ndarray,
               offset: np.ndarray) -> np.ndarray:
    """Per-row max of (window stat - offset) over all windows; (R,) result."""
    stats = ps[:, k] - ps[:, j0]
    stats *= isw
    stats -= offset
    return stats.max(axis=1)


def block_max(ps: np.ndarray, j0: np.ndarray, k: np.ndarray, isw: np.ndarray,
              bounds: np.ndarray) -> np.ndarray:
    """Per-row, per-block max of the window stat.

    Windows must be sorted by block; block b spans bounds[b]:bounds[b+1].
    Empty blocks yield -inf.
    """
    stats = ps[:, k] - ps[:, j0]
    stats *= isw
    nb = len(bounds) - 1
    out = np.full((ps.shape[0], nb), -np.inf)
    for b in range(nb):
        s, e = bounds[b], bounds[b + 1]
        if e > s:
            out[:, b] = stats[:, s:e].max(axis=1)
    return out


def _density_stats_matrix(p: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    nn = float(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = m * np.log(m / (nn * p))
        rem = nn - m
        t = t + np.where(rem > 0.0, rem * np.log(rem / (nn * (1.0 - p))), 0.0)
        out = np.where((p > 0.0) & (m > nn * p), np.sqrt(2.0 * t), 0.0)
    return out


def density_stats(pts: np.ndarray, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    """sqrt(2 logLR) statistics on order-statistic windows of one sample."""
    p = pts[k - 1] - pts[j - 1]
    m = (k - j + 1).astype(np.float64)
    return _density_stats_matrix(p, m, pts.shape[0])


def density_max_excess(pts: np.ndarray, j: np.ndarray, k: np.ndarray,
                       offset: np.ndarray) -> np.ndarray:
    p = pts[:, k - 1] - pts[:, j - 1]
    m = (k - j + 1).astype(np.float64)
    stats = _density_stats_matrix(p, m, pts.shape[1])
    stats -= offset
    return stats.max(axis=1)


def density_block_max(pts: np.ndarray, j: np.ndarray, k: np.ndarray,
                      bounds: np.ndarray) -> np.ndarray:
    p = pts[:, k - 1] - pts[:, j - 1]
    m = (k - j + 1).astype(np.float64)
    stats = _density_stats_matrix(p, m, pts.shape[1])
    nb = len(bounds) - 1
    out = np.full((pts.shape[0], nb), -np.inf)
    for b in range(nb):
        s, e = bounds[b], bounds[b + 1]
        if e > s:
            out[:, b] = stats[:, s:e].max(axis=1)
    return out


def _rect_sums(pt, j0a, ka, j0b, kb):
    return pt[..., ka, kb] - pt[..., j0a, kb] - pt[..., ka, j0b] + pt[..., j0a, j0b]


def rect_stats(pt: np.ndarray, j0a, ka, j0b, kb, isw: np.ndarray) -> np.ndarray:
    """Standardized rectangle sums from one 2D prefix table."""
    return _rect_sums(pt, j0a, ka, j0b, kb) * isw


def rect_max_excess(pt: np.ndarray, j0a, ka, j0b, kb, isw, offset) -> np.ndarray:
    stats = _rect_sums(pt, j0a, ka, j0b, kb)
    stats *= isw
    stats -= offset
    return stats.max(axis=1)


def rect_block_max(pt: np.ndarray, j0a, ka, j0b, kb, isw, bounds) -> np.ndarray:
    stats = _rect_sums(pt, j0a, ka, j0b, kb)
    stats *= isw
    nb = len(bounds) - 1
    out = np.full((pt.shape[0], nb), -np.inf)
    for b in range(nb):
        s, e = bounds[b], bounds[b + 1]
        if e > s:
            out[:, b] = stats[:, s:e].max(axis=1)
    return out
