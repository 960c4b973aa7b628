"""Sparse approximating window collections.

Evaluating every interval costs O(n^2); a dyadic decomposition of the window
length with a level-dependent endpoint grid brings this down to O(n log n)
windows while keeping the approximation error small enough for optimal
detection.  At level ell, windows (j0, k] have widths in [2^ell, 2^(ell+1))
and endpoints on the grid {0, d, 2d, ...} U {n} with spacing

    d_ell = ceil(2^ell / sqrt(2 log(e n 2^-ell))).

The same construction, with cell count in place of length, yields a
near-linear family of axis-parallel rectangles: gridded base squares of side
2^ell carry rectangles whose aspect ratio follows the geometric progression
m^k, k = 0, +-1, +-2, ...
"""

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .seqmodel import Window


def _grouped_arange(start: np.ndarray, stop: np.ndarray) -> np.ndarray:
    """Concatenation of arange(start[i], stop[i]) for all i."""
    counts = stop - start
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    cum = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return np.arange(total, dtype=np.int64) + np.repeat(start - cum, counts)


def grid_spacing(n: int, ell: int) -> int:
    """Endpoint grid spacing d_ell for intervals of length about 2^ell."""
    if ell < 0 or (1 << ell) > n:
        raise ValueError(f"invalid level {ell} for n={n}: need 2^ell <= n")
    width = 1 << ell
    return math.ceil(width / math.sqrt(2.0 * (1.0 + math.log(n / width))))


def _grid_points(n: int, d: int) -> np.ndarray:
    """Multiples of d in [0, n], with n adjoined."""
    g = np.arange(0, n + 1, d, dtype=np.int64)
    if g[-1] != n:
        g = np.append(g, n)
    return g


@dataclass(frozen=True)
class LevelInfo:
    """One dyadic level of a collection: width band and endpoint spacing."""

    ell: int
    spacing: int
    width_lo: int
    width_hi: int
    start: int  # slice bounds into the window arrays
    stop: int

    @property
    def count(self) -> int:
        return self.stop - self.start


class SparseCollection:
    """Level-structured set of 1D windows, sorted by (level, j, k).

    Windows are stored as parallel arrays: ``j0`` (start - 1, i.e. the
    half-open left endpoint), ``k`` (inclusive right endpoint), ``width``
    and ``level_of``.  ``block_bounds`` delimits the levels, which double as
    the blocks of the blocked and Bonferroni calibrations.
    """

    def __init__(self, n: int, levels: list, j0: np.ndarray, k: np.ndarray):
        self.n = n
        self.levels = levels
        self.j0 = j0
        self.k = k
        self.width = k - j0
        self.level_of = np.repeat(
            np.array([lv.ell for lv in levels], dtype=np.int64),
            np.array([lv.count for lv in levels], dtype=np.int64))
        self.block_bounds = np.array([lv.start for lv in levels] + [len(j0)],
                                     dtype=np.int64)
        for arr in (self.j0, self.k, self.width, self.level_of, self.block_bounds):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.j0.size

    def __iter__(self):
        for a, b in zip(self.j0, self.k):
            yield Window(int(a) + 1, int(b))

    def window_at(self, i: int) -> Window:
        return Window(int(self.j0[i]) + 1, int(self.k[i]))

    @cached_property
    def inv_sqrt_width(self) -> np.ndarray:
        isw = 1.0 / np.sqrt(self.width.astype(np.float64))
        isw.flags.writeable = False
        return isw

    @cached_property
    def collection_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"1d:{self.n}".encode())
        for lv in self.levels:
            h.update(f":{lv.ell},{lv.spacing}".encode())
        h.update(self.j0.tobytes())
        h.update(self.k.tobytes())
        return h.hexdigest()

    def to_csv(self, path) -> None:
        """Audit export with columns level, j, k."""
        with open(path, "w") as fh:
            fh.write("level,j,k\n")
            for lev, a, b in zip(self.level_of, self.j0, self.k):
                fh.write(f"{lev},{a + 1},{b}\n")


def build_collection_1d(n: int) -> SparseCollection:
    """All windows with widths in dyadic bands and endpoints on the level grid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    levels = []
    j0_parts, k_parts = [], []
    pos = 0
    for ell in range(n.bit_length()):
        lo = 1 << ell
        hi = min((1 << (ell + 1)) - 1, n)
        d = grid_spacing(n, ell)
        g = _grid_points(n, d)
        left = np.searchsorted(g, g + lo, side="left")
        right = np.searchsorted(g, g + hi, side="right")
        left = np.minimum(left, right)
        j0 = np.repeat(g, right - left)
        k = g[_grouped_arange(left, right)]
        levels.append(LevelInfo(ell, d, lo, hi, pos, pos + j0.size))
        pos += j0.size
        j0_parts.append(j0)
        k_parts.append(k)
    return SparseCollection(n, levels, np.concatenate(j0_parts), np.concatenate(k_parts))


def approximating_member(coll: SparseCollection, win: Window) -> Window:
    """A collection member at win's level within symmetric difference 2 d_ell.

    Used by tests and documentation to certify the coverage property; the
    scanner itself never needs it.
    """
    if win.k > coll.n:
        raise ValueError(f"window ({win.j}, {win.k}) exceeds collection size {coll.n}")
    w = win.width
    lv = coll.levels[w.bit_length() - 1]
    d, n = lv.spacing, coll.n
    j0, k = win.j - 1, win.k

    def near(x):
        lo = (x // d) * d
        cand = {lo, min(lo + d, n), n}
        return sorted(c for c in cand if 0 <= c <= n)

    best = None
    for a in near(j0):
        for b in near(k):
            if a < b and lv.width_lo <= b - a <= lv.width_hi:
                cost = abs(a - j0) + abs(b - k)
                key = (cost, a, b)
                if best is None or key < best:
                    best = key
    if best is None:
        raise AssertionError(f"no approximating member for {win} at level {lv.ell}")
    return Window(best[1] + 1, best[2])


@dataclass(frozen=True)
class Rect:
    """Axis-parallel rectangle [j1, k1] x [j2, k2], 1-based inclusive."""

    j1: int
    k1: int
    j2: int
    k2: int

    @property
    def cells(self) -> int:
        return (self.k1 - self.j1 + 1) * (self.k2 - self.j2 + 1)


def grid_spacing_2d(ncells: int, ell: int) -> int:
    """Per-axis anchor spacing for base squares of area 4^ell in a grid of
    ncells cells; cell count replaces interval length in the 1D formula."""
    if ell < 0 or 4 ** ell > ncells:
        raise ValueError(f"invalid level {ell} for N={ncells}: need 4^ell <= N")
    side = 1 << ell
    return math.ceil(side / math.sqrt(2.0 * (1.0 + math.log(ncells / 4 ** ell))))


class RectCollection:
    """Level-structured set of axis-parallel rectangles on an n1 x n2 grid.

    Arrays mirror SparseCollection: half-open bounds (j0a, ka] x (j0b, kb],
    cell counts, per-rectangle level and aspect exponent.  Blocks are the
    levels (cell counts within a factor of 4).
    """

    def __init__(self, n1, n2, m, levels, j0a, ka, j0b, kb, kexp_of):
        self.n1, self.n2, self.m = n1, n2, m
        self.ncells = n1 * n2
        self.levels = levels
        self.j0a, self.ka, self.j0b, self.kb = j0a, ka, j0b, kb
        self.kexp_of = kexp_of
        self.cells = (ka - j0a) * (kb - j0b)
        self.level_of = np.repeat(
            np.array([lv.ell for lv in levels], dtype=np.int64),
            np.array([lv.count for lv in levels], dtype=np.int64))
        self.block_bounds = np.array([lv.start for lv in levels] + [len(j0a)],
                                     dtype=np.int64)
        for arr in (self.j0a, self.ka, self.j0b, self.kb, self.cells,
                    self.kexp_of, self.level_of, self.block_bounds):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.j0a.size

    def __iter__(self):
        for a0, a1, b0, b1 in zip(self.j0a, self.ka, self.j0b, self.kb):
            yield Rect(int(a0) + 1, int(a1), int(b0) + 1, int(b1))

    def rect_at(self, i: int) -> Rect:
        return Rect(int(self.j0a[i]) + 1, int(self.ka[i]),
                    int(self.j0b[i]) + 1, int(self.kb[i]))

    @cached_property
    def inv_sqrt_cells(self) -> np.ndarray:
        isw = 1.0 / np.sqrt(self.cells.astype(np.float64))
        isw.flags.writeable = False
        return isw

    @cached_property
    def collection_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"2d:{self.n1}x{self.n2}:m={self.m!r}".encode())
        for lv in self.levels:
            h.update(f":{lv.ell},{lv.spacing}".encode())
        for arr in (self.j0a, self.ka, self.j0b, self.kb):
            h.update(arr.tobytes())
        return h.hexdigest()

    def to_csv(self, path) -> None:
        """Audit export with columns level, j, k, j2, k2."""
        with open(path, "w") as fh:
            fh.write("level,j,k,j2,k2\n")
            for lev, a0, a1, b0, b1 in zip(self.level_of, self.j0a, self.ka,
                                           self.j0b, self.kb):
                fh.write(f"{lev},{a0 + 1},{a1},{b0 + 1},{b1}\n")


def _level_shapes(a: int, n1: int, n2: int, m: float):
    """Rectangle side pairs (ceil(m^k a), ceil(m^-k a)) that fit the grid,
    deduplicated, listed by ascending aspect exponent k."""
    shapes = {}
    for kexp in _aspect_exponents(a, n1, n2, m):
        s1 = math.ceil(m ** kexp * a)
        s2 = math.ceil(m ** (-kexp) * a)
        if 1 <= s1 <= n1 and 1 <= s2 <= n2:
            shapes.setdefault((s1, s2), kexp)
    return sorted(((kexp, s1, s2) for (s1, s2), kexp in shapes.items()))


def _aspect_exponents(a: int, n1: int, n2: int, m: float):
    # k = 0, +-1, +-2, ... until the growing side leaves the grid
    yield 0
    for sign, limit in ((1, n1), (-1, n2)):
        kexp = sign
        while math.ceil(m ** abs(kexp) * a) <= limit:
            yield kexp
            kexp += sign


def build_collection_2d(n1: int, n2: int, m: float = 2.0) -> RectCollection:
    """Gridded base squares with geometric aspect-ratio progression."""
    if n1 < 1 or n2 < 1:
        raise ValueError("grid dimensions must be >= 1")
    if not m > 1.0:
        raise ValueError("aspect base m must be > 1")
    ncells = n1 * n2
    nlev = 0
    while 4 ** (nlev + 1) <= ncells:
        nlev += 1
    parts = []  # (level, j0a, ka, j0b, kb, kexp)
    for ell in range(nlev + 1):
        a = 1 << ell
        d = grid_spacing_2d(ncells, ell)
        g1 = _grid_points(n1, d)
        g2 = _grid_points(n2, d)
        for kexp, s1, s2 in _level_shapes(a, n1, n2, m):
            x0 = g1[g1 + s1 <= n1]
            y0 = g2[g2 + s2 <= n2]
            if x0.size == 0 or y0.size == 0:
                continue
            xx = np.repeat(x0, y0.size)
            yy = np.tile(y0, x0.size)
            parts.append((ell, kexp, xx, xx + s1, yy, yy + s2))

    total = sum(p[2].size for p in parts)
    j0a = np.empty(total, dtype=np.int64)
    ka = np.empty(total, dtype=np.int64)
    j0b = np.empty(total, dtype=np.int64)
    kb = np.empty(total, dtype=np.int64)
    lev = np.empty(total, dtype=np.int64)
    kex = np.empty(total, dtype=np.int64)
    pos = 0
    for ell, kexp, xs, xe, ys, ye in parts:
        sl = slice(pos, pos + xs.size)
        j0a[sl], ka[sl], j0b[sl], kb[sl] = xs, xe, ys, ye
        lev[sl], kex[sl] = ell, kexp
        pos += xs.size

    # drop rectangles produced identically at a later (level, k); lexsort is
    # stable so the first member of each duplicate run has the lowest build index
    order = np.lexsort((kb, j0b, ka, j0a))
    sj0a, ska, sj0b, skb = j0a[order], ka[order], j0b[order], kb[order]
    first = np.ones(total, dtype=bool)
    if total > 1:
        first[1:] = ((sj0a[1:] != sj0a[:-1]) | (ska[1:] != ska[:-1])
                     | (sj0b[1:] != sj0b[:-1]) | (skb[1:] != skb[:-1]))
    keep = np.sort(order[first])
    j0a, ka, j0b, kb = j0a[keep], ka[keep], j0b[keep], kb[keep]
    lev, kex = lev[keep], kex[keep]

    levels = []
    pos = 0
    for ell in range(nlev + 1):
        cnt = int(np.count_nonzero(lev == ell))
        levels.append(LevelInfo(ell, grid_spacing_2d(ncells, ell),
                                4 ** ell, 4 ** (ell + 1) - 1, pos, pos + cnt))
        pos += cnt
    return RectCollection(n1, n2, m, levels, j0a, ka, j0b, kb, kex)
