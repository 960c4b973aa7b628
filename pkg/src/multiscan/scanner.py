"""Scan evaluation.

``naive_scan`` is the O(n^2) exhaustive reference; the ``fast_scan*``
functions evaluate only the sparse collection via prefix sums, in time
proportional to the number of collection windows, and apply a
CriticalValueVector to produce a ScanReport.  Both paths compute each
window's statistic with the identical floating-point expression, so the fast
maximum can never exceed the exhaustive one and agrees exactly whenever the
exhaustive argmax belongs to the collection.

Ties are broken to the lexicographically smallest window (smallest j, then
k; rectangles by (j1, k1, j2, k2)).
"""

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _engine, kernels
from .calibrate import CalibrationKind, CriticalValueVector, penalty
from .densmodel import OrderWindow, PointSample
from .errors import ConfigurationError
from .seqmodel import Sequence, Window
from .sparsegrid import Rect, RectCollection, SparseCollection

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Exceedance:
    window: object  # Window, OrderWindow or Rect
    stat: float
    threshold: float


@dataclass(frozen=True)
class ScanReport:
    """Outcome of applying a calibrated scan to one dataset."""

    model: str
    kind: CalibrationKind
    alpha: float
    n: int
    max_stat: float
    argmax: object
    penalized_max: float | None
    rejected: bool
    exceedances: tuple
    collection_hash: str
    provenance: dict

    def to_dict(self) -> dict:
        def win_dict(w):
            return {f: int(getattr(w, f)) for f in w.__dataclass_fields__}

        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "kind": self.kind.value,
            "alpha": self.alpha,
            "n": self.n,
            "max_stat": self.max_stat,
            "argmax": win_dict(self.argmax),
            "penalized_max": self.penalized_max,
            "rejected": self.rejected,
            "exceedances": [
                {"window": win_dict(e.window), "stat": e.stat, "threshold": e.threshold}
                for e in self.exceedances
            ],
            "provenance": self.provenance,
        }

    def to_json(self, indent=1) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)


@dataclass(frozen=True)
class GridData:
    """n1 x n2 observation grid with its 2D prefix-sum table."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.size < 1:
            raise ValueError("grid must be a non-empty 2D array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape

    @cached_property
    def prefix(self) -> np.ndarray:
        return kernels.prefix_table_2d(self.values)


def naive_scan(seq: Sequence):
    """Exhaustive maximum of the standardized sum over all O(n^2) windows."""
    ps = kernels.prefix_sums(seq.values)
    n = seq.n
    isw = 1.0 / np.sqrt(np.arange(1, n + 1, dtype=np.float64))
    best = -np.inf
    arg = (1, 1)
    for j in range(1, n + 1):
        stats = (ps[j:] - ps[j - 1]) * isw[:n - j + 1]
        i = int(np.argmax(stats))
        if stats[i] > best:
            best = float(stats[i])
            arg = (j, j + i)
    return best, Window(*arg)


def _pick_argmax(tie_pos: np.ndarray, keys) -> int:
    """Position of the max; ties resolved to the lexicographically smallest keys."""
    if tie_pos.size == 1:
        return int(tie_pos[0])
    order = np.lexsort(tuple(k[tie_pos] for k in reversed(keys)))
    return int(tie_pos[order[0]])


def _check(cond, message):
    if not cond:
        raise ConfigurationError(message)


def _provenance(cv: CriticalValueVector) -> dict:
    return {"seed": cv.seed, "reps": cv.reps,
            "collection_hash": cv.collection_hash,
            "kernel_backend": kernels.BACKEND}


def _assemble(model, cv, n, mx, tie_pos, exc_pos, exc_stats, thresholds,
              windows, keys):
    exceedances = tuple(
        Exceedance(window=windows(int(i)), stat=float(s),
                   threshold=float(thresholds[int(i)]))
        for i, s in zip(exc_pos, exc_stats))
    return ScanReport(
        model=model, kind=cv.kind, alpha=cv.alpha, n=n,
        max_stat=float(mx), argmax=windows(_pick_argmax(tie_pos, keys)),
        penalized_max=None, rejected=bool(exc_pos.size),
        exceedances=exceedances, collection_hash=cv.collection_hash,
        provenance=_provenance(cv))


def _report_from_stats(model, cv, n, stats, thresholds, windows, keys):
    mx = stats.max()
    ties = np.flatnonzero(stats == mx)
    exc = np.flatnonzero(stats > thresholds)
    return _assemble(model, cv, n, mx, ties, exc, stats[exc], thresholds,
                     windows, keys)


def fast_scan(seq: Sequence, coll: SparseCollection,
              cv: CriticalValueVector) -> ScanReport:
    """Scan one sequence over the sparse collection and apply thresholds."""
    _check(coll.n == seq.n, f"collection is for n={coll.n}, data has n={seq.n}")
    _check(cv.model == _engine.GAUSSIAN, f"calibration is for model {cv.model!r}")
    _check(cv.collection_hash == coll.collection_hash,
           "calibration was built for a different collection")
    ps = kernels.prefix_sums(seq.values)
    mx, ties, exc, exc_stats = kernels.scan_reduce(
        ps, coll.j0, coll.k, coll.inv_sqrt_width, cv.thresholds)
    report = _assemble(_engine.GAUSSIAN, cv, seq.n, mx, ties, exc, exc_stats,
                       cv.thresholds, coll.window_at, (coll.j0, coll.k))
    if cv.kind in (CalibrationKind.DS, CalibrationKind.SAC):
        pen_max = kernels.max_excess(np.atleast_2d(ps), coll.j0, coll.k,
                                     coll.inv_sqrt_width,
                                     penalty(cv.kind, cv.n, coll.width))[0]
        report = ScanReport(**{**report.__dict__, "penalized_max": float(pen_max)})
    return report


def _with_penalized(report, cv, stats, sizes):
    if cv.kind not in (CalibrationKind.DS, CalibrationKind.SAC):
        return report
    pen = penalty(cv.kind, cv.n, sizes)
    return ScanReport(**{**report.__dict__, "penalized_max": float(np.max(stats - pen))})


def fast_scan_density(sample: PointSample, coll: SparseCollection,
                      cv: CriticalValueVector) -> ScanReport:
    """Density scan on order-statistic windows (width-1 windows are skipped)."""
    _check(coll.n == sample.n, f"collection is for n={coll.n}, data has n={sample.n}")
    _check(cv.model == _engine.DENSITY, f"calibration is for model {cv.model!r}")
    _check(cv.collection_hash == coll.collection_hash,
           "calibration was built for a different collection")
    surface = _engine.DensitySurface(coll)
    stats = surface.stats(sample.points)

    def window_at(pos):
        return OrderWindow(int(surface.j[pos]), int(surface.k[pos]))

    report = _report_from_stats(_engine.DENSITY, cv, sample.n, stats,
                                cv.thresholds[surface.active_idx], window_at,
                                (surface.j, surface.k))
    return _with_penalized(report, cv, stats, surface.sizes)


def fast_scan_2d(grid: GridData, rects: RectCollection,
                 cv: CriticalValueVector) -> ScanReport:
    """Rectangle scan of a 2D grid over the sparse rectangle collection."""
    n1, n2 = grid.shape
    _check((rects.n1, rects.n2) == (n1, n2),
           f"collection is for {rects.n1}x{rects.n2}, data is {n1}x{n2}")
    _check(cv.model == _engine.GRID2D, f"calibration is for model {cv.model!r}")
    _check(cv.collection_hash == rects.collection_hash,
           "calibration was built for a different collection")
    stats = kernels.rect_stats(grid.prefix, rects.j0a, rects.ka, rects.j0b,
                               rects.kb, rects.inv_sqrt_cells)
    report = _report_from_stats(_engine.GRID2D, cv, rects.ncells, stats,
                                cv.thresholds, rects.rect_at,
                                (rects.j0a, rects.ka, rects.j0b, rects.kb))
    return _with_penalized(report, cv, stats, rects.cells)


def naive_scan_2d(grid: GridData):
    """Exhaustive maximum over all axis-parallel rectangles (desk scale)."""
    pt = grid.prefix
    n1, n2 = grid.shape
    isw = 1.0 / np.sqrt(np.arange(1, n1 * n2 + 1, dtype=np.float64))
    best = -np.inf
    arg = (1, 1, 1, 1)
    for j1 in range(1, n1 + 1):
        for k1 in range(j1, n1 + 1):
            h = k1 - j1 + 1
            for j2 in range(1, n2 + 1):
                # same inclusion-exclusion order as the rectangle kernels
                sums = (pt[k1, j2:] - pt[j1 - 1, j2:]
                        - pt[k1, j2 - 1] + pt[j1 - 1, j2 - 1])
                stats = sums * isw[np.arange(h, h * (n2 - j2 + 1) + 1, h) - 1]
                i = int(np.argmax(stats))
                if stats[i] > best:
                    best = float(stats[i])
                    arg = (j1, k1, j2, j2 + i)
    return best, Rect(*arg)
