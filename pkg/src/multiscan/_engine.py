"""Shared simulation engine.

A *surface* bundles a window collection with one of the three scan models
(gaussian sequence, density/order-statistic, 2D grid): it knows how to draw
null data, turn a batch into prefix structures, and reduce a batch to
per-replicate maxima or per-block maxima via the kernels.  The density model
scans only windows with at least two points, so its surface restricts the
collection to the active subset; thresholds are expanded back to the full
collection with +inf on inactive windows.

Replicate r of a run is always drawn from the stream (seed, namespace, r),
so results do not depend on batch size or worker count.  Parallel execution
partitions the fixed batch grid across forked processes and reassembles
results by batch index.
"""

import numpy as np

from . import _rng, kernels

GAUSSIAN = "gaussian"
DENSITY = "density"
GRID2D = "grid2d"
MODELS = (GAUSSIAN, DENSITY, GRID2D)

# stats temporaries in the pure backend scale with batch * windows
_TARGET_BATCH_ELEMS = 4_000_000
_MAX_BATCH_ROWS = 1024


class GaussianSurface:
    model = GAUSSIAN

    def __init__(self, coll):
        self.coll = coll
        self.n = coll.n
        self.active_idx = np.arange(len(coll))
        self.sizes = coll.width
        self.bounds = coll.block_bounds
        self.ells = np.array([lv.ell for lv in coll.levels], dtype=np.int64)

    def simulate(self, seed, namespace, start, count):
        return _rng.normal_rows(self.n, seed, namespace, start, count)

    def prepare(self, data):
        return kernels.prefix_sums_batch(data)

    def max_excess(self, prep, offsets):
        c = self.coll
        return kernels.max_excess(prep, c.j0, c.k, c.inv_sqrt_width, offsets)

    def block_max(self, prep):
        c = self.coll
        return kernels.block_max(prep, c.j0, c.k, c.inv_sqrt_width, self.bounds)

    def stats(self, values):
        c = self.coll
        ps = kernels.prefix_sums(values)
        return kernels.window_stats(ps, c.j0, c.k, c.inv_sqrt_width)


class DensitySurface:
    model = DENSITY

    def __init__(self, coll):
        self.coll = coll
        self.n = coll.n
        idx = np.flatnonzero(coll.width >= 2)
        self.active_idx = idx
        self.j = coll.j0[idx] + 1
        self.k = coll.k[idx]
        self.sizes = coll.width[idx]
        lvl = coll.level_of[idx]
        self.ells = np.array([lv.ell for lv in coll.levels], dtype=np.int64)
        self.bounds = np.concatenate(
            [np.searchsorted(lvl, self.ells), [idx.size]]).astype(np.int64)

    def simulate(self, seed, namespace, start, count):
        return _rng.uniform_rows(self.n, seed, namespace, start, count)

    def prepare(self, data):
        return data

    def max_excess(self, prep, offsets):
        return kernels.density_max_excess(prep, self.j, self.k, offsets)

    def block_max(self, prep):
        return kernels.density_block_max(prep, self.j, self.k, self.bounds)

    def stats(self, points):
        return kernels.density_stats(points, self.j, self.k)


class Grid2dSurface:
    model = GRID2D

    def __init__(self, coll):
        self.coll = coll
        self.n = coll.ncells
        self.active_idx = np.arange(len(coll))
        self.sizes = coll.cells
        self.bounds = coll.block_bounds
        self.ells = np.array([lv.ell for lv in coll.levels], dtype=np.int64)

    def simulate(self, seed, namespace, start, count):
        return _rng.normal_grids(self.coll.n1, self.coll.n2, seed, namespace,
                                 start, count)

    def prepare(self, data):
        return kernels.prefix_table_2d_batch(data)

    def max_excess(self, prep, offsets):
        c = self.coll
        return kernels.rect_max_excess(prep, c.j0a, c.ka, c.j0b, c.kb,
                                       c.inv_sqrt_cells, offsets)

    def block_max(self, prep):
        c = self.coll
        return kernels.rect_block_max(prep, c.j0a, c.ka, c.j0b, c.kb,
                                      c.inv_sqrt_cells, self.bounds)

    def stats(self, grid_values):
        c = self.coll
        pt = kernels.prefix_table_2d(grid_values)
        return kernels.rect_stats(pt, c.j0a, c.ka, c.j0b, c.kb, c.inv_sqrt_cells)


def make_surface(coll, model):
    if model == GAUSSIAN:
        return GaussianSurface(coll)
    if model == DENSITY:
        return DensitySurface(coll)
    if model == GRID2D:
        return Grid2dSurface(coll)
    raise ValueError(f"unknown model {model!r}: expected one of {MODELS}")


def expand_active(surface, values, fill):
    """Per-active-window values -> per-collection array, `fill` elsewhere."""
    full = np.full(len(surface.coll), fill, dtype=np.float64)
    full[surface.active_idx] = values
    return full


def batch_plan(surface, reps):
    """Fixed (start, count) partition of the replicate range."""
    nw = max(int(surface.active_idx.size), 1)
    rows = max(8, min(_MAX_BATCH_ROWS, _TARGET_BATCH_ELEMS // nw,
                      _TARGET_BATCH_ELEMS // max(surface.n, 1)))
    return [(s, min(rows, reps - s)) for s in range(0, reps, rows)]


def _sim_job(surface, mode, offsets, seed, namespace, start, count):
    prep = surface.prepare(surface.simulate(seed, namespace, start, count))
    if mode == "max":
        return surface.max_excess(prep, offsets)
    return surface.block_max(prep)


def _run_plan(jobs, workers):
    if workers <= 1 or len(jobs) == 1:
        return [job[0](*job[1:]) for job in jobs]
    import multiprocessing
    from concurrent.futures import ProcessPoolExecutor
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        return [job[0](*job[1:]) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futs = [pool.submit(job[0], *job[1:]) for job in jobs]
        return [f.result() for f in futs]


def simulate_max_excess(surface, offsets, reps, seed, namespace, workers=1):
    """(reps,) per-replicate max of (stat - offset) on null data."""
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    jobs = [(_sim_job, surface, "max", offsets, seed, namespace, s, c)
            for s, c in batch_plan(surface, reps)]
    return np.concatenate(_run_plan(jobs, workers))


def simulate_block_max(surface, reps, seed, namespace, workers=1):
    """(reps, nblocks) per-replicate per-block max of the raw stat."""
    jobs = [(_sim_job, surface, "block", None, seed, namespace, s, c)
            for s, c in batch_plan(surface, reps)]
    return np.concatenate(_run_plan(jobs, workers), axis=0)
