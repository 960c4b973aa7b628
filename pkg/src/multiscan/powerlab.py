"""Power experiments and finite-sample evaluation.

The detection boundary mu(n, w) = (sqrt(2) + eps) sqrt(log(n/w) / w)
separates detectable from undetectable signal amplitudes; the power lab
measures where each calibration actually sits relative to it.  Power points
estimate the rejection probability for a centered width-w signal; the
realized exponent bisects to the 50%-power amplitude mu* and normalizes,

    exponent = w mu*^2 / (2 log(n/w)),

so that exponent = 1 means attaining the sqrt(2) boundary constant exactly.

All experiments draw replicate r of a given seed from the same stream
regardless of the calibration kind under test, so power comparisons across
kinds are coupled (common random numbers); this makes qualitative orderings
far less noisy than independent simulations at the same replication.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _engine, _rng, kernels
from .calibrate import CalibrationKey, CalibrationKind
from .errors import ConfigurationError, ExperimentError

DEFAULT_CAL_REPS = 10_000


def boundary_mu(n: int, w: int, eps: float = 0.0) -> float:
    """Detection-boundary amplitude (sqrt(2) + eps) sqrt(log(n/w) / w).

    Returns 0 for w = n, where the log term vanishes and detectability is
    governed by the parametric rate instead.
    """
    if not (1 <= w <= n):
        raise ValueError(f"width {w} out of range [1, {n}]")
    return (math.sqrt(2.0) + eps) * math.sqrt(math.log(n / w) / w)


@dataclass(frozen=True)
class PowerPoint:
    """Estimated rejection probability at one (kind, n, w, mu)."""

    kind: CalibrationKind
    n: int
    w: int
    mu: float
    reps: int
    rejections: int
    power: float
    mc_se: float


@dataclass(frozen=True)
class RealizedExponent:
    """50%-power amplitude and its boundary-normalized exponent."""

    kind: CalibrationKind
    n: int
    w: int
    mu_star: float
    exponent: float
    mu_star_se: float
    exponent_se: float


def centered_window(n: int, w: int):
    """Canonical signal placement: centered width-w window (j, k)."""
    j = (n - w) // 2 + 1
    return j, j + w - 1


def _rejection_counts(cvs, coll, w, mu, reps, seed, workers=1):
    """Rejections per calibration vector over shared replicate datasets."""
    n = coll.n
    if not (1 <= w <= n):
        raise ValueError(f"width {w} out of range [1, {n}]")
    j, k = centered_window(n, w)
    offsets = [np.ascontiguousarray(cv.thresholds) for cv in cvs]
    surface = _engine.GaussianSurface(coll)
    jobs = [(_power_job, coll, offsets, j, k, mu, seed, s, c)
            for s, c in _engine.batch_plan(surface, reps)]
    parts = _engine._run_plan(jobs, workers)
    return np.sum(parts, axis=0)


def _power_job(coll, offsets, j, k, mu, seed, start, count):
    data = _rng.normal_rows(coll.n, seed, _rng.NS_EXPERIMENT, start, count)
    data[:, j - 1:k] += mu
    ps = kernels.prefix_sums_batch(data)
    return np.array([
        int(np.count_nonzero(
            kernels.max_excess(ps, coll.j0, coll.k, coll.inv_sqrt_width, off) > 0))
        for off in offsets])


def _fetch_cv(table, kind, coll, alpha, cal_reps, cal_seed, workers):
    if table is None:
        raise ConfigurationError("a calibration table is required")
    key = CalibrationKey(kind=CalibrationKind(kind).value, model=_engine.GAUSSIAN,
                         n=coll.n, alpha=alpha, reps=cal_reps, seed=cal_seed,
                         collection_hash=coll.collection_hash)
    return table.get_or_build(key, coll, workers=workers)


def estimate_power(kind, n, w, mu, alpha, reps, seed, *, coll, table,
                   cal_reps=DEFAULT_CAL_REPS, cal_seed=None, cv=None,
                   workers=1) -> PowerPoint:
    """Monte Carlo power of one calibration against a centered width-w signal."""
    if coll.n != n:
        raise ConfigurationError(f"collection is for n={coll.n}, not n={n}")
    if cv is None:
        cv = _fetch_cv(table, kind, coll, alpha, cal_reps,
                       seed if cal_seed is None else cal_seed, workers)
    rej = int(_rejection_counts([cv], coll, w, mu, reps, seed, workers)[0])
    p = rej / reps
    return PowerPoint(kind=CalibrationKind(kind), n=n, w=w, mu=mu, reps=reps,
                      rejections=rej, power=p,
                      mc_se=math.sqrt(p * (1.0 - p) / reps))


def realized_exponent(kind, n, w, alpha, reps, seed, *, coll, table,
                      cal_reps=DEFAULT_CAL_REPS, cal_seed=None, cv=None,
                      workers=1) -> RealizedExponent:
    """Bisect the amplitude to 50% power and normalize by the boundary.

    With common random numbers the empirical power is a nondecreasing step
    function of mu, so bisection is exact up to the replication granularity.
    The reported standard error propagates the binomial noise of the power
    estimate through the local slope of the power curve.
    """
    if not w < n:
        raise ValueError("realized exponent needs w < n")
    if cv is None:
        cv = _fetch_cv(table, kind, coll, alpha, cal_reps,
                       seed if cal_seed is None else cal_seed, workers)

    evals = {}

    def power_at(mu):
        if mu not in evals:
            evals[mu] = float(_rejection_counts([cv], coll, w, mu, reps, seed,
                                                workers)[0]) / reps
        return evals[mu]

    if power_at(0.0) >= 0.5:
        raise ExperimentError("rejection rate at mu=0 already exceeds 1/2")
    hi = max(boundary_mu(n, w), 1e-3)
    for _ in range(40):
        if power_at(hi) >= 0.5:
            break
        hi *= 2.0
    else:
        raise ExperimentError("could not bracket the 50%-power amplitude")
    lo = 0.0
    tol = 1.0 / math.sqrt(reps)  # 2 * binomial se at p = 1/2
    mu_star = hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        p = power_at(mid)
        if abs(p - 0.5) <= tol or (hi - lo) <= 1e-4 * hi:
            mu_star = mid
            break
        if p < 0.5:
            lo = mid
        else:
            hi = mid
    else:
        mu_star = 0.5 * (lo + hi)

    slope = _local_slope(evals, mu_star)
    se_p = 0.5 / math.sqrt(reps)
    mu_se = se_p / slope + 0.5 * (hi - lo)
    exponent = w * mu_star ** 2 / (2.0 * math.log(n / w))
    exp_se = exponent * 2.0 * mu_se / mu_star if mu_star > 0 else math.inf
    return RealizedExponent(kind=CalibrationKind(kind), n=n, w=w,
                            mu_star=mu_star, exponent=exponent,
                            mu_star_se=mu_se, exponent_se=exp_se)


def _local_slope(evals, mu_star):
    """Secant slope of the power curve across the 50% crossing, taken from
    the tightest pair of evaluations bracketing it."""
    below = [(p, mu) for mu, p in evals.items() if p < 0.5]
    above = [(p, mu) for mu, p in evals.items() if p >= 0.5]
    if below and above:
        p0, m0 = max(below)
        p1, m1 = min(above)
        if m1 > m0:
            return (p1 - p0) / (m1 - m0)
    # degenerate history: fall back to a one-sided probe
    return max(0.5 / max(mu_star, 1e-9), 1e-9)


@dataclass(frozen=True)
class CompareRow:
    """One (kind, w) row of a comparison table."""

    kind: CalibrationKind
    n: int
    w: int
    mu: float
    alpha: float
    reps: int
    rejections: int
    power: float
    mc_se: float
    mu_star: float | None
    exponent: float | None
    exponent_se: float | None
    seed: int
    cal_reps: int
    cal_seed: int
    collection_hash: str

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["kind"] = self.kind.value
        return d


COMPARE_COLUMNS = ["kind", "n", "w", "mu", "alpha", "reps", "rejections",
                   "power", "mc_se", "mu_star", "exponent", "exponent_se",
                   "seed", "cal_reps", "cal_seed", "collection_hash"]


def compare_table(kinds, n, w_list, alpha, reps, seed, *, coll, table,
                  eps=0.5, with_exponent=True, cal_reps=DEFAULT_CAL_REPS,
                  cal_seed=None, workers=1):
    """Power (and realized exponent) of several calibrations on a width grid.

    For each width the signal amplitude is boundary_mu(n, w, eps); all kinds
    are evaluated on the same replicate datasets (shared streams), one row
    per (kind, w) in the order given.
    """
    if coll.n != n:
        raise ConfigurationError(f"collection is for n={coll.n}, not n={n}")
    cal_seed = seed if cal_seed is None else cal_seed
    kinds = [CalibrationKind(k) for k in kinds]
    cvs = {k: _fetch_cv(table, k, coll, alpha, cal_reps, cal_seed, workers)
           for k in kinds}
    rows = []
    for w in w_list:
        mu = boundary_mu(n, w, eps)
        counts = _rejection_counts([cvs[k] for k in kinds], coll, w, mu,
                                   reps, seed, workers)
        for kind, rej in zip(kinds, counts):
            p = float(rej) / reps
            mu_star = exponent = exponent_se = None
            if with_exponent and w < n:
                re = realized_exponent(kind, n, w, alpha, reps, seed,
                                       coll=coll, table=table, cv=cvs[kind],
                                       workers=workers)
                mu_star, exponent, exponent_se = re.mu_star, re.exponent, re.exponent_se
            rows.append(CompareRow(
                kind=kind, n=n, w=w, mu=mu, alpha=alpha, reps=reps,
                rejections=int(rej), power=p,
                mc_se=math.sqrt(p * (1.0 - p) / reps),
                mu_star=mu_star, exponent=exponent, exponent_se=exponent_se,
                seed=seed, cal_reps=cal_reps, cal_seed=cal_seed,
                collection_hash=coll.collection_hash))
    return rows
