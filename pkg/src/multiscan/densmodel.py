"""Density / intensity model.

n i.i.d. observations are tested for being uniform on [0,1] against a
density elevated by a factor r on an unknown interval I.  Scanning is with
respect to the empirical measure: windows are index pairs (j, k) of order
statistics, and the window statistic is sqrt(2 logLR) on [Y_(j), Y_(k)].
Conditioning reduces the elevated-intensity Poisson problem to this model,
so no separate point-process interface is provided.
"""

from dataclasses import dataclass

import numpy as np

from . import _rng, kernels
from .errors import DegenerateWindowError


@dataclass(frozen=True)
class PointSample:
    """Sorted sample of n >= 2 points in [0,1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("point sample needs at least two values")
        if np.any(pts < 0.0) or np.any(pts > 1.0) or not np.all(np.isfinite(pts)):
            raise ValueError("points must lie in [0, 1]")
        if np.any(np.diff(pts) < 0.0):
            raise ValueError("points must be sorted ascending")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class OrderWindow:
    """Pair of order-statistic indices, 1 <= j < k <= n."""

    j: int
    k: int

    def __post_init__(self):
        if not (1 <= self.j < self.k):
            raise ValueError(f"invalid order window ({self.j}, {self.k}): need 1 <= j < k")


@dataclass(frozen=True)
class DensityAlternative:
    """Uniform density elevated by the factor r on a sub-interval of [0,1]."""

    r: float
    interval: tuple

    def __post_init__(self):
        a, b = self.interval
        if not self.r >= 1.0:
            raise ValueError("elevation ratio r must be >= 1")
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"interval {self.interval} must be a positive-length sub-interval of [0,1]")


def density_stat(sample: PointSample, win: OrderWindow) -> float:
    """sqrt(2 logLR) for the window [Y_(j), Y_(k)].

    With m = k - j + 1 points in the closed window (endpoints included) and
    base probability p = Y_(k) - Y_(j),

        logLR = m log(m / (n p)) + (n - m) log((n - m) / (n (1 - p)))

    when the observed fraction m/n exceeds p, and 0 otherwise (one-sided
    alternative r > 1).  The second term is 0 when m = n.  The statistic
    depends on the sample only through (n, m, p).
    """
    n = sample.n
    if win.k > n:
        raise ValueError(f"order window ({win.j}, {win.k}) exceeds sample size {n}")
    p = float(sample.points[win.k - 1] - sample.points[win.j - 1])
    if p <= 0.0:
        raise DegenerateWindowError(
            f"window ({win.j}, {win.k}) has zero empirical width (tied endpoints)")
    j = np.asarray([win.j], dtype=np.int64)
    k = np.asarray([win.k], dtype=np.int64)
    return float(kernels.density_stats(sample.points, j, k)[0])


def simulate_uniform(n: int, seed: int, stream: int = 0) -> PointSample:
    """n i.i.d. Uniform[0,1] draws, sorted; deterministic per (n, seed, stream)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = _rng.stream_generator(seed, _rng.NS_USER, stream)
    return PointSample(points=np.sort(rng.random(n)))


def quantile_function(alt: DensityAlternative, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the elevated density (piecewise linear)."""
    a, b = alt.interval
    length = b - a
    if alt.r == 1.0:
        # the inverse CDF is the identity; keep the draws bit-exact
        return np.asarray(u, dtype=np.float64)
    c = 1.0 / (alt.r * length + (1.0 - length))  # density value outside I
    u1 = c * a
    u2 = c * a + c * alt.r * length
    u = np.asarray(u, dtype=np.float64)
    return np.where(u < u1, u / c,
                    np.where(u <= u2, a + (u - u1) / (c * alt.r), b + (u - u2) / c))


def simulate_alternative(n: int, alt: DensityAlternative, seed: int, stream: int = 0) -> PointSample:
    """n i.i.d. draws from the elevated density, sorted.

    Sampling is by the explicit inverse CDF (no rejection step), so output is
    deterministic per (n, alt, seed, stream) and reduces bit-exactly to
    simulate_uniform when r = 1.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = _rng.stream_generator(seed, _rng.NS_USER, stream)
    x = quantile_function(alt, rng.random(n))
    return PointSample(points=np.sort(np.clip(x, 0.0, 1.0)))


def elevated_mass(alt: DensityAlternative) -> float:
    """Probability that a draw from the alternative lands in the interval."""
    a, b = alt.interval
    length = b - a
    return alt.r * length / (alt.r * length + (1.0 - length))
