"""Gaussian sequence model.

Observations Y_i = mu * 1(j <= i <= k) + Z_i with i.i.d. standard normal
noise; the task is to decide whether an elevated mean is present somewhere.
This module holds the data containers, prefix sums, the standardized window
sum (the scan's per-window statistic), null simulation and signal injection.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _rng, kernels


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Window:
    """Candidate interval [j, k], 1-based inclusive endpoints."""

    j: int
    k: int

    def __post_init__(self):
        if not (1 <= self.j <= self.k):
            raise ValueError(f"invalid window ({self.j}, {self.k}): need 1 <= j <= k")

    @property
    def width(self) -> int:
        return self.k - self.j + 1


@dataclass(frozen=True)
class Sequence:
    """Observed sequence Y_1..Y_n."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.atleast_1d(self.values)))
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("sequence needs at least one value")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sequence values must be finite")

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SignalSpec:
    """One-sided signal: amplitude mu >= 0 on a window."""

    mu: float
    window: Window

    def __post_init__(self):
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            raise ValueError("signal amplitude must be finite and >= 0")


@dataclass(frozen=True)
class PrefixSums:
    """sums[i] = Y_1 + ... + Y_i, with sums[0] = 0."""

    sums: np.ndarray

    @property
    def n(self) -> int:
        return self.sums.size - 1


def prefix_sums(seq: Sequence) -> PrefixSums:
    """Prefix sums of a sequence (extended-precision accumulation)."""
    return PrefixSums(sums=_frozen(kernels.prefix_sums(seq.values)))


def window_stat(ps: PrefixSums, win: Window) -> float:
    """Standardized sum over [j, k]: (sum of Y_j..Y_k) / sqrt(width)."""
    if win.k > ps.n:
        raise ValueError(f"window ({win.j}, {win.k}) exceeds sequence length {ps.n}")
    return float((ps.sums[win.k] - ps.sums[win.j - 1]) * (1.0 / math.sqrt(win.width)))


def simulate_null(n: int, seed: int, stream: int = 0) -> Sequence:
    """n i.i.d. N(0,1) draws; identical output for identical (n, seed, stream)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng.stream_generator(seed, _rng.NS_USER, stream)
    return Sequence(values=rng.standard_normal(n))


def inject_signal(seq: Sequence, sig: SignalSpec) -> Sequence:
    """Add sig.mu to values on sig.window, leaving the rest unchanged."""
    win = sig.window
    if win.k > seq.n:
        raise ValueError(f"signal window ({win.j}, {win.k}) exceeds sequence length {seq.n}")
    values = seq.values.copy()
    values[win.j - 1:win.k] += sig.mu
    return Sequence(values=values)
