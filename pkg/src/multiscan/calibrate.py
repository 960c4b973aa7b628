"""Critical values for the scan statistic.

Five calibrations are provided.  The traditional scan refers every window to
one global critical value.  The Dümbgen-Spokoiny (DS) and
Sharpnack-Arias-Castro (SAC) calibrations subtract a width-dependent penalty
before taking the maximum, which trades power from the smallest windows to
moderate and large ones; their single simulated quantile kappa_n(alpha)
turns into per-width thresholds penalty(w) + kappa.  The blocked scan skips
penalties altogether: windows are grouped into blocks of comparable length
(the dyadic levels of the sparse collection), block significance levels
follow a harmonic sequence t/(ell+1), and the single scalar t = alpha~ is
tuned on the simulated block maxima so the joint null rejection rate equals
alpha.  The Bonferroni scan needs no simulation at all: the harmonic block
weights are split evenly across the windows of each block and inverted
through the (sub-)Gaussian null tail.

All simulated quantiles are conservative empirical quantiles (the
ceil(reps*(1-a))-th order statistic), so levels are guaranteed at finite
replication.
"""

import hashlib
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import _engine, _rng
from .errors import CalibrationError, ChecksumError

SCHEMA_VERSION = 1


class CalibrationKind(str, Enum):
    TRADITIONAL = "traditional"
    DS = "ds"
    SAC = "sac"
    BLOCKED = "blocked"
    BONFERRONI = "bonferroni"


_PENALIZED = (CalibrationKind.DS, CalibrationKind.SAC)
_SIMULATED = (CalibrationKind.TRADITIONAL, CalibrationKind.DS, CalibrationKind.SAC)


def penalty(kind, n: int, w):
    """Width penalty subtracted from the scan statistic before maximizing.

    DS:  sqrt(2 log(n/w))
    SAC: sqrt(2 log[(e n / w) (1 + log w)^2])

    ``w`` may be a scalar or an array of window sizes (cell counts in 2D).
    """
    kind = CalibrationKind(kind)
    if kind not in _PENALIZED:
        raise ValueError(f"no penalty is defined for kind {kind.value!r}")
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 1) or np.any(w > n):
        raise ValueError(f"window size out of range [1, {n}]")
    if kind is CalibrationKind.DS:
        bracket = np.log(n / w)
    else:
        bracket = 1.0 + np.log(n / w) + 2.0 * np.log1p(np.log(w))
    out = np.sqrt(2.0 * bracket)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NullMaxSample:
    """Simulated null distribution of the (penalized) max statistic."""

    values: np.ndarray
    kind: CalibrationKind
    model: str
    n: int
    reps: int
    seed: int

    def quantile(self, alpha: float) -> float:
        """Conservative empirical (1-alpha)-quantile."""
        order = int(math.ceil(self.reps * (1.0 - alpha)))
        order = min(max(order, 1), self.reps)
        return float(np.sort(self.values)[order - 1])


@dataclass(frozen=True)
class CriticalValueVector:
    """Per-window thresholds over a collection, realizing a level-alpha test.

    ``thresholds`` is aligned to the collection's window order; windows the
    model never scans (density windows with fewer than two points) carry
    +inf.  ``kappa`` is set for the simulated single-quantile kinds,
    ``alpha_tilde`` and ``block_thresholds`` for the blocked scan, and
    ``per_window_levels`` for the Bonferroni scan.
    """

    kind: CalibrationKind
    model: str
    n: int
    alpha: float
    thresholds: np.ndarray
    collection_hash: str
    kappa: float | None = None
    alpha_tilde: float | None = None
    block_thresholds: np.ndarray | None = None
    per_window_levels: np.ndarray | None = None
    reps: int | None = None
    seed: int | None = None


def _check_mc_args(alpha, reps):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    needed = math.ceil(10.0 / alpha)
    if reps < needed:
        raise CalibrationError(
            f"reps={reps} too small for alpha={alpha}: need at least {needed}")


def null_max_sample(model, coll, kind, alpha, reps, seed, workers=1) -> NullMaxSample:
    """Simulate the null (penalized) max statistic over the collection."""
    kind = CalibrationKind(kind)
    if kind not in _SIMULATED:
        raise ValueError(f"kind {kind.value!r} has no penalized-max form")
    _check_mc_args(alpha, reps)
    surface = _engine.make_surface(coll, model)
    if kind is CalibrationKind.TRADITIONAL:
        offsets = np.zeros(surface.sizes.size)
    else:
        offsets = penalty(kind, surface.n, surface.sizes)
    maxima = _engine.simulate_max_excess(surface, offsets, reps, seed,
                                         _rng.NS_CALIBRATION, workers)
    return NullMaxSample(values=maxima, kind=kind, model=model,
                         n=surface.n, reps=reps, seed=seed)


def mc_penalized_quantile(model, coll, kind, n, alpha, reps, seed, workers=1) -> float:
    """kappa_n(alpha): the (1-alpha)-quantile of the penalized max (or of the
    plain max for the traditional kind, giving q_n(alpha))."""
    sample = null_max_sample(model, coll, kind, alpha, reps, seed, workers)
    if sample.n != n:
        raise ValueError(f"collection is for n={sample.n}, not n={n}")
    return sample.quantile(alpha)


def _simulated_vector(model, coll, kind, alpha, reps, seed, workers=1):
    kind = CalibrationKind(kind)
    sample = null_max_sample(model, coll, kind, alpha, reps, seed, workers)
    kappa = sample.quantile(alpha)
    surface = _engine.make_surface(coll, model)
    if kind is CalibrationKind.TRADITIONAL:
        active = np.full(surface.sizes.size, kappa)
    else:
        active = penalty(kind, surface.n, surface.sizes) + kappa
    return CriticalValueVector(
        kind=kind, model=model, n=surface.n, alpha=alpha,
        thresholds=_engine.expand_active(surface, active, np.inf),
        collection_hash=coll.collection_hash, kappa=kappa, reps=reps, seed=seed)


def blocked_calibration(model, coll, n, alpha, reps, seed, workers=1) -> CriticalValueVector:
    """Blocked scan: harmonic block levels tuned through one scalar.

    Block ell targets the significance level a_ell(t) = t / (ell + 1); its
    threshold is the conservative (1 - a_ell(t))-quantile of the simulated
    block maxima.  The scalar t is found by bisection on the same simulation
    so that the empirical joint null rejection probability matches alpha
    (within 1/sqrt(reps); in practice the closest achievable step).
    """
    _check_mc_args(alpha, reps)
    surface = _engine.make_surface(coll, model)
    if surface.n != n:
        raise ValueError(f"collection is for n={surface.n}, not n={n}")
    maxima = _engine.simulate_block_max(surface, reps, seed,
                                        _rng.NS_CALIBRATION, workers)
    sorted_max = np.sort(maxima, axis=0)
    active = sorted_max[-1] > -np.inf
    ells = surface.ells
    nblocks = int(np.count_nonzero(active))
    if nblocks == 0:
        raise CalibrationError("collection has no scannable windows")

    def thresholds_at(t):
        return _block_thresholds_at(sorted_max, ells, active, reps, t)

    def joint(t):
        return float(np.mean((maxima > thresholds_at(t)).any(axis=1)))

    if nblocks == 1:
        best_t, best_joint = alpha, joint(alpha)
    else:
        lo, hi = alpha / nblocks, alpha * nblocks
        jlo, jhi = joint(lo), joint(hi)
        if jlo > alpha or jhi < alpha:
            raise CalibrationError(
                f"blocked tuning failed to bracket alpha={alpha}: "
                f"joint({lo:.3g})={jlo:.4f}, joint({hi:.3g})={jhi:.4f}; increase reps")
        cand = [(abs(jlo - alpha), lo, jlo), (abs(jhi - alpha), hi, jhi)]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            jm = joint(mid)
            cand.append((abs(jm - alpha), mid, jm))
            if jm < alpha:
                lo = mid
            elif jm > alpha:
                hi = mid
            else:
                break
        _, best_t, best_joint = min(cand)
    if abs(best_joint - alpha) > 1.0 / math.sqrt(reps):
        raise CalibrationError(
            f"blocked tuning stalled at joint={best_joint:.4f} for alpha={alpha}; "
            "increase reps")

    block_thr = thresholds_at(best_t)
    active_thr = block_thr[np.searchsorted(ells, _level_of_active(surface))]
    return CriticalValueVector(
        kind=CalibrationKind.BLOCKED, model=model, n=surface.n, alpha=alpha,
        thresholds=_engine.expand_active(surface, active_thr, np.inf),
        collection_hash=coll.collection_hash, alpha_tilde=float(best_t),
        block_thresholds=block_thr, reps=reps, seed=seed)


def _block_thresholds_at(sorted_max, ells, active, reps, t):
    """Per-block thresholds at tuning parameter t: the conservative
    (1 - t/(ell+1))-quantile of each active block's simulated maxima."""
    thr = np.full(ells.size, np.inf)
    a = t / (ells[active] + 1.0)
    idx = np.clip(np.ceil(reps * (1.0 - a)).astype(np.int64), 1, reps)
    thr[active] = sorted_max[idx - 1, np.flatnonzero(active)]
    return thr


def _level_of_active(surface):
    counts = np.diff(surface.bounds)
    return np.repeat(surface.ells, counts)


def bonferroni_calibration(coll, n, alpha, model=_engine.GAUSSIAN,
                           workers=1) -> CriticalValueVector:
    """Bonferroni scan: explicit per-window levels, no simulation.

    Block ell receives the level alpha * (1/(ell+1)) / H with H summing
    1/(ell+1) over the nonempty blocks (empty blocks are skipped, which
    redistributes their weight proportionally).  The block level is split
    evenly across its windows and inverted through the standard normal upper
    tail; the density model inverts the sub-Gaussian bound exp(-t^2/2)
    instead, which is conservative.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    surface = _engine.make_surface(coll, model)
    if surface.n != n:
        raise ValueError(f"collection is for n={surface.n}, not n={n}")
    counts = np.diff(surface.bounds)
    ells = surface.ells
    nonempty = counts > 0
    weight = np.where(nonempty, 1.0 / (ells + 1.0), 0.0)
    h = weight.sum()
    block_level = alpha * weight / h
    with np.errstate(divide="ignore", invalid="ignore"):
        window_level = np.where(nonempty, block_level / counts, 0.0)
        if model == _engine.DENSITY:
            tail = np.where(nonempty, np.sqrt(-2.0 * np.log(window_level)), np.inf)
        else:
            tail = np.where(nonempty, -ndtri(window_level), np.inf)
    active_thr = np.repeat(tail, counts)
    active_lvl = np.repeat(window_level, counts)
    return CriticalValueVector(
        kind=CalibrationKind.BONFERRONI, model=model, n=surface.n, alpha=alpha,
        thresholds=_engine.expand_active(surface, active_thr, np.inf),
        collection_hash=coll.collection_hash,
        block_thresholds=np.where(nonempty, tail, np.inf),
        per_window_levels=_engine.expand_active(surface, active_lvl, 0.0))


def build_calibration(kind, model, coll, alpha, reps=None, seed=None,
                      workers=1) -> CriticalValueVector:
    """Build the critical-value vector for any calibration kind."""
    kind = CalibrationKind(kind)
    surface_n = _engine.make_surface(coll, model).n
    if kind is CalibrationKind.BONFERRONI:
        return bonferroni_calibration(coll, surface_n, alpha, model, workers)
    if reps is None or seed is None:
        raise ValueError(f"kind {kind.value!r} is simulated: reps and seed are required")
    if kind is CalibrationKind.BLOCKED:
        return blocked_calibration(model, coll, surface_n, alpha, reps, seed, workers)
    return _simulated_vector(model, coll, kind, alpha, reps, seed, workers)


def empirical_level(cv: CriticalValueVector, coll, reps, seed, workers=1) -> float:
    """Fraction of fresh null datasets with any window over its threshold."""
    surface = _engine.make_surface(coll, cv.model)
    offsets = cv.thresholds[surface.active_idx]
    excess = _engine.simulate_max_excess(surface, offsets, reps, seed,
                                         _rng.NS_EVALUATION, workers)
    return float(np.mean(excess > 0.0))


# ---------------------------------------------------------------------------
# persistence

@dataclass(frozen=True)
class CalibrationKey:
    kind: str
    model: str
    n: int
    alpha: float
    reps: int
    seed: int
    collection_hash: str

    def digest(self) -> str:
        payload = json.dumps(
            {"kind": CalibrationKind(self.kind).value, "model": self.model,
             "n": self.n, "alpha": repr(float(self.alpha)), "reps": self.reps,
             "seed": self.seed, "collection_hash": self.collection_hash},
            sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def _arr(values):
    return None if values is None else [float(v) for v in values]


def _cv_payload(key: CalibrationKey, cv: CriticalValueVector) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "key": {"kind": CalibrationKind(key.kind).value, "model": key.model,
                "n": key.n, "alpha": key.alpha, "reps": key.reps,
                "seed": key.seed, "collection_hash": key.collection_hash},
        "kind": cv.kind.value,
        "model": cv.model,
        "n": cv.n,
        "alpha": cv.alpha,
        "kappa": cv.kappa,
        "alpha_tilde": cv.alpha_tilde,
        "thresholds": _arr(cv.thresholds),
        "block_thresholds": _arr(cv.block_thresholds),
        "per_window_levels": _arr(cv.per_window_levels),
        "reps": cv.reps,
        "seed": cv.seed,
    }


def _cv_from_payload(doc: dict) -> CriticalValueVector:
    def arr(name):
        v = doc.get(name)
        return None if v is None else np.asarray(v, dtype=np.float64)

    return CriticalValueVector(
        kind=CalibrationKind(doc["kind"]), model=doc["model"], n=doc["n"],
        alpha=doc["alpha"], thresholds=arr("thresholds"),
        collection_hash=doc["key"]["collection_hash"], kappa=doc["kappa"],
        alpha_tilde=doc["alpha_tilde"], block_thresholds=arr("block_thresholds"),
        per_window_levels=arr("per_window_levels"),
        reps=doc["reps"], seed=doc["seed"])


def _checksum(payload: dict) -> str:
    body = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(body.encode()).hexdigest()


class CalibrationTable:
    """Directory of persisted calibrations, one JSON file per key digest.

    Entries round-trip bit-exactly (floats are serialized via repr) and
    carry a checksum; a corrupted entry raises ChecksumError on read, and
    get_or_build recomputes it.  Reads are safe concurrently; writes are
    atomic (write-to-temp, rename).
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: CalibrationKey) -> Path:
        return self.root / f"{key.digest()}.json"

    def get(self, key: CalibrationKey):
        path = self.path_for(key)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise ChecksumError(f"unreadable calibration entry {path}: {exc}")
        stored = doc.pop("checksum", None)
        if stored != _checksum(doc):
            raise ChecksumError(f"checksum mismatch in calibration entry {path}")
        return _cv_from_payload(doc)

    def put(self, key: CalibrationKey, cv: CriticalValueVector) -> None:
        payload = _cv_payload(key, cv)
        payload["checksum"] = _checksum(payload)
        body = json.dumps(payload, sort_keys=True, indent=1)
        try:
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            with os.fdopen(fd, "w") as fh:
                fh.write(body)
            os.replace(tmp, self.path_for(key))
        except OSError as exc:
            warnings.warn(f"could not persist calibration entry: {exc}",
                          RuntimeWarning, stacklevel=2)

    def get_or_build(self, key: CalibrationKey, coll, workers=1) -> CriticalValueVector:
        """Cached vector for the key, building and persisting on a miss."""
        if key.collection_hash != coll.collection_hash:
            raise ValueError("key does not match the provided collection")
        try:
            cached = self.get(key)
        except ChecksumError as exc:
            warnings.warn(f"{exc}; recomputing", RuntimeWarning, stacklevel=2)
            cached = None
        if cached is not None:
            return cached
        cv = build_calibration(key.kind, key.model, coll, key.alpha,
                               reps=key.reps, seed=key.seed, workers=workers)
        self.put(key, cv)
        return cv


def get_or_build(table: CalibrationTable, key: CalibrationKey, coll,
                 workers=1) -> CriticalValueVector:
    return table.get_or_build(key, coll, workers=workers)
