"""Calibrations: penalties, Monte Carlo quantiles, blocked tuning,
Bonferroni weights, persistence."""

import json
import math

import numpy as np
import pytest
from scipy.special import ndtri

from multiscan import (
    CalibrationError,
    CalibrationKey,
    CalibrationKind,
    blocked_calibration,
    bonferroni_calibration,
    build_calibration,
    build_collection_1d,
    empirical_level,
    get_or_build,
    mc_penalized_quantile,
    null_max_sample,
    penalty,
)
from multiscan._engine import simulate_max_excess, make_surface
from multiscan._rng import NS_CALIBRATION
from multiscan.calibrate import NullMaxSample, _block_thresholds_at


def test_penalty_examples():
    assert penalty("ds", 100, 100) == 0.0
    assert penalty("ds", 100, 1) == pytest.approx(math.sqrt(2 * math.log(100)), rel=1e-12)
    assert penalty("sac", 100, 1) == pytest.approx(
        math.sqrt(2 * (1 + math.log(100))), rel=1e-12)


def test_penalty_domain_errors():
    with pytest.raises(ValueError):
        penalty("ds", 100, 101)
    with pytest.raises(ValueError):
        penalty("ds", 100, 0)
    with pytest.raises(ValueError):
        penalty("traditional", 100, 10)


def test_penalty_shapes():
    n = 4096
    w = np.arange(1, n + 1)
    ds = penalty("ds", n, w)
    sac = penalty("sac", n, w)
    # DS is non-increasing everywhere; SAC peaks at w = 3 (e < 3 < 4) and is
    # non-increasing from there on
    assert np.all(np.diff(ds) <= 0)
    assert np.all(np.diff(sac[2:]) <= 0)
    # SAC's bracket dominates DS's for every width: e (1 + log w)^2 >= e > 1
    assert np.all(sac >= ds)
    assert np.all(sac[1:] > ds[1:])


def test_null_max_sample_quantile_is_conservative_order_statistic():
    s = NullMaxSample(values=np.arange(1.0, 11.0), kind=CalibrationKind.TRADITIONAL,
                      model="gaussian", n=4, reps=10, seed=0)
    assert s.quantile(0.25) == 8.0  # ceil(10 * 0.75) = 8th order statistic
    assert s.quantile(0.05) == 10.0


def test_traditional_single_normal_anchor():
    coll = build_collection_1d(1)
    q = mc_penalized_quantile("gaussian", coll, "traditional", 1, 0.05,
                              20_000, seed=3)
    assert abs(q - 1.6449) <= 0.05


def test_mc_quantile_deterministic_and_seed_sensitive():
    coll = build_collection_1d(64)
    a = mc_penalized_quantile("gaussian", coll, "ds", 64, 0.1, 500, seed=5)
    b = mc_penalized_quantile("gaussian", coll, "ds", 64, 0.1, 500, seed=5)
    c = mc_penalized_quantile("gaussian", coll, "ds", 64, 0.1, 500, seed=6)
    assert a == b
    assert a != c


def test_mc_quantile_insufficient_replication():
    coll = build_collection_1d(16)
    with pytest.raises(CalibrationError):
        mc_penalized_quantile("gaussian", coll, "traditional", 16, 0.01,
                              500, seed=1)


def test_ds_kappa_below_traditional_q_shared_seed():
    coll = build_collection_1d(256)
    q = mc_penalized_quantile("gaussian", coll, "traditional", 256, 0.05,
                              2000, seed=17)
    kappa = mc_penalized_quantile("gaussian", coll, "ds", 256, 0.05,
                                  2000, seed=17)
    assert kappa < q
    # and q cannot exceed kappa + the largest penalty
    assert q <= kappa + math.sqrt(2 * math.log(256)) + 1e-12


def test_threshold_shape_ds_sac():
    coll = build_collection_1d(128)
    cv_ds = build_calibration("ds", "gaussian", coll, 0.1, reps=400, seed=2)
    cv_sac = build_calibration("sac", "gaussian", coll, 0.1, reps=400, seed=2)
    w = coll.width
    order = np.argsort(w, kind="stable")
    thr_ds = cv_ds.thresholds[order]
    thr_sac = cv_sac.thresholds[order]
    assert np.all(np.diff(thr_ds) <= 1e-12)
    big = w[order] >= 3
    assert np.all(np.diff(thr_sac[big]) <= 1e-12)


def test_workers_do_not_change_results():
    coll = build_collection_1d(128)
    surface = make_surface(coll, "gaussian")
    off = np.zeros(len(coll))
    a = simulate_max_excess(surface, off, 300, seed=9, namespace=NS_CALIBRATION,
                            workers=1)
    b = simulate_max_excess(surface, off, 300, seed=9, namespace=NS_CALIBRATION,
                            workers=3)
    assert np.array_equal(a, b)


# ----------------------------------------------------------------------------
# blocked scan

def test_blocked_single_block_reduces_to_traditional():
    coll = build_collection_1d(1)
    cv = blocked_calibration("gaussian", coll, 1, 0.05, reps=2000, seed=8)
    q = mc_penalized_quantile("gaussian", coll, "traditional", 1, 0.05,
                              2000, seed=8)
    assert cv.thresholds[0] == q
    assert cv.alpha_tilde == 0.05


def test_blocked_thresholds_decrease_in_t():
    rng = np.random.default_rng(0)
    sorted_max = np.sort(rng.standard_normal((500, 3)), axis=0)
    ells = np.array([0, 1, 2])
    active = np.array([True, True, True])
    t_lo = _block_thresholds_at(sorted_max, ells, active, 500, 0.02)
    t_hi = _block_thresholds_at(sorted_max, ells, active, 500, 0.2)
    assert np.all(t_hi <= t_lo)


def test_blocked_joint_level_on_held_out_nulls():
    coll = build_collection_1d(256)
    reps = 4000
    cv = blocked_calibration("gaussian", coll, 256, 0.1, reps=reps, seed=21)
    level = empirical_level(cv, coll, reps=4000, seed=909)
    assert abs(level - 0.1) <= 2.0 / math.sqrt(reps) + 3 * math.sqrt(0.1 * 0.9 / 4000)


def test_blocked_block_thresholds_cover_levels():
    coll = build_collection_1d(64)
    cv = blocked_calibration("gaussian", coll, 64, 0.1, reps=1000, seed=4)
    assert cv.block_thresholds.size == len(coll.levels)
    assert np.all(np.isfinite(cv.block_thresholds))
    per_level = [cv.thresholds[coll.level_of == lv.ell] for lv in coll.levels]
    for thr, block_thr in zip(per_level, cv.block_thresholds):
        assert np.all(thr == block_thr)


# ----------------------------------------------------------------------------
# Bonferroni scan

@pytest.mark.parametrize("n", [8, 256, 4096])
def test_bonferroni_levels_sum_to_alpha(n):
    coll = build_collection_1d(n)
    cv = bonferroni_calibration(coll, n, 0.05)
    assert abs(float(np.sum(cv.per_window_levels)) - 0.05) <= 1e-12


def test_bonferroni_harmonic_example_n8():
    coll = build_collection_1d(8)
    cv = bonferroni_calibration(coll, 8, 0.05)
    # four blocks: H = 1 + 1/2 + 1/3 + 1/4 = 25/12; block 0 gets 0.05 * 12/25
    block0 = cv.per_window_levels[coll.level_of == 0]
    assert float(np.sum(block0)) == pytest.approx(0.024, abs=1e-15)


def test_bonferroni_threshold_monotone_in_window_level():
    coll = build_collection_1d(256)
    cv = bonferroni_calibration(coll, 256, 0.05)
    lvl = cv.per_window_levels
    thr = cv.thresholds
    order = np.argsort(lvl)
    # smaller per-window level => larger threshold (Gaussian quantile)
    assert np.all(np.diff(thr[order]) <= 1e-12)
    assert np.allclose(thr, -ndtri(lvl), rtol=1e-12)


def test_bonferroni_density_skips_width_one_block():
    coll = build_collection_1d(64)
    cv = bonferroni_calibration(coll, 64, 0.1, model="density")
    lvl0 = coll.level_of == 0
    assert np.all(np.isinf(cv.thresholds[lvl0]))
    assert np.all(cv.per_window_levels[lvl0] == 0.0)
    # weight redistributed: levels still sum to alpha over the active blocks
    assert abs(float(np.sum(cv.per_window_levels)) - 0.1) <= 1e-12
    # density thresholds invert the sub-Gaussian bound
    active = ~lvl0
    expect = np.sqrt(-2.0 * np.log(cv.per_window_levels[active]))
    assert np.allclose(cv.thresholds[active], expect, rtol=1e-12)


def test_bonferroni_level_is_conservative():
    coll = build_collection_1d(128)
    cv = bonferroni_calibration(coll, 128, 0.1)
    level = empirical_level(cv, coll, reps=3000, seed=55)
    assert level <= 0.1 + 3 * math.sqrt(0.1 * 0.9 / 3000)


# ----------------------------------------------------------------------------
# density-model calibration

def test_blocked_density_skips_width_one_block():
    coll = build_collection_1d(64)
    cv = blocked_calibration("density", coll, 64, 0.1, reps=1000, seed=19)
    assert np.isinf(cv.block_thresholds[0])  # width-1 block never scans
    assert np.all(np.isfinite(cv.block_thresholds[1:]))
    assert np.all(np.isinf(cv.thresholds[coll.level_of == 0]))
    level = empirical_level(cv, coll, reps=1500, seed=88)
    assert abs(level - 0.1) <= 1.0 / math.sqrt(1000) + 3 * math.sqrt(0.1 * 0.9 / 1500)


def test_blocked_grid2d_calibration():
    from multiscan import build_collection_2d
    rc = build_collection_2d(12, 12)
    cv = blocked_calibration("grid2d", rc, 144, 0.1, reps=800, seed=23)
    assert cv.thresholds.size == len(rc)
    assert np.all(np.isfinite(cv.thresholds))
    level = empirical_level(cv, rc, reps=1000, seed=99)
    assert abs(level - 0.1) <= 1.0 / math.sqrt(800) + 3 * math.sqrt(0.1 * 0.9 / 1000)


def test_density_traditional_level():
    coll = build_collection_1d(128)
    cv = build_calibration("traditional", "density", coll, 0.1, reps=3000, seed=12)
    lvl0 = coll.level_of == 0
    assert np.all(np.isinf(cv.thresholds[lvl0]))
    level = empirical_level(cv, coll, reps=2000, seed=77)
    assert abs(level - 0.1) <= 3 * math.sqrt(0.1 * 0.9 / 2000) + 1.0 / math.sqrt(3000)


# ----------------------------------------------------------------------------
# persistence

def _key(coll, **kw):
    base = dict(kind="ds", model="gaussian", n=coll.n, alpha=0.1, reps=400,
                seed=5, collection_hash=coll.collection_hash)
    base.update(kw)
    return CalibrationKey(**base)


def test_table_roundtrip_bit_identical(table):
    coll = build_collection_1d(64)
    key = _key(coll)
    built = table.get_or_build(key, coll)
    cached = table.get(key)
    assert np.array_equal(built.thresholds, cached.thresholds)
    assert cached.kappa == built.kappa
    again = table.get_or_build(key, coll)
    assert np.array_equal(again.thresholds, built.thresholds)


def test_table_distinct_seeds_distinct_entries(table):
    coll = build_collection_1d(64)
    table.get_or_build(_key(coll, seed=5), coll)
    table.get_or_build(_key(coll, seed=6), coll)
    entries = list(table.root.glob("*.json"))
    assert len(entries) == 2


def test_table_corruption_recomputes(table):
    coll = build_collection_1d(64)
    key = _key(coll)
    built = table.get_or_build(key, coll)
    path = table.path_for(key)
    doc = json.loads(path.read_text())
    doc["kappa"] = 123.0  # tamper without fixing the checksum
    path.write_text(json.dumps(doc))
    from multiscan.errors import ChecksumError
    with pytest.raises(ChecksumError):
        table.get(key)
    with pytest.warns(RuntimeWarning):
        recomputed = get_or_build(table, key, coll)
    assert recomputed.kappa == built.kappa
    assert table.get(key).kappa == built.kappa


def test_table_write_failure_still_returns(table, monkeypatch):
    coll = build_collection_1d(32)
    key = _key(coll, n=32, collection_hash=coll.collection_hash)

    def boom(*args, **kwargs):
        raise OSError("disk is full")

    monkeypatch.setattr("os.replace", boom)
    with pytest.warns(RuntimeWarning):
        cv = table.get_or_build(key, coll)
    assert cv.kappa is not None


def test_table_key_mismatch(table):
    coll = build_collection_1d(64)
    with pytest.raises(ValueError):
        table.get_or_build(_key(coll, collection_hash="deadbeef"), coll)


def test_key_digest_stability():
    a = CalibrationKey("ds", "gaussian", 64, 0.1, 400, 5, "abc")
    b = CalibrationKey("ds", "gaussian", 64, 0.1, 400, 5, "abc")
    c = CalibrationKey("ds", "gaussian", 64, 0.2, 400, 5, "abc")
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_build_calibration_validates():
    coll = build_collection_1d(16)
    with pytest.raises(ValueError):
        build_calibration("blocked", "gaussian", coll, 0.1)  # needs reps/seed
    with pytest.raises(ValueError):
        mc_penalized_quantile("gaussian", coll, "traditional", 16, 1.5, 400, seed=1)
    with pytest.raises(ValueError):
        null_max_sample("gaussian", coll, "blocked", 0.1, 400, seed=1)
