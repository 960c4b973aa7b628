"""Sparse collection construction: spacing, coverage, cardinality."""

import math

import numpy as np
import pytest

from multiscan import (
    Window,
    approximating_member,
    build_collection_1d,
    build_collection_2d,
    grid_spacing,
    grid_spacing_2d,
)


def test_grid_spacing_examples():
    for n in (1, 7, 1024, 10_000):
        assert grid_spacing(n, 0) == 1
    assert grid_spacing(1024, 5) == 11
    assert grid_spacing(1024, 10) == 725
    with pytest.raises(ValueError):
        grid_spacing(1024, 11)
    with pytest.raises(ValueError):
        grid_spacing(8, -1)


def test_grid_spacing_matches_formula():
    for n, ell in [(64, 3), (4096, 7), (10_000, 11)]:
        w = 2 ** ell
        expect = math.ceil(w / math.sqrt(2 * math.log(math.e * n / w)))
        assert grid_spacing(n, ell) == expect


def test_build_n4_hand_enumeration():
    coll = build_collection_1d(4)
    got = [(w.j, w.k) for w in coll]
    assert got == [(1, 1), (2, 2), (3, 3), (4, 4), (1, 2), (3, 4), (1, 4)]
    assert [(lv.ell, lv.spacing) for lv in coll.levels] == [(0, 1), (1, 2), (2, 3)]
    assert len(coll) == 7


def test_build_degenerate_sizes():
    assert [(w.j, w.k) for w in build_collection_1d(1)] == [(1, 1)]
    with pytest.raises(ValueError):
        build_collection_1d(0)


def test_build_deterministic():
    a = build_collection_1d(300)
    b = build_collection_1d(300)
    assert np.array_equal(a.j0, b.j0) and np.array_equal(a.k, b.k)
    assert a.collection_hash == b.collection_hash
    assert a.collection_hash != build_collection_1d(301).collection_hash


@pytest.mark.parametrize("n", [2, 3, 17, 64, 100, 257])
def test_collection_structure(n):
    coll = build_collection_1d(n)
    # no duplicates
    assert len({(a, b) for a, b in zip(coll.j0, coll.k)}) == len(coll)
    # widths inside their level band, endpoints on the grid or at n
    for lv in coll.levels:
        j0 = coll.j0[lv.start:lv.stop]
        k = coll.k[lv.start:lv.stop]
        w = k - j0
        assert np.all((w >= lv.width_lo) & (w <= lv.width_hi))
        for arr in (j0, k):
            assert np.all((arr % lv.spacing == 0) | (arr == n))
    # all width-1 windows are present (level-0 grid is complete)
    lvl0 = coll.levels[0]
    assert lvl0.count == n
    # the full window (1, n) exists at the top level
    assert (0, n) in {(a, b) for a, b in zip(coll.j0, coll.k)}


def test_cardinality_near_linear():
    # Doubling ratios sit near 2, except where a level's ceiled grid spacing
    # drops (e.g. d_2: 2 -> 1 between 2^12 and 2^13), which bumps that one
    # ratio to ~3.03.  Frozen from an exhaustive count: sizes stay <= 11 n
    # and no doubling exceeds 3.1.
    sizes = {n: len(build_collection_1d(n)) for n in
             [2 ** e for e in range(10, 15)]}
    for n, size in sizes.items():
        assert size <= 11 * n
    for n in list(sizes)[:-1]:
        assert sizes[2 * n] / sizes[n] <= 3.1


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 21, 40, 127, 128, 129, 255,
                               256, 257, 333, 512])
def test_coverage_exhaustive(n):
    coll = build_collection_1d(n)
    members = {(a, b) for a, b in zip(coll.j0, coll.k)}
    for j in range(1, n + 1):
        for k in range(j, n + 1):
            win = Window(j, k)
            ell = win.width.bit_length() - 1
            d = coll.levels[ell].spacing
            m = approximating_member(coll, win)
            assert (m.j - 1, m.k) in members
            assert m.width.bit_length() - 1 == ell
            assert abs((m.j - 1) - (j - 1)) <= d and abs(m.k - k) <= d
            symdiff = abs((m.j - 1) - (j - 1)) + abs(m.k - k)
            assert symdiff <= 2 * d


def test_approximating_member_examples():
    coll = build_collection_1d(4)
    assert approximating_member(coll, Window(1, 2)) == Window(1, 2)  # fixed point
    m = approximating_member(coll, Window(2, 3))
    assert m in (Window(1, 2), Window(3, 4))
    for i in range(1, 5):
        assert approximating_member(coll, Window(i, i)) == Window(i, i)


def test_export_csv(tmp_path):
    coll = build_collection_1d(8)
    path = tmp_path / "coll.csv"
    coll.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "level,j,k"
    assert len(lines) == len(coll) + 1


# ----------------------------------------------------------------------------
# 2D rectangles

def test_2d_hand_case_4x4():
    rc = build_collection_2d(4, 4, 2.0)
    lvl1_sq = [(r.j1, r.k1, r.j2, r.k2)
               for r, lv, ke in zip(rc, rc.level_of, rc.kexp_of)
               if lv == 1 and ke == 0]
    expect = [(x, x + 1, y, y + 1) for x in (1, 2, 3) for y in (1, 2, 3)]
    assert lvl1_sq == expect


def test_2d_rects_fit_grid_and_dedup():
    rc = build_collection_2d(13, 7, 2.0)
    assert np.all(rc.j0a >= 0) and np.all(rc.ka <= 13)
    assert np.all(rc.j0b >= 0) and np.all(rc.kb <= 7)
    assert np.all(rc.ka > rc.j0a) and np.all(rc.kb > rc.j0b)
    quads = {t for t in zip(rc.j0a, rc.ka, rc.j0b, rc.kb)}
    assert len(quads) == len(rc)


def test_2d_oversized_aspect_contributes_nothing():
    rc = build_collection_2d(8, 8, 2.0)
    assert int(rc.cells.max()) <= 64
    sides_a = rc.ka - rc.j0a
    sides_b = rc.kb - rc.j0b
    assert sides_a.max() <= 8 and sides_b.max() <= 8


def test_2d_deterministic():
    a = build_collection_2d(9, 9, 2.0)
    b = build_collection_2d(9, 9, 2.0)
    assert a.collection_hash == b.collection_hash
    assert a.collection_hash != build_collection_2d(9, 9, 1.5).collection_hash


def test_2d_validation():
    with pytest.raises(ValueError):
        build_collection_2d(0, 4)
    with pytest.raises(ValueError):
        build_collection_2d(4, 4, m=1.0)
    with pytest.raises(ValueError):
        grid_spacing_2d(16, 3)


def test_2d_cardinality_near_linear():
    # |R| / (N log2(N)^2) stays bounded on square grids
    ratios = []
    for side in (16, 32, 64, 128, 256):
        rc = build_collection_2d(side, side, 2.0)
        ncells = side * side
        ratios.append(len(rc) / (ncells * math.log2(ncells) ** 2))
    assert max(ratios) <= 1.0


def test_2d_csv_export(tmp_path):
    rc = build_collection_2d(4, 4)
    path = tmp_path / "rects.csv"
    rc.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "level,j,k,j2,k2"
    assert len(lines) == len(rc) + 1
