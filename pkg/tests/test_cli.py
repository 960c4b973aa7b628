"""Command-line surface: flags, exit codes, file formats, provenance."""

import json

import numpy as np
import pytest

from multiscan import simulate_null
from multiscan.cli import main
from multiscan.errors import InputFormatError
from multiscan.cli import read_grid, read_points, read_sequence


def run(argv):
    return main(argv)


@pytest.fixture()
def tdir(tmp_path):
    return str(tmp_path / "tables")


def write_sequence(path, values, header=True):
    lines = (["y"] if header else []) + [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + "\n")


def test_calibrate_and_cache_hit(tdir, capsys):
    args = ["calibrate", "--model", "gaussian", "--kind", "ds", "--n", "64",
            "--alpha", "0.05", "--reps", "400", "--seed", "7",
            "--table-dir", tdir, "--workers", "1"]
    assert run(args) == 0
    first = capsys.readouterr().out
    assert "built:" in first and "kappa=" in first
    assert run(args) == 0
    second = capsys.readouterr().out
    assert "cache hit:" in second


def test_missing_seed_is_usage_error(tdir):
    with pytest.raises(SystemExit) as exc:
        run(["calibrate", "--model", "gaussian", "--kind", "ds", "--n", "64",
             "--alpha", "0.05", "--reps", "400", "--table-dir", tdir])
    assert exc.value.code == 2


def test_alpha_out_of_range_is_usage_error(tdir):
    with pytest.raises(SystemExit) as exc:
        run(["calibrate", "--n", "64", "--alpha", "1.5", "--reps", "400",
             "--seed", "7", "--table-dir", tdir])
    assert exc.value.code == 2


def test_scan_exit_codes(tmp_path, tdir):
    n = 1024
    null = simulate_null(n, seed=20260808)
    null_path = tmp_path / "null.csv"
    write_sequence(null_path, null.values)
    out = tmp_path / "report.json"
    base = ["scan", "--model", "gaussian", "--kind", "sac", "--alpha", "0.05",
            "--reps", "1000", "--seed", "7", "--table-dir", tdir,
            "--workers", "1", "--auto-calibrate"]
    code = run(base + ["--input", str(null_path), "--output", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["rejected"] is False
    assert doc["provenance"]["seed"] == 7 and doc["provenance"]["reps"] == 1000

    hot = null.values.copy()
    hot[500:550] += 5.0
    hot_path = tmp_path / "hot.csv"
    write_sequence(hot_path, hot)
    code = run(base + ["--input", str(hot_path), "--output", str(out)])
    assert code == 2
    doc = json.loads(out.read_text())
    assert doc["rejected"] is True and doc["exceedances"]


def test_scan_reports_are_byte_identical(tmp_path, tdir):
    null = simulate_null(256, seed=3)
    path = tmp_path / "y.csv"
    write_sequence(path, null.values)
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert run(["scan", "--input", str(path), "--output", str(out),
                    "--kind", "traditional", "--alpha", "0.05", "--reps", "500",
                    "--seed", "9", "--table-dir", tdir, "--workers", "1",
                    "--auto-calibrate"]) in (0, 2)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_scan_malformed_csv(tmp_path, tdir, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("y\n1.0\nnot-a-number\n2.0\n")
    code = run(["scan", "--input", str(bad), "--seed", "1", "--table-dir", tdir,
                "--auto-calibrate", "--reps", "400"])
    assert code == 1
    err = capsys.readouterr().err
    assert "line 3" in err and "not-a-number" in err


def test_scan_length_mismatch(tmp_path, tdir, capsys):
    path = tmp_path / "y.csv"
    write_sequence(path, np.zeros(32))
    code = run(["scan", "--input", str(path), "--n", "64", "--seed", "1",
                "--table-dir", tdir, "--auto-calibrate", "--reps", "400"])
    assert code == 1
    assert "n=32" in capsys.readouterr().err


def test_scan_requires_existing_calibration_without_auto(tmp_path, tdir, capsys):
    path = tmp_path / "y.csv"
    write_sequence(path, np.zeros(32))
    code = run(["scan", "--input", str(path), "--seed", "1", "--table-dir", tdir,
                "--reps", "400"])
    assert code == 1
    assert "auto-calibrate" in capsys.readouterr().err


def test_scan_density_and_grid2d(tmp_path, tdir):
    pts = tmp_path / "x.csv"
    rng = np.random.default_rng(4)
    pts.write_text("x\n" + "\n".join(repr(float(v)) for v in sorted(rng.random(200))) + "\n")
    assert run(["scan", "--model", "density", "--input", str(pts),
                "--kind", "traditional", "--alpha", "0.05", "--reps", "400",
                "--seed", "2", "--table-dir", tdir, "--workers", "1",
                "--auto-calibrate"]) in (0, 2)

    grid = tmp_path / "g.csv"
    g = rng.standard_normal((8, 8))
    grid.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in g) + "\n")
    assert run(["scan", "--model", "grid2d", "--input", str(grid),
                "--kind", "bonferroni", "--alpha", "0.05", "--reps", "400",
                "--seed", "2", "--table-dir", tdir, "--workers", "1",
                "--auto-calibrate"]) in (0, 2)


def test_compare_outputs_and_determinism(tmp_path, tdir):
    out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    js = tmp_path / "t.json"
    base = ["compare", "--kinds", "traditional,bonferroni", "--n", "256",
            "--w-list", "4,16", "--alpha", "0.1", "--reps", "200", "--seed", "5",
            "--cal-reps", "1000", "--table-dir", tdir, "--workers", "1",
            "--no-exponent"]
    assert run(base + ["--output", str(out1), "--json", str(js)]) == 0
    assert run(base + ["--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header.startswith("kind,n,w,mu,alpha,reps,rejections,power,mc_se")
    doc = json.loads(js.read_text())
    kinds = {row["kind"] for row in doc["rows"]}
    assert kinds == {"traditional", "bonferroni"}
    assert len(doc["rows"]) == 4


def test_compare_rejects_width_above_n(tdir):
    with pytest.raises(SystemExit) as exc:
        run(["compare", "--kinds", "traditional", "--n", "64", "--w-list",
             "4,128", "--alpha", "0.1", "--reps", "200", "--seed", "5",
             "--table-dir", tdir])
    assert exc.value.code == 2


def test_power_command(tmp_path, tdir):
    out = tmp_path / "p.csv"
    assert run(["power", "--kind", "sac", "--n", "256", "--w", "16",
                "--mu", "1.0", "--alpha", "0.1", "--reps", "200", "--seed", "3",
                "--cal-reps", "1000", "--table-dir", tdir, "--workers", "1",
                "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["kind"] == "sac" and row["w"] == "16"
    assert 0.0 <= float(row["power"]) <= 1.0


def test_collection_export(tmp_path):
    out = tmp_path / "coll.csv"
    assert run(["collection", "--model", "gaussian", "--n", "16",
                "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "level,j,k"
    assert lines[1] == "0,1,1"


def test_table_dir_env_var(tmp_path, monkeypatch):
    env_dir = tmp_path / "from-env"
    monkeypatch.setenv("MULTISCAN_TABLE_DIR", str(env_dir))
    assert run(["calibrate", "--kind", "bonferroni", "--n", "32",
                "--alpha", "0.1", "--reps", "400", "--seed", "1"]) == 0
    assert list(env_dir.glob("*.json"))


def test_worker_count_invariance_through_cli(tmp_path):
    dirs = [tmp_path / "w1", tmp_path / "w2"]
    for d, w in zip(dirs, ("1", "3")):
        assert run(["calibrate", "--kind", "blocked", "--n", "128",
                    "--alpha", "0.1", "--reps", "500", "--seed", "13",
                    "--table-dir", str(d), "--workers", w]) == 0
    files = [sorted(d.glob("*.json"))[0].read_bytes() for d in dirs]
    assert files[0] == files[1]


def test_sequence_roundtrip_through_files(tmp_path):
    from multiscan.cli import write_points, write_sequence
    from multiscan import simulate_uniform

    seq = simulate_null(40, seed=14)
    p = tmp_path / "seq.csv"
    write_sequence(p, seq)
    assert np.array_equal(read_sequence(p).values, seq.values)
    sample = simulate_uniform(40, seed=14)
    q = tmp_path / "pts.csv"
    write_points(q, sample)
    assert np.array_equal(read_points(q).points, sample.points)


def test_readers_validate(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(InputFormatError):
        read_grid(ragged)
    empty = tmp_path / "empty.csv"
    empty.write_text("y\n")
    with pytest.raises(InputFormatError):
        read_sequence(empty)
    pts = tmp_path / "x.csv"
    pts.write_text("x\n0.9\n0.1\n0.5\n")
    sample = read_points(pts)
    assert sample.points.tolist() == [0.1, 0.5, 0.9]
