"""Command-line interface.

Subcommands: ``calibrate`` (build/persist critical values), ``scan`` (apply a
calibration to a dataset; exit status 0 = no rejection, 2 = rejection,
1 = error), ``power`` and ``compare`` (experiment tables), ``collection``
(audit export of the sparse window collection).

Seeds are mandatory wherever simulation may happen; nothing is ever seeded
from the clock, and identical invocations produce byte-identical outputs.
The calibration table directory resolves as --table-dir, then the
MULTISCAN_TABLE_DIR environment variable, then ./multiscan-tables.
"""

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _engine, powerlab, scanner, sparsegrid
from .calibrate import CalibrationKey, CalibrationKind, CalibrationTable
from .densmodel import PointSample
from .errors import InputFormatError, MultiscanError
from .seqmodel import Sequence

KINDS = [k.value for k in CalibrationKind]
MODELS = list(_engine.MODELS)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2


@dataclass
class RunConfig:
    """Validated flag bundle for one command invocation."""

    command: str
    model: str = _engine.GAUSSIAN
    kind: str = CalibrationKind.TRADITIONAL.value
    n: int | None = None
    n1: int | None = None
    n2: int | None = None
    aspect_base: float = 2.0
    alpha: float = 0.05
    reps: int = 10_000
    seed: int | None = None
    workers: int = 0
    table_dir: str | None = None
    input: str | None = None
    output: str | None = None
    json_output: str | None = None
    auto_calibrate: bool = False
    w: int | None = None
    w_list: list | None = None
    mu: float | None = None
    eps: float = 0.5
    kinds: list | None = None
    cal_reps: int | None = None
    cal_seed: int | None = None
    with_exponent: bool = True


def table_dir(cfg: RunConfig) -> Path:
    if cfg.table_dir:
        return Path(cfg.table_dir)
    env = os.environ.get("MULTISCAN_TABLE_DIR")
    return Path(env) if env else Path("multiscan-tables")


def workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# file input / output

def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_column(path, header: str) -> np.ndarray:
    values = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    start = 0
    if lines and lines[0].strip().lower() == header:
        start = 1
    for i, line in enumerate(lines[start:], start=start + 1):
        text = line.strip().rstrip(",")
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            raise InputFormatError(f"{path}: line {i}: cannot parse {text!r} as a number")
    if not values:
        raise InputFormatError(f"{path}: no data values found")
    return np.asarray(values, dtype=np.float64)


def read_sequence(path) -> Sequence:
    """Single-column CSV (header 'y') or newline-separated decimals."""
    return Sequence(values=_read_column(path, "y"))


def read_points(path) -> PointSample:
    """Single-column CSV (header 'x'), values in [0, 1]."""
    return PointSample(points=np.sort(_read_column(path, "x")))


def write_sequence(path, seq: Sequence) -> None:
    """Single-column CSV with header 'y'."""
    _atomic_write(path, "y\n" + "\n".join(repr(float(v)) for v in seq.values) + "\n")


def write_points(path, sample: PointSample) -> None:
    """Single-column CSV with header 'x'."""
    _atomic_write(path, "x\n" + "\n".join(repr(float(v)) for v in sample.points) + "\n")


def read_grid(path) -> scanner.GridData:
    """CSV matrix, one grid row per line."""
    rows = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append([float(v) for v in line.strip().split(",")])
            except ValueError:
                raise InputFormatError(f"{path}: line {i}: cannot parse {line.strip()!r}")
            if len(rows[-1]) != len(rows[0]):
                raise InputFormatError(f"{path}: line {i}: ragged row "
                                       f"({len(rows[-1])} values, expected {len(rows[0])})")
    if not rows:
        raise InputFormatError(f"{path}: no data values found")
    return scanner.GridData(values=np.asarray(rows, dtype=np.float64))


def _write_rows_csv(path, rows) -> None:
    buf = []
    for row in rows:
        d = row.to_dict()
        buf.append([("" if d[c] is None else repr(d[c]) if isinstance(d[c], float) else d[c])
                    for c in powerlab.COMPARE_COLUMNS])
    out = []
    writer_target = out
    header = ",".join(powerlab.COMPARE_COLUMNS)
    writer_target.append(header)
    for fields in buf:
        writer_target.append(",".join(str(f) for f in fields))
    _atomic_write(path, "\n".join(writer_target) + "\n")


def _write_rows_json(path, rows, meta) -> None:
    doc = {"schema_version": scanner.SCHEMA_VERSION, "meta": meta,
           "rows": [r.to_dict() for r in rows]}
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------------------
# commands

def _build_collection(cfg: RunConfig, n: int | None = None):
    if cfg.model == _engine.GRID2D:
        return sparsegrid.build_collection_2d(cfg.n1, cfg.n2, cfg.aspect_base)
    return sparsegrid.build_collection_1d(n if n is not None else cfg.n)


def _key_for(cfg: RunConfig, coll) -> CalibrationKey:
    n = coll.ncells if cfg.model == _engine.GRID2D else coll.n
    return CalibrationKey(kind=cfg.kind, model=cfg.model, n=n, alpha=cfg.alpha,
                          reps=cfg.reps, seed=cfg.seed,
                          collection_hash=coll.collection_hash)


def cmd_calibrate(cfg: RunConfig) -> int:
    coll = _build_collection(cfg)
    table = CalibrationTable(table_dir(cfg))
    key = _key_for(cfg, coll)
    cached = table.path_for(key).exists()
    cv = table.get_or_build(key, coll, workers=workers(cfg))
    print(f"{'cache hit' if cached else 'built'}: {key.digest()}")
    print(f"kind={cv.kind.value} model={cv.model} n={cv.n} alpha={cv.alpha} "
          f"reps={cv.reps} seed={cv.seed}")
    if cv.kappa is not None:
        print(f"kappa={cv.kappa!r}")
    if cv.alpha_tilde is not None:
        print(f"alpha_tilde={cv.alpha_tilde!r}")
    print("level,spacing,windows,threshold")
    surface = _engine.make_surface(coll, cfg.model)
    counts = np.diff(surface.bounds)
    thr = cv.block_thresholds
    for i, lv in enumerate(coll.levels):
        if thr is not None:
            t = thr[i]
        elif counts[i]:
            t = cv.thresholds[surface.active_idx[surface.bounds[i]]]
        else:
            t = float("inf")
        print(f"{lv.ell},{lv.spacing},{counts[i]},{float(t)!r}")
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    if cfg.model == _engine.GAUSSIAN:
        data = read_sequence(cfg.input)
        n = data.n
    elif cfg.model == _engine.DENSITY:
        data = read_points(cfg.input)
        n = data.n
    else:
        data = read_grid(cfg.input)
        n = data.shape
    if cfg.model == _engine.GRID2D:
        for flag, got in (("--n1", (cfg.n1, n[0])), ("--n2", (cfg.n2, n[1]))):
            if flag and got[0] is not None and got[0] != got[1]:
                raise MultiscanError(
                    f"input grid is {n[0]}x{n[1]}, but {flag}={got[0]}")
        cfg.n1, cfg.n2 = n
    elif cfg.n is not None and cfg.n != n:
        raise MultiscanError(f"input has n={n}, flags say n={cfg.n}")
    coll = _build_collection(cfg, n=None if cfg.model == _engine.GRID2D else n)
    table = CalibrationTable(table_dir(cfg))
    key = _key_for(cfg, coll)
    if cfg.auto_calibrate:
        cv = table.get_or_build(key, coll, workers=workers(cfg))
    else:
        cv = table.get(key)
        if cv is None:
            raise MultiscanError(
                f"no calibration for key {key.digest()}; run `multiscan calibrate` "
                "first or pass --auto-calibrate")
    if cfg.model == _engine.GAUSSIAN:
        report = scanner.fast_scan(data, coll, cv)
    elif cfg.model == _engine.DENSITY:
        report = scanner.fast_scan_density(data, coll, cv)
    else:
        report = scanner.fast_scan_2d(data, coll, cv)
    text = report.to_json()
    if cfg.output:
        _atomic_write(cfg.output, text + "\n")
    else:
        print(text)
    return EXIT_REJECTED if report.rejected else EXIT_OK


def _experiment_setup(cfg: RunConfig):
    coll = sparsegrid.build_collection_1d(cfg.n)
    table = CalibrationTable(table_dir(cfg))
    cal_reps = cfg.cal_reps if cfg.cal_reps is not None else cfg.reps
    cal_seed = cfg.cal_seed if cfg.cal_seed is not None else cfg.seed
    return coll, table, cal_reps, cal_seed


def cmd_power(cfg: RunConfig) -> int:
    coll, table, cal_reps, cal_seed = _experiment_setup(cfg)
    if cfg.mu is None:
        # boundary-amplitude row with the realized exponent unless disabled
        rows = powerlab.compare_table(
            [cfg.kind], cfg.n, [cfg.w], cfg.alpha, cfg.reps, cfg.seed,
            coll=coll, table=table, eps=cfg.eps, with_exponent=cfg.with_exponent,
            cal_reps=cal_reps, cal_seed=cal_seed, workers=workers(cfg))
    else:
        rows = [_power_row(cfg, coll, table, cal_reps, cal_seed, cfg.mu)]
    _emit_rows(cfg, rows)
    return EXIT_OK


def _power_row(cfg, coll, table, cal_reps, cal_seed, mu):
    pt = powerlab.estimate_power(cfg.kind, cfg.n, cfg.w, mu, cfg.alpha,
                                 cfg.reps, cfg.seed, coll=coll, table=table,
                                 cal_reps=cal_reps, cal_seed=cal_seed,
                                 workers=workers(cfg))
    return powerlab.CompareRow(
        kind=pt.kind, n=pt.n, w=pt.w, mu=pt.mu, alpha=cfg.alpha, reps=pt.reps,
        rejections=pt.rejections, power=pt.power, mc_se=pt.mc_se,
        mu_star=None, exponent=None, exponent_se=None, seed=cfg.seed,
        cal_reps=cal_reps, cal_seed=cal_seed,
        collection_hash=coll.collection_hash)


def cmd_compare(cfg: RunConfig) -> int:
    coll, table, cal_reps, cal_seed = _experiment_setup(cfg)
    rows = powerlab.compare_table(
        cfg.kinds, cfg.n, cfg.w_list, cfg.alpha, cfg.reps, cfg.seed,
        coll=coll, table=table, eps=cfg.eps, with_exponent=cfg.with_exponent,
        cal_reps=cal_reps, cal_seed=cal_seed, workers=workers(cfg))
    _emit_rows(cfg, rows)
    return EXIT_OK


def _emit_rows(cfg: RunConfig, rows) -> None:
    meta = {"command": cfg.command, "n": cfg.n, "alpha": cfg.alpha,
            "reps": cfg.reps, "seed": cfg.seed, "eps": cfg.eps}
    if cfg.output:
        _write_rows_csv(cfg.output, rows)
    if cfg.json_output:
        _write_rows_json(cfg.json_output, rows, meta)
    if not cfg.output and not cfg.json_output:
        print(",".join(powerlab.COMPARE_COLUMNS))
        for row in rows:
            d = row.to_dict()
            print(",".join("" if d[c] is None else str(d[c])
                           for c in powerlab.COMPARE_COLUMNS))


def cmd_collection(cfg: RunConfig) -> int:
    coll = _build_collection(cfg)
    if cfg.output:
        coll.to_csv(cfg.output)
    else:
        coll.to_csv("/dev/stdout")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _alpha_value(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be in (0, 1), got {text}")
    return v


def _w_list(text):
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad width list {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"bad width list {text!r}")
    return values


def _kind_list(text):
    values = [part.strip() for part in text.split(",") if part.strip()]
    for v in values:
        if v not in KINDS:
            raise argparse.ArgumentTypeError(f"unknown kind {v!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiscan",
        description="Multiscale scan statistics with size-dependent critical values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, seed=True, kind=True, model=True):
        if model:
            p.add_argument("--model", choices=MODELS, default=_engine.GAUSSIAN)
        if kind:
            p.add_argument("--kind", choices=KINDS, default="traditional")
        p.add_argument("--alpha", type=_alpha_value, default=0.05)
        p.add_argument("--reps", type=_positive_int, default=10_000)
        if seed:
            p.add_argument("--seed", type=int, required=True,
                           help="mandatory; no wall-clock seeding")
        p.add_argument("--workers", type=int, default=0,
                       help="parallel workers (0 = available parallelism)")
        p.add_argument("--table-dir", default=None)

    def sizes(p):
        p.add_argument("--n", type=_positive_int, default=None)
        p.add_argument("--n1", type=_positive_int, default=None)
        p.add_argument("--n2", type=_positive_int, default=None)
        p.add_argument("--aspect-base", type=float, default=2.0)

    p = sub.add_parser("calibrate", help="build and persist critical values")
    common(p)
    sizes(p)

    p = sub.add_parser("scan", help="scan a dataset; exit 2 on rejection")
    common(p)
    sizes(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--auto-calibrate", action="store_true")

    p = sub.add_parser("power", help="power of one calibration at one width")
    common(p, model=False)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--w", type=_positive_int, required=True)
    p.add_argument("--mu", type=float, default=None,
                   help="signal amplitude (default: boundary at --eps)")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--cal-reps", type=_positive_int, default=None)
    p.add_argument("--cal-seed", type=int, default=None)
    p.add_argument("--no-exponent", dest="with_exponent", action="store_false")
    p.add_argument("--output", default=None)
    p.add_argument("--json", dest="json_output", default=None)

    p = sub.add_parser("compare", help="power/exponent table across calibrations")
    common(p, kind=False, model=False)
    p.add_argument("--kinds", type=_kind_list, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--w-list", type=_w_list, required=True)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--cal-reps", type=_positive_int, default=None)
    p.add_argument("--cal-seed", type=int, default=None)
    p.add_argument("--no-exponent", dest="with_exponent", action="store_false")
    p.add_argument("--output", default=None)
    p.add_argument("--json", dest="json_output", default=None)

    p = sub.add_parser("collection", help="export the sparse collection as CSV")
    p.add_argument("--model", choices=MODELS, default=_engine.GAUSSIAN)
    sizes(p)
    p.add_argument("--output", default=None)

    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    for field in vars(args):
        if hasattr(cfg, field):
            setattr(cfg, field, getattr(args, field))
    return cfg


def _validate(cfg: RunConfig, parser: argparse.ArgumentParser) -> None:
    if cfg.command in ("calibrate", "scan", "collection"):
        if cfg.model == _engine.GRID2D:
            if cfg.command != "scan" and (cfg.n1 is None or cfg.n2 is None):
                parser.error("--n1 and --n2 are required for --model grid2d")
        elif cfg.n is None and cfg.command != "scan":
            parser.error("--n is required")
    if cfg.command == "compare":
        if any(w > cfg.n for w in cfg.w_list):
            parser.error(f"--w-list contains widths above n={cfg.n}")
    if cfg.command == "power" and cfg.w > cfg.n:
        parser.error(f"--w {cfg.w} exceeds n={cfg.n}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config_from(args)
    _validate(cfg, parser)
    handlers = {"calibrate": cmd_calibrate, "scan": cmd_scan,
                "power": cmd_power, "compare": cmd_compare,
                "collection": cmd_collection}
    try:
        return handlers[cfg.command](cfg)
    except (MultiscanError, ValueError, OSError) as exc:
        print(f"multiscan: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
