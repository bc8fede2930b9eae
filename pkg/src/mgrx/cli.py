"""Command-line front end for raw headerless binary fields."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DecodeError, InvalidInputError, MgrxError, check_finite
from .grid import build_hierarchy
from .metrics import QualityReport, rd_sweep, sweep_csv
from .pipeline import compress_field, decompress
from .quantizer import MODES, LEVELWISE
from .transform import DEFAULT_BATCH_SIZE, MultilevelCoefficients, decompose, recompose

TYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
BATCH_ENV = "MGRX_BATCH_SIZE"


@dataclass
class CliConfig:
    input: Path
    dims: tuple[int, ...]
    dtype: np.dtype
    tolerance: float
    relative: bool = False
    out: Path | None = None
    quant: str = LEVELWISE
    force_stop_level: int | None = None
    batch_size: int | None = DEFAULT_BATCH_SIZE
    levels: int | None = None
    seed: int = 0
    verify: bool = True


def parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}; expected e.g. 100,500,500")
    if not dims or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError(f"bad dims {text!r}")
    return dims


def resolve_batch_size(flag: int | None) -> int | None:
    """Flag beats environment beats default; ``0`` means one batch per sweep."""
    if flag is None:
        env = os.environ.get(BATCH_ENV)
        if env is None:
            return DEFAULT_BATCH_SIZE
        try:
            flag = int(env)
        except ValueError:
            raise InvalidInputError(f"{BATCH_ENV}={env!r} is not an integer")
    if flag < 0:
        raise InvalidInputError("batch size must be non-negative")
    return flag or None


def read_raw(path: Path, dims, dtype: np.dtype) -> np.ndarray:
    expected = math.prod(dims) * dtype.itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise InvalidInputError(
            f"{path}: dims {','.join(map(str, dims))} as {dtype.name} need {expected} bytes, file has {actual}"
        )
    data = np.fromfile(path, dtype=dtype).reshape(dims)
    check_finite(data)
    return data.astype(dtype.newbyteorder("="))


def write_raw(path: Path, data: np.ndarray) -> None:
    data.astype(data.dtype.newbyteorder("<"), copy=False).tofile(path)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_compress(cfg: CliConfig) -> int:
    field = read_raw(cfg.input, cfg.dims, cfg.dtype)
    tol = cfg.tolerance * float(np.ptp(field)) if cfg.relative else cfg.tolerance
    t0 = time.perf_counter()
    result = compress_field(
        field,
        tol,
        mode=cfg.quant,
        force_stop_level=cfg.force_stop_level,
        levels=cfg.levels,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )
    t1 = time.perf_counter()
    out = cfg.out or cfg.input.with_name(cfg.input.name + ".mgrx")
    out.write_bytes(result.data)
    _log(f"{out}: {len(result.data)} bytes, stop level {result.stop_level}, method {result.method}")
    if not cfg.verify:
        return 0
    t2 = time.perf_counter()
    recon = decompress(result.data, cfg.batch_size)
    t3 = time.perf_counter()
    report = QualityReport.measure(field, recon, len(result.data), t1 - t0, t3 - t2)
    _log(report.summary())
    if not report.linf <= tol:
        _log(f"verification failed: linf {report.linf:.6g} exceeds tolerance {tol:.6g}")
        return 1
    return 0


def _compress_job(cfg: CliConfig) -> tuple[str, int, str]:
    try:
        return str(cfg.input), cmd_compress(cfg), ""
    except (MgrxError, OSError) as exc:
        return str(cfg.input), 1, str(exc)


def cmd_decompress(args) -> int:
    field = decompress(Path(args.input).read_bytes(), resolve_batch_size(args.batch_size))
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".bin")
    write_raw(out, field)
    _log(f"{out}: {field.dtype.name} {'x'.join(map(str, field.shape))}")
    return 0


def cmd_stats(args) -> int:
    dtype = TYPES[args.type]
    original = read_raw(Path(args.input), args.dims, dtype)
    recon = read_raw(Path(args.recon), args.dims, dtype)
    artifact = os.path.getsize(args.artifact) if args.artifact else original.nbytes
    report = QualityReport.measure(original, recon, artifact)
    print(report.summary())
    return 0


def cmd_sweep(args) -> int:
    field = read_raw(Path(args.input), args.dims, TYPES[args.type])
    tolerances = [float(t) for t in args.tolerances.split(",")]
    options = dict(
        mode=args.quant,
        force_stop_level=args.force_stop_level,
        levels=args.levels,
        batch_size=resolve_batch_size(args.batch_size),
        seed=args.seed,
    )
    rows = rd_sweep(field, tolerances, relative=args.relative, **options)
    config = dict(options, input=Path(args.input).name, dims=args.dims, type=args.type,
                  tolerances=tolerances, relative=args.relative)
    text = sweep_csv(rows, config)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_decompose(args) -> int:
    dtype = TYPES[args.type]
    field = read_raw(Path(args.input), args.dims, dtype).astype(np.float64)
    h = build_hierarchy(args.dims, args.levels)
    coeffs = decompose(field, h, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"coarse": "coarse.bin"}
    write_raw(out / "coarse.bin", coeffs.coarse().reshape(-1))
    for level in range(1, h.num_levels + 1):
        files[str(level)] = f"level_{level}.bin"
        write_raw(out / files[str(level)], coeffs.level(level))
    manifest = {
        "dims": list(h.shape),
        "levels": h.num_levels,
        "type": args.type,
        "dims_per_level": [list(h.dims(lv)) for lv in range(h.num_levels + 1)],
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    _log(f"{out}: coarse block and {h.num_levels} level files")
    return 0


def cmd_recompose(args) -> int:
    src = Path(args.input)
    try:
        manifest = json.loads((src / "manifest.json").read_text())
        h = build_hierarchy(tuple(manifest["dims"]), int(manifest["levels"]))
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidInputError(f"{src}: unreadable manifest ({exc})")
    target = h.num_levels if args.target_level is None else args.target_level
    if not 0 <= target <= h.num_levels:
        raise InvalidInputError(f"target level {target} outside 0..{h.num_levels}")
    if not (src / "coarse.bin").exists():
        raise InvalidInputError(f"{src}: coarse.bin is missing")
    missing = [lv for lv in range(1, h.num_levels + 1) if not (src / f"level_{lv}.bin").exists()]
    have = next((lv - 1 for lv in missing), h.num_levels)
    if args.target_level is None:
        target = have
        if missing:
            _log(f"missing levels {missing}; recomposing up to level {target}")
    elif target > have:
        needed = [lv for lv in missing if lv <= target]
        _log(f"error: cannot recompose level {target}; missing levels {needed}")
        return 1
    ht = h.truncated(target)
    parts = [np.fromfile(src / "coarse.bin", dtype="<f8")]
    for level in range(1, target + 1):
        parts.append(np.fromfile(src / f"level_{level}.bin", dtype="<f8"))
    buf = np.concatenate(parts)
    field = recompose(MultilevelCoefficients(buf, ht, 0))
    dtype = TYPES[args.type or manifest.get("type", "f64")]
    write_raw(Path(args.out), field.astype(dtype))
    _log(f"{args.out}: level {target}, {'x'.join(map(str, field.shape))} {dtype.name}")
    return 0


def _add_field_args(p: argparse.ArgumentParser, with_tolerance: bool = True, many: bool = False) -> None:
    # compress accepts several inputs, one field per worker
    p.add_argument("--input", required=True, nargs="+" if many else None)
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--type", choices=TYPES, default="f32")
    p.add_argument("--out")
    if with_tolerance:
        p.add_argument("--relative", action="store_true", help="tolerance is a fraction of the value range")
        p.add_argument("--quant", choices=MODES, default=LEVELWISE)
        p.add_argument("--force-stop-level", type=int)
        p.add_argument("--batch-size", type=int, help=f"lines per sweep batch, 0 = all (env {BATCH_ENV})")
        p.add_argument("--levels", type=int)
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgrx", description="Error-bounded multigrid compression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress raw fields")
    _add_field_args(p, many=True)
    p.add_argument("--tolerance", type=float, required=True)
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("decompress", help="decompress an artifact to raw binary")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--batch-size", type=int)

    p = sub.add_parser("stats", help="compare an original and a reconstruction")
    p.add_argument("--input", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--type", choices=TYPES, default="f32")
    p.add_argument("--artifact", help="artifact file, for rate and ratio")

    p = sub.add_parser("sweep", help="rate-distortion sweep to CSV")
    _add_field_args(p)
    p.add_argument("--tolerances", required=True, help="comma-separated, ascending")

    p = sub.add_parser("decompose", help="write per-level components without quantization")
    _add_field_args(p, with_tolerance=False)
    p.add_argument("--levels", type=int)

    p = sub.add_parser("recompose", help="rebuild a field from decomposed components")
    p.add_argument("--input", required=True, help="directory written by decompose")
    p.add_argument("--out", required=True)
    p.add_argument("--target-level", type=int)
    p.add_argument("--type", choices=TYPES)
    return parser


def _compress_configs(args) -> list[CliConfig]:
    inputs = [Path(p) for p in args.input]
    out = Path(args.out) if args.out else None
    batch = resolve_batch_size(args.batch_size)
    configs = []
    for path in inputs:
        if out is not None and len(inputs) > 1:
            target = out / (path.name + ".mgrx")
        else:
            target = out
        configs.append(
            CliConfig(path, args.dims, TYPES[args.type], args.tolerance, args.relative, target, args.quant,
                      args.force_stop_level, batch, args.levels, args.seed, not args.no_verify)
        )
    return configs


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compress":
            configs = _compress_configs(args)
            if len(configs) == 1:
                return cmd_compress(configs[0])
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
            with ProcessPoolExecutor(max_workers=max(1, args.jobs)) as pool:
                results = list(pool.map(_compress_job, configs))
            for name, code, msg in results:
                if msg:
                    _log(f"error: {name}: {msg}")
            return max(code for _, code, _ in results)
        handler = {
            "decompress": cmd_decompress,
            "stats": cmd_stats,
            "sweep": cmd_sweep,
            "decompose": cmd_decompose,
            "recompose": cmd_recompose,
        }[args.command]
        return handler(args)
    except DecodeError as exc:
        _log(f"error: not a valid artifact: {exc}")
        return 1
    except (MgrxError, OSError) as exc:
        _log(f"error: {exc}")
        return 1


def main() -> None:
    sys.exit(run())
