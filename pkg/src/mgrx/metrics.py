"""Distortion, rate and throughput measurement plus rate-distortion sweeps."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError, UndefinedPsnrError

CSV_COLUMNS = (
    "tolerance",
    "rate_bits",
    "psnr_db",
    "linf",
    "ratio",
    "compress_MBps",
    "decompress_MBps",
    "stop_level",
)


def _pair(original, reconstructed) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(original, dtype=np.float64).reshape(-1)
    b = np.asarray(reconstructed, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise InvalidInputError("cannot measure empty arrays")
    return a, b


def _psnr(value_range: float, mse: float) -> float:
    if mse == 0:
        return math.inf
    if value_range == 0:
        raise UndefinedPsnrError("data range is zero but the error is not")
    return 20.0 * math.log10(value_range) - 10.0 * math.log10(mse)


def psnr(original, reconstructed) -> float:
    """Peak signal-to-noise ratio in dB over the original's value range; ``inf`` when exact."""
    a, b = _pair(original, reconstructed)
    return _psnr(float(a.max() - a.min()), float(np.mean((a - b) ** 2)))


def dataset_psnr(pairs) -> tuple[float, list[float]]:
    """Pooled PSNR over several fields (global range, total squared error) and per-field values."""
    lo, hi, sse, n = math.inf, -math.inf, 0.0, 0
    per_field = []
    for original, reconstructed in pairs:
        a, b = _pair(original, reconstructed)
        lo, hi = min(lo, float(a.min())), max(hi, float(a.max()))
        sse += float(np.sum((a - b) ** 2))
        n += a.size
        per_field.append(psnr(a, b))
    if n == 0:
        raise InvalidInputError("no fields given")
    return _psnr(hi - lo, sse / n), per_field


def linf(original, reconstructed) -> float:
    a, b = _pair(original, reconstructed)
    return float(np.max(np.abs(a - b)))


def rate(artifact_bytes: int, count: int) -> float:
    """Stored bits per original value."""
    if count <= 0:
        raise InvalidInputError("value count must be positive")
    return 8.0 * artifact_bytes / count


def ratio(original_bytes: int, artifact_bytes: int) -> float:
    if artifact_bytes <= 0:
        raise InvalidInputError("compressed size must be positive")
    return original_bytes / artifact_bytes


@dataclass
class QualityReport:
    psnr: float
    linf: float
    rate: float
    ratio: float
    compress_throughput: float = math.nan
    decompress_throughput: float = math.nan

    @classmethod
    def measure(cls, original, reconstructed, artifact_bytes: int, compress_seconds=None,
                decompress_seconds=None) -> "QualityReport":
        original = np.asarray(original)
        nbytes = original.nbytes
        tput = lambda t: nbytes / t if t else math.nan
        return cls(
            psnr(original, reconstructed),
            linf(original, reconstructed),
            rate(artifact_bytes, original.size),
            ratio(nbytes, artifact_bytes),
            tput(compress_seconds),
            tput(decompress_seconds),
        )

    def summary(self) -> str:
        return (
            f"ratio {self.ratio:.3f}  rate {self.rate:.4f} bits/value  "
            f"linf {self.linf:.6g}  psnr {_fmt(self.psnr)} dB"
        )


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6g}"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SweepRow:
    tolerance: float
    report: QualityReport
    stop_level: int

    def csv_fields(self) -> list[str]:
        r = self.report
        return [
            repr(self.tolerance),
            f"{r.rate:.6f}",
            _fmt(r.psnr),
            f"{r.linf:.6g}",
            f"{r.ratio:.6f}",
            f"{r.compress_throughput / 1e6:.3f}",
            f"{r.decompress_throughput / 1e6:.3f}",
            str(self.stop_level),
        ]


def rd_sweep(field, tolerances, relative: bool = False, **options) -> list[SweepRow]:
    """Compress and decompress once per tolerance (ascending), measuring each run."""
    from .pipeline import compress_field, decompress

    tolerances = [float(t) for t in tolerances]
    if not tolerances or any(t <= 0 for t in tolerances):
        raise InvalidInputError("tolerances must be positive")
    if tolerances != sorted(tolerances):
        raise InvalidInputError("tolerances must be sorted ascending")
    field = np.asarray(field)
    scale = float(np.ptp(field)) if relative else 1.0
    rows = []
    for tol in tolerances:
        t0 = time.perf_counter()
        result = compress_field(field, tol * scale, **options)
        t1 = time.perf_counter()
        recon = decompress(result.data)
        t2 = time.perf_counter()
        report = QualityReport.measure(field, recon, len(result.data), t1 - t0, t2 - t1)
        rows.append(SweepRow(tol, report, result.stop_level))
    return rows


def sweep_csv(rows: list[SweepRow], config: dict | None = None) -> str:
    out = io.StringIO()
    if config is not None:
        out.write(f"# config_hash={config_hash(config)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())
    return out.getvalue()


def report_dict(report: QualityReport) -> dict:
    return {k: (_fmt(v) if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(report).items()}
