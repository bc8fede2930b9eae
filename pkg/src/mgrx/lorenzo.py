"""First-order Lorenzo predictor codec with a hard absolute error bound.

Prediction runs on reconstructed values, so the compressor sees exactly what
the decompressor will. Because the predictor is an integer combination of
neighbours, quantizing every value to the ``2e`` lattice first and then
taking the Lorenzo residual of the lattice indices gives the same labels as
the sequential predict/quantize/reconstruct loop, and the decompressor is a
cumulative sum along each axis. Out-of-domain neighbours read as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidBudgetError, ShapeError, check_finite
from .quantizer import LABEL_BOUND

# keeps |prefix sums| of lattice indices far from int64 overflow for d <= 8
LATTICE_LIMIT = 2**50


@dataclass
class LorenzoStream:
    shape: tuple[int, ...]
    error_bound: float
    labels: np.ndarray
    escape_positions: np.ndarray
    escape_labels: np.ndarray
    patch_positions: np.ndarray
    patch_values: np.ndarray

    @property
    def outlier_count(self) -> int:
        return int(self.escape_positions.size + self.patch_positions.size)


def lorenzo_predict(recon: np.ndarray, index) -> float:
    """Inclusion-exclusion prediction from the ``2**d - 1`` prior neighbours."""
    index = tuple(int(i) for i in index)
    total = 0.0
    for offset in product((0, 1), repeat=recon.ndim):
        k = sum(offset)
        if k == 0:
            continue
        pos = tuple(i - o for i, o in zip(index, offset))
        if min(pos) < 0:
            continue
        total += (1.0 if k % 2 else -1.0) * float(recon[pos])
    return total


def lorenzo_residual(values: np.ndarray) -> np.ndarray:
    """``values - prediction`` everywhere, as mixed backward differences."""
    out = values
    for axis in range(values.ndim):
        out = np.diff(out, axis=axis, prepend=0)
    return out


def lorenzo_integrate(residual: np.ndarray) -> np.ndarray:
    out = residual
    for axis in range(residual.ndim):
        out = np.cumsum(out, axis=axis)
    return out


def _lattice(field: np.ndarray, e: float) -> np.ndarray:
    scaled = np.clip(np.rint(field / (2.0 * e)), -LATTICE_LIMIT, LATTICE_LIMIT)
    return scaled.astype(np.int64)


def _recon_from_lattice(lattice: np.ndarray, e: float) -> np.ndarray:
    return lattice.astype(np.float64) * (2.0 * e)


def compress_lorenzo(field, e: float) -> LorenzoStream:
    field = np.asarray(field, dtype=np.float64)
    check_finite(field)
    if not (e > 0 and np.isfinite(e)):
        raise InvalidBudgetError(f"error bound must be positive, got {e!r}")
    lattice = _lattice(field, e)
    recon = _recon_from_lattice(lattice, e)
    # rounding of field / 2e (or clipping) can leave a value just outside the bound
    patch = np.flatnonzero(np.abs(field - recon).reshape(-1) > e)
    residual = lorenzo_residual(lattice).reshape(-1)
    escape = np.flatnonzero(np.abs(residual) > LABEL_BOUND)
    escape_labels = residual[escape].copy()
    residual[escape] = 0
    return LorenzoStream(
        tuple(field.shape),
        float(e),
        residual.astype(np.int32),
        escape.astype(np.int64),
        escape_labels.astype(np.int64),
        patch.astype(np.int64),
        field.reshape(-1)[patch].copy(),
    )


def decompress_lorenzo(stream: LorenzoStream, dims=None) -> np.ndarray:
    shape = tuple(stream.shape if dims is None else dims)
    if int(np.prod(shape)) != stream.labels.size:
        raise ShapeError(f"{stream.labels.size} labels cannot fill shape {shape}")
    residual = stream.labels.astype(np.int64)
    residual[stream.escape_positions] = stream.escape_labels
    lattice = lorenzo_integrate(residual.reshape(shape))
    recon = _recon_from_lattice(lattice, stream.error_bound).reshape(-1)
    recon[stream.patch_positions] = stream.patch_values
    return recon.reshape(shape)


def lorenzo_sequential(field, e: float) -> tuple[np.ndarray, np.ndarray]:
    """Reference predict/quantize/reconstruct loop (slow; for checking)."""
    field = np.asarray(field, dtype=np.float64)
    recon = np.zeros_like(field)
    labels = np.zeros(field.shape, dtype=np.int64)
    for idx in np.ndindex(*field.shape):
        pred = lorenzo_predict(recon, idx)
        k = int(np.rint((field[idx] - pred) / (2.0 * e)))
        labels[idx] = k
        recon[idx] = pred + k * 2.0 * e
    return labels, recon
