"""End-to-end compression: decomposition with in-loop quantization, optional
hand-off of the coarse grid to the Lorenzo codec, and entropy coding.

Each level's coefficients are quantized before the correction is computed
from them, so the nodal values carry only the corrections the decompressor
will reproduce bit for bit. The reconstruction error is then the sum of the
per-level quantization errors, at most the budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .adaptive import StopDecision, choose_stop, penalty_model
from .encoder import (
    METHOD_HYBRID,
    METHOD_LORENZO,
    METHOD_MULTIGRID,
    CompressedArtifact,
    read_artifact,
    write_artifact,
)
from .errors import InvalidInputError, InvalidLevelError, check_finite
from .grid import build_hierarchy
from .lorenzo import compress_lorenzo, decompress_lorenzo
from .quantizer import LEVELWISE, QuantizationPlan, dequantize_values, make_plan, quantize_values
from .transform import (
    DEFAULT_BATCH_SIZE,
    MultilevelCoefficients,
    SolverWorkspace,
    decompose_level,
    recompose,
)


@dataclass
class CompressionResult:
    data: bytes
    stop_level: int
    method: int
    plan: QuantizationPlan
    decisions: dict[int, StopDecision] = dc_field(default_factory=dict)


def _as_field(field) -> np.ndarray:
    arr = np.asarray(field)
    if arr.dtype not in (np.float32, np.float64):
        if not np.issubdtype(arr.dtype, np.number):
            raise InvalidInputError(f"cannot compress dtype {arr.dtype}")
        arr = arr.astype(np.float64)
    if arr.ndim < 1 or arr.size == 0:
        raise InvalidInputError("field must be a non-empty array")
    check_finite(arr)
    return arr


def compress_field(
    field,
    tolerance: float,
    mode: str = LEVELWISE,
    force_stop_level: int | None = None,
    levels: int | None = None,
    batch_size: int | None = DEFAULT_BATCH_SIZE,
    adaptive: bool = True,
    seed: int = 0,
) -> CompressionResult:
    """Compress with an absolute L-infinity budget ``tolerance``.

    ``force_stop_level`` fixes where multigrid hands over to the Lorenzo
    codec (``0`` means pure multigrid); otherwise the stop level is chosen
    per level when ``adaptive`` is set. ``seed`` drives the penalty
    simulation used outside 3D level-wise plans.
    """
    arr = _as_field(field)
    h = build_hierarchy(arr.shape, levels)
    plan = make_plan(mode, tolerance, h)
    L = h.num_levels
    if force_stop_level is not None and not 0 <= force_stop_level <= L:
        raise InvalidLevelError(f"stop level {force_stop_level} outside 0..{L}")
    ws = SolverWorkspace(batch_size)
    buf = np.array(arr, dtype=np.float64, order="C")
    levelwise = plan.mode == LEVELWISE

    level_labels: dict[int, np.ndarray] = {}
    outlier_pos = []
    outlier_val = []

    def hook(level: int, values: np.ndarray) -> np.ndarray:
        width = plan.bin_widths[level]
        labels, out = quantize_values(values, width)
        level_labels[level] = labels
        deq = dequantize_values(labels, width)
        idx = np.flatnonzero(out)
        deq[idx] = values[idx]
        outlier_pos.append(idx + h.count(level - 1))
        outlier_val.append(values[idx])
        return deq

    decisions: dict[int, StopDecision] = {}
    stop = 0
    for level in range(L, 0, -1):
        if force_stop_level is not None:
            if level == force_stop_level:
                stop = level
                break
        elif adaptive:
            model = penalty_model(h.ndim, plan.kappa(level), levelwise, seed)
            grid = buf[tuple(slice(0, n) for n in h.dims(level))]
            decision = choose_stop(
                grid,
                plan.error_bound(level),
                model,
                width=plan.bin_widths[level],
                coarse_bound=plan.coarse_bound(level),
                next_bound=plan.coarse_bound(level - 1),
            )
            decisions[level] = decision
            if decision.stop:
                stop = level
                break
        decompose_level(buf, h, level, ws, hook)

    coarse_grid = buf[tuple(slice(0, n) for n in h.dims(stop))]
    if stop > 0:
        coarse = compress_lorenzo(coarse_grid, plan.coarse_bound(stop))
        method = METHOD_LORENZO if stop == L else METHOD_HYBRID
    else:
        values = coarse_grid.reshape(-1)
        coarse, out = quantize_values(values, plan.coarse_width(0))
        idx = np.flatnonzero(out)
        outlier_pos.insert(0, idx)
        outlier_val.insert(0, values[idx])
        method = METHOD_MULTIGRID
    positions = np.concatenate(outlier_pos) if outlier_pos else np.zeros(0, np.int64)
    values = np.concatenate(outlier_val) if outlier_val else np.zeros(0)
    order = np.argsort(positions, kind="stable")
    art = CompressedArtifact(
        dtype=arr.dtype,
        method=method,
        dims=h.shape,
        num_levels=L,
        stop_level=stop,
        quant_mode=plan.mode,
        budget=plan.budget,
        bin_widths=plan.bin_widths,
        coarse=coarse,
        level_labels=[level_labels[lv] for lv in range(stop + 1, L + 1)],
        outlier_positions=positions[order],
        outlier_values=values[order],
    )
    return CompressionResult(write_artifact(art), stop, method, plan, decisions)


def compress(field, tolerance: float, **kwargs) -> bytes:
    return compress_field(field, tolerance, **kwargs).data


def decompress(data: bytes, batch_size: int | None = DEFAULT_BATCH_SIZE) -> np.ndarray:
    art = read_artifact(data)
    return reconstruct(art, batch_size)


def reconstruct(art: CompressedArtifact, batch_size: int | None = DEFAULT_BATCH_SIZE) -> np.ndarray:
    h = build_hierarchy(art.dims, art.num_levels)
    plan = QuantizationPlan(art.quant_mode, art.budget, tuple(art.bin_widths))
    s = art.stop_level
    if art.method == METHOD_MULTIGRID:
        coarse = dequantize_values(art.coarse, plan.coarse_width(0))
    else:
        coarse = decompress_lorenzo(art.coarse, h.dims(s)).reshape(-1)
    parts = [coarse]
    for level, labels in zip(range(s + 1, h.num_levels + 1), art.level_labels):
        parts.append(dequantize_values(labels, plan.bin_widths[level]))
    buf = np.concatenate(parts)
    buf[art.outlier_positions] = art.outlier_values
    field = recompose(MultilevelCoefficients(buf, h, s), SolverWorkspace(batch_size))
    return field.astype(art.dtype, copy=False)
