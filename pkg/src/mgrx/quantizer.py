"""Uniform and level-wise quantization of multilevel coefficients.

The error budget is split across levels so that the per-level maximum errors
``q_l / 2`` sum to the budget. Uniform mode splits it evenly; level-wise mode
makes ``q_l`` proportional to ``#N*_l``, which minimises the entropy cost
model ``sum_l #N*_l * log2(R / q_l)`` under that constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log2

import numpy as np

from .errors import InvalidBudgetError, ShapeError, check_finite
from .grid import GridHierarchy

UNIFORM = "uniform"
LEVELWISE = "levelwise"
MODES = (UNIFORM, LEVELWISE)

# labels live in [-LABEL_BOUND, LABEL_BOUND]; anything wider is an outlier
LABEL_BOUND = 2**15 - 1


@dataclass(frozen=True)
class QuantizationPlan:
    mode: str
    budget: float
    bin_widths: tuple[float, ...]
    range: float | None = None

    @property
    def num_levels(self) -> int:
        return len(self.bin_widths) - 1

    def error_bound(self, level: int) -> float:
        return self.bin_widths[level] / 2

    def coarse_bound(self, stop_level: int) -> float:
        """Error allowance of a coarse block standing in for levels 0..stop."""
        return sum(self.bin_widths[: stop_level + 1]) / 2

    def coarse_width(self, stop_level: int) -> float:
        return sum(self.bin_widths[: stop_level + 1])

    def kappa(self, level: int) -> float:
        """Ratio of a level's bin width to the next coarser one."""
        if level < 1:
            return 1.0
        return self.bin_widths[level] / self.bin_widths[level - 1]


def make_plan(mode: str, budget: float, hierarchy: GridHierarchy) -> QuantizationPlan:
    if not (budget > 0 and np.isfinite(budget)):
        raise InvalidBudgetError(f"budget must be positive and finite, got {budget!r}")
    levels = hierarchy.num_levels
    if mode == UNIFORM:
        widths = tuple(2.0 * budget / (levels + 1) for _ in range(levels + 1))
    elif mode == LEVELWISE:
        total = hierarchy.total_count
        widths = tuple(2.0 * budget * d / total for d in hierarchy.delta_counts)
    else:
        raise ValueError(f"unknown quantization mode {mode!r}; expected one of {MODES}")
    return QuantizationPlan(mode, float(budget), widths)


def estimated_cost(plan: QuantizationPlan, hierarchy: GridHierarchy, R: float) -> float:
    """Entropy-model size in bits; levels whose bins exceed ``R`` cost nothing."""
    if not R > 0:
        raise InvalidBudgetError(f"coefficient range must be positive, got {R!r}")
    bits = 0.0
    for d, q in zip(hierarchy.delta_counts, plan.bin_widths):
        bits += max(0.0, d * log2(R / q))
    return bits


def quantize_values(values: np.ndarray, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Round-to-nearest labels and a mask of values outside the label alphabet."""
    values = np.asarray(values, dtype=np.float64)
    check_finite(values)
    scaled = np.rint(values / width)
    outlier = np.abs(scaled) > LABEL_BOUND
    labels = np.where(outlier, 0.0, scaled).astype(np.int32)
    return labels, outlier


def dequantize_values(labels: np.ndarray, width: float) -> np.ndarray:
    return labels.astype(np.float64) * width


@dataclass
class LabelStream:
    """Per-segment labels plus losslessly kept outliers.

    ``labels[0]`` belongs to the coarse block (``None`` when the coarse block
    is coded elsewhere), ``labels[i]`` to level ``stop_level + i``. Outlier
    positions index the level-centric buffer.
    """

    labels: list[np.ndarray | None]
    outlier_positions: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    outlier_values: np.ndarray = field(default_factory=lambda: np.zeros(0, np.float64))


def segment_widths(plan: QuantizationPlan, stop_level: int) -> list[float]:
    return [plan.coarse_width(stop_level)] + list(plan.bin_widths[stop_level + 1 :])


def quantize(coeffs, plan: QuantizationPlan, include_coarse: bool = True) -> LabelStream:
    """Quantize a :class:`~mgrx.transform.MultilevelCoefficients` buffer."""
    h = coeffs.hierarchy
    if plan.num_levels != h.num_levels:
        raise ShapeError(f"plan has {plan.num_levels} levels, hierarchy {h.num_levels}")
    offsets = coeffs.offsets
    labels: list[np.ndarray | None] = []
    positions = []
    values = []
    for i, width in enumerate(segment_widths(plan, coeffs.stop_level)):
        if i == 0 and not include_coarse:
            labels.append(None)
            continue
        seg = coeffs.buffer[offsets[i] : offsets[i + 1]]
        lab, out = quantize_values(seg, width)
        labels.append(lab)
        idx = np.flatnonzero(out)
        positions.append(idx + offsets[i])
        values.append(np.asarray(seg, dtype=np.float64)[idx])
    return LabelStream(
        labels,
        np.concatenate(positions) if positions else np.zeros(0, np.int64),
        np.concatenate(values) if values else np.zeros(0, np.float64),
    )


def dequantize(stream: LabelStream, plan: QuantizationPlan, hierarchy: GridHierarchy, stop_level: int,
               coarse: np.ndarray | None = None) -> np.ndarray:
    """Rebuild a level-centric float64 buffer.

    ``coarse`` supplies the coarse block when ``stream.labels[0]`` is ``None``.
    """
    widths = segment_widths(plan, stop_level)
    parts = []
    for i, (lab, width) in enumerate(zip(stream.labels, widths)):
        if lab is None:
            if i != 0 or coarse is None:
                raise ShapeError("missing label segment")
            parts.append(np.asarray(coarse, dtype=np.float64).reshape(-1))
        else:
            parts.append(dequantize_values(lab, width))
    buf = np.concatenate(parts)
    if buf.size != hierarchy.total_count:
        raise ShapeError(f"label streams cover {buf.size} values, expected {hierarchy.total_count}")
    buf[stream.outlier_positions] = stream.outlier_values
    return buf
