"""Level-centric data layout.

Reordering a level stably partitions every axis of the level's leading block
into even (nodal) slices followed by odd (coefficient) slices. Afterwards the
next coarser grid sits contiguous in the leading corner in its natural order,
and the coefficient nodes of the level fill the remaining ``2**d - 1`` boxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidAxisError, ShapeError
from .grid import GridHierarchy


@dataclass(frozen=True)
class LevelLayout:
    """Node groups of one reordered level.

    ``groups`` maps a 0/1 tuple (1 = coefficient side of that axis) to the
    slices selecting the group inside the level block.
    """

    axis_splits: tuple[tuple[int, int], ...]
    group_offsets: dict[tuple[int, ...], tuple[int, ...]]
    groups: dict[tuple[int, ...], tuple[slice, ...]]

    def group_size(self, key: tuple[int, ...]) -> int:
        size = 1
        for bit, (nodal, coeff) in zip(key, self.axis_splits):
            size *= coeff if bit else nodal
        return size


def level_slices(h: GridHierarchy, level: int) -> tuple[slice, ...]:
    """Slices of the leading block holding N_level in a level-centric buffer."""
    return tuple(slice(0, n) for n in h.dims(level))


def level_layout(h: GridHierarchy, level: int) -> LevelLayout:
    fine = h.dims(level)
    coarse = h.dims(level - 1) if level > 0 else fine
    splits = tuple((m, n - m) for n, m in zip(fine, coarse))
    offsets = {}
    groups = {}
    for key in product((0, 1), repeat=len(fine)):
        offsets[key] = tuple(m if bit else 0 for bit, (m, _) in zip(key, splits))
        groups[key] = tuple(
            slice(m, m + c) if bit else slice(0, m)
            for bit, (m, c) in zip(key, splits)
        )
    return LevelLayout(splits, offsets, groups)


def _check_axis(arr: np.ndarray, axis: int) -> int:
    if not -arr.ndim <= axis < arr.ndim:
        raise InvalidAxisError(f"axis {axis} out of range for {arr.ndim}-d data")
    axis %= arr.ndim
    if arr.shape[axis] < 2:
        raise ShapeError(f"axis {axis} has length {arr.shape[axis]} < 2")
    return axis


def _take(arr: np.ndarray, axis: int, sl: slice):
    idx = [slice(None)] * arr.ndim
    idx[axis] = sl
    return tuple(idx)


def reorder_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    """Even-index slices first, then odd-index slices, both in original order."""
    axis = _check_axis(arr, axis)
    return np.concatenate(
        (arr[_take(arr, axis, slice(0, None, 2))], arr[_take(arr, axis, slice(1, None, 2))]),
        axis=axis,
    )


def inverse_reorder_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    axis = _check_axis(arr, axis)
    m = (arr.shape[axis] + 1) // 2
    out = np.empty_like(arr)
    out[_take(out, axis, slice(0, None, 2))] = arr[_take(arr, axis, slice(0, m))]
    out[_take(out, axis, slice(1, None, 2))] = arr[_take(arr, axis, slice(m, None))]
    return out


def reorder_level(field: np.ndarray, h: GridHierarchy, level: int) -> np.ndarray:
    """Reorder the N_level block of ``field`` in place and return ``field``."""
    if level < 1:
        h._check(level)
        return field
    block = field[level_slices(h, level)]
    for axis in range(field.ndim):
        block[...] = reorder_axis(block, axis)
    return field


def inverse_reorder_level(field: np.ndarray, h: GridHierarchy, level: int) -> np.ndarray:
    if level < 1:
        h._check(level)
        return field
    block = field[level_slices(h, level)]
    for axis in reversed(range(field.ndim)):
        block[...] = inverse_reorder_axis(block, axis)
    return field


def level_map(h: GridHierarchy, stop_level: int = 0) -> np.ndarray:
    """Level of every position of a fully reordered buffer.

    Positions inside the coarse block N_stop are all reported as ``stop_level``.
    """
    axes = []
    for k in range(h.ndim):
        lev = np.full(h.shape[k], h.num_levels, dtype=np.uint8)
        for level in range(h.num_levels, stop_level, -1):
            lev[: h.dims(level - 1)[k]] = level - 1
        axes.append(lev)
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    out = grids[0]
    for g in grids[1:]:
        out = np.maximum(out, g)
    return np.broadcast_to(out, h.shape)


def level_order(h: GridHierarchy, stop_level: int = 0) -> np.ndarray:
    """Flat permutation gathering a reordered buffer into level-centric order.

    The coarse block comes first, then the coefficients of every finer level,
    each group in C order of its own level block.
    """
    lev = np.ascontiguousarray(level_map(h, stop_level)).reshape(-1)
    return np.argsort(lev, kind="stable")


def level_offsets(h: GridHierarchy, stop_level: int = 0) -> list[int]:
    """Start offsets in the level-centric buffer: coarse block, then levels."""
    offsets = [0, h.count(stop_level)]
    for level in range(stop_level + 1, h.num_levels + 1):
        offsets.append(offsets[-1] + h.delta_count(level))
    return offsets


def coefficient_index(h: GridHierarchy, level: int) -> np.ndarray:
    """Flat C-order indices, within the N_level block, of the N*_level nodes."""
    coarse = h.dims(level - 1)
    fine = h.dims(level)
    grids = np.meshgrid(
        *[np.arange(n) >= m for n, m in zip(fine, coarse)], indexing="ij", sparse=True
    )
    mask = grids[0]
    for g in grids[1:]:
        mask = mask | g
    return np.flatnonzero(np.broadcast_to(mask, fine))
