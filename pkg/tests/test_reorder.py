import numpy as np
import pytest

from mgrx.grid import build_hierarchy
from mgrx.reorder import (
    coefficient_index,
    inverse_reorder_axis,
    inverse_reorder_level,
    level_map,
    level_offsets,
    level_order,
    reorder_axis,
    reorder_level,
)


def test_reorder_axis_puts_even_indices_first():
    a = np.arange(7)
    assert reorder_axis(a.copy(), 0).tolist() == [0, 2, 4, 6, 1, 3, 5]
    b = np.arange(6)
    assert reorder_axis(b.copy(), 0).tolist() == [0, 2, 4, 1, 3, 5]


@pytest.mark.parametrize("shape", [(7,), (6, 9), (5, 4, 7)])
def test_axis_roundtrip(shape):
    a = np.random.default_rng(0).normal(size=shape)
    for axis in range(len(shape)):
        assert np.array_equal(inverse_reorder_axis(reorder_axis(a.copy(), axis), axis), a)


@pytest.mark.parametrize("shape", [(17,), (9, 10), (9, 33, 17), (5, 6, 5, 6)])
def test_level_roundtrip_is_exact(shape):
    h = build_hierarchy(shape)
    a = np.random.default_rng(1).normal(size=shape)
    b = a.copy()
    for level in range(h.num_levels, 0, -1):
        reorder_level(b, h, level)
    for level in range(1, h.num_levels + 1):
        inverse_reorder_level(b, h, level)
    assert np.array_equal(a, b)


def test_coarse_grid_lands_in_leading_block():
    h = build_hierarchy((9, 10))
    idx = np.arange(90).reshape(9, 10)
    reorder_level(idx, h, h.num_levels)
    assert np.array_equal(idx[:5, :5], np.arange(90).reshape(9, 10)[::2, ::2])


@pytest.mark.parametrize("shape", [(9, 10), (9, 33, 17)])
def test_level_order_groups_by_level(shape):
    h = build_hierarchy(shape)
    for stop in range(h.num_levels + 1):
        order = level_order(h, stop)
        assert np.array_equal(np.sort(order), np.arange(h.total_count))
        levels = level_map(h, stop).reshape(-1)[order]
        assert np.all(np.diff(levels.astype(int)) >= 0)
        off = level_offsets(h, stop)
        assert off[0] == 0 and off[1] == h.count(stop) and off[-1] == h.total_count


def test_coefficient_index_excludes_nodal_block():
    h = build_hierarchy((9, 10))
    for level in range(1, h.num_levels + 1):
        idx = coefficient_index(h, level)
        assert idx.size == h.delta_count(level)
        block = np.zeros(h.dims(level), dtype=bool)
        block.reshape(-1)[idx] = True
        m0, m1 = h.dims(level - 1)
        assert not block[:m0, :m1].any()
        assert block.sum() == idx.size
