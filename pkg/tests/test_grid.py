import pytest

from mgrx.errors import DepthExceededError, InvalidDimsError, InvalidLevelError
from mgrx.grid import build_hierarchy, coarsen, delta_count, max_depth


def test_coarsen_rounds_up():
    assert coarsen((17, 10, 2)) == (9, 5, 1)


@pytest.mark.parametrize("dims,depth", [((3,), 1), ((5,), 2), ((17, 17, 17), 4), ((9, 33, 17), 3), ((10,), 3)])
def test_max_depth(dims, depth):
    assert max_depth(dims) == depth


def test_counts_of_cubic_hierarchy():
    h = build_hierarchy((65, 65, 65), levels=4)
    assert [h.count(lv) for lv in range(5)] == [125, 729, 4913, 35937, 274625]
    assert h.delta_counts == (125, 604, 4184, 31024, 238688)
    assert sum(h.delta_counts) == h.total_count == 65**3
    assert delta_count(h, -1) == 0 and h.count(-1) == 0


def test_dims_are_finest_first():
    h = build_hierarchy((9, 10))
    assert h.dims_per_level[0] == (9, 10)
    assert h.dims(h.num_levels) == (9, 10)
    assert h.dims(0) == h.dims_per_level[-1]


def test_truncated_keeps_coarse_part():
    h = build_hierarchy((33, 17))
    t = h.truncated(2)
    assert t.shape == h.dims(2)
    assert [t.count(lv) for lv in range(3)] == [h.count(lv) for lv in range(3)]


def test_invalid_inputs():
    with pytest.raises(InvalidDimsError):
        build_hierarchy((1, 5))
    with pytest.raises(InvalidDimsError):
        build_hierarchy(())
    with pytest.raises(DepthExceededError):
        build_hierarchy((5, 5), levels=3)
    with pytest.raises(InvalidLevelError):
        build_hierarchy((5, 5)).dims(3)
