import numpy as np
import pytest
from fields import gram_matrix, load_matrix

from mgrx.errors import DegenerateLineError, DegenerateSystemError, ShapeError
from mgrx.grid import build_hierarchy
from mgrx.reference import decompose_naive, natural_positions
from mgrx.reorder import reorder_level
from mgrx.transform import (
    SolverWorkspace,
    compute_correction,
    decompose,
    decompose_level,
    load_vector_1d,
    mass_matrix,
    prolongate,
    recompose,
    solve_correction_1d,
)


def test_load_vector_interior_weights():
    line = np.zeros(9)
    line[4] = 1.0
    f = load_vector_1d(line)
    assert np.allclose(f, [0, 1 / 12, 5 / 6, 1 / 12, 0])
    line = np.zeros(9)
    line[3] = 1.0
    assert np.allclose(load_vector_1d(line), [0, 0.5, 0.5, 0, 0])


def test_load_vector_matches_quadrature():
    rng = np.random.default_rng(7)
    mats = {}
    for _ in range(1000):
        n = int(rng.integers(3, 40))
        if n not in mats:
            mats[n] = load_matrix(n)
        line = rng.normal(size=n)
        np.testing.assert_allclose(load_vector_1d(line), mats[n] @ line, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 9, 10, 33, 64])
def test_mass_matrix_is_the_hat_gram_matrix(n):
    np.testing.assert_allclose(mass_matrix((n + 1) // 2, n % 2 == 0), gram_matrix(n), atol=1e-14)


@pytest.mark.parametrize("n", [3, 4, 9, 10, 33, 64, 257])
def test_solve_matches_dense(n):
    rng = np.random.default_rng(n)
    f = rng.normal(size=(n + 1) // 2)
    dense = np.linalg.solve(gram_matrix(n) if n < 80 else mass_matrix(f.size, n % 2 == 0), f)
    np.testing.assert_allclose(solve_correction_1d(f, even_tail=n % 2 == 0), dense, rtol=0, atol=1e-10)


def test_degenerate_kernels_raise():
    with pytest.raises(DegenerateLineError):
        load_vector_1d([1.0, 2.0])
    with pytest.raises(DegenerateSystemError):
        solve_correction_1d([1.0])


@pytest.mark.parametrize("shape", [(9, 7), (5, 6, 5)])
def test_one_step_gives_l2_projection(shape):
    # nodal values after one step equal the L2 projection onto N_{l-1}
    rng = np.random.default_rng(3)
    u = rng.normal(size=shape)
    h = build_hierarchy(shape, 1)
    buf = u.copy()
    decompose_level(buf, h, 1)
    gram = np.ones((1, 1))
    load = np.ones((1, 1))
    for n in shape:
        gram = np.kron(gram, gram_matrix(n))
        load = np.kron(load, load_matrix(n))
    expect = np.linalg.solve(gram, load @ u.reshape(-1))
    coarse = buf[tuple(slice(0, (n + 1) // 2) for n in shape)]
    np.testing.assert_allclose(coarse.reshape(-1), expect, atol=1e-12)


def test_multilinear_field_has_zero_coefficients():
    x, y, z = np.meshgrid(*[np.arange(n, dtype=float) for n in (17, 9, 11)], indexing="ij")
    field = 1.5 + 0.3 * x - 2 * y + 0.7 * z + 0.1 * x * y * z
    h = build_hierarchy(field.shape, 1)
    c = decompose(field, h)
    np.testing.assert_allclose(c.level(1), 0, atol=1e-12)


@pytest.mark.parametrize("shape", [(17, 17, 17), (9, 33, 17), (5, 5, 5, 5), (6, 7), (10,)])
def test_roundtrip(shape):
    rng = np.random.default_rng(sum(shape))
    field = rng.normal(size=shape)
    out = recompose(decompose(field))
    assert np.abs(out - field).max() <= 1e-12 * np.ptp(field)


@pytest.mark.parametrize("shape", [(9,), (10,), (6, 7), (9, 10, 7), (5, 6, 5, 6)])
def test_matches_naive_reference(shape):
    field = np.random.default_rng(11).normal(size=shape)
    h = build_hierarchy(shape)
    for stop in range(h.num_levels + 1):
        fast = decompose(field, h, stop).buffer
        slow = decompose_naive(field, h, stop).reshape(-1)[natural_positions(h, stop)]
        np.testing.assert_allclose(fast, slow, atol=1e-13)


@pytest.mark.parametrize("batch", [1, 3, 32, None])
def test_batching_is_bitwise_invariant(batch):
    field = np.random.default_rng(5).normal(size=(33, 17, 9))
    h = build_hierarchy(field.shape)
    base = field.copy()
    reorder_level(base, h, h.num_levels)
    ref = compute_correction(base, h, h.num_levels, SolverWorkspace(1))
    got = compute_correction(base, h, h.num_levels, SolverWorkspace(batch))
    assert np.array_equal(ref, got)
    assert np.array_equal(decompose(field, h, 0, SolverWorkspace(batch)).buffer,
                          decompose(field, h, 0, SolverWorkspace(1)).buffer)


def test_partial_recompose_gives_coarse_field():
    field = np.random.default_rng(2).normal(size=(17, 17))
    h = build_hierarchy(field.shape)
    c = decompose(field, h)
    coarse = recompose(c, target_level=2)
    assert coarse.shape == h.dims(2)
    # matches decomposing only down to level 2 and reading the coarse block
    np.testing.assert_allclose(coarse, decompose(field, h, 2).coarse(), atol=1e-12)


def test_float32_field_keeps_dtype():
    field = np.random.default_rng(4).normal(size=(17, 9)).astype(np.float32)
    c = decompose(field)
    assert c.buffer.dtype == np.float32
    assert np.abs(recompose(c) - field).max() < 1e-5


def test_prolongate_even_tail_copies_neighbour():
    coarse = np.array([[1.0, 3.0]])
    out = prolongate(coarse, (1, 4))
    # reordered layout: nodal entries first, then the midpoint, then the tail copy
    assert out.tolist() == [[1.0, 3.0, 2.0, 3.0]]


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        decompose(np.zeros((9, 9)), build_hierarchy((9, 10)))
