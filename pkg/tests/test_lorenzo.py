import itertools

import numpy as np
import pytest

from mgrx.errors import InvalidBudgetError, NonFiniteDataError
from mgrx.lorenzo import compress_lorenzo, decompress_lorenzo, lorenzo_predict, lorenzo_sequential


def brute_predict(recon, index):
    total = 0.0
    for s in itertools.product((0, 1), repeat=recon.ndim):
        if not any(s):
            continue
        pos = tuple(i - o for i, o in zip(index, s))
        if min(pos) >= 0:
            total += (-1) ** (sum(s) + 1) * recon[pos]
    return total


def test_constant_and_linear_prediction():
    c = np.full((4, 4, 4), 2.5)
    assert lorenzo_predict(c, (2, 3, 1)) == pytest.approx(2.5)
    x = np.indices((5, 5, 5))[0] * 0.7 + 1.0
    assert lorenzo_predict(x, (3, 2, 4)) == pytest.approx(x[3, 2, 4])


def test_prediction_matches_brute_force():
    f = np.random.default_rng(0).normal(size=(4, 4, 4))
    for idx in np.ndindex(4, 4, 4):
        assert lorenzo_predict(f, idx) == pytest.approx(brute_predict(f, idx), abs=1e-14)


def test_constant_field_roundtrip_exact():
    f = np.full((9, 9), 3.0)
    s = compress_lorenzo(f, 0.5)
    assert np.count_nonzero(s.labels) == 1  # only the first point carries the value
    assert np.array_equal(decompress_lorenzo(s), f)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("rel", [1e-1, 1e-3, 1e-6, 1e-12])
def test_error_bound(seed, rel):
    f = np.random.default_rng(seed).normal(size=(17, 17, 17))
    e = rel * np.ptp(f)
    out = decompress_lorenzo(compress_lorenzo(f, e))
    assert np.abs(out - f).max() <= e


@pytest.mark.parametrize("shape", [(4, 4, 4), (6, 7), (9,), (3, 2, 3, 2)])
def test_matches_sequential_loop(shape):
    f = np.random.default_rng(1).normal(size=shape)
    for e in (0.3, 1e-3):
        s = compress_lorenzo(f, e)
        labels, recon = lorenzo_sequential(f, e)
        full = s.labels.astype(np.int64)
        full[s.escape_positions] = s.escape_labels
        assert np.array_equal(full.reshape(shape), labels)
        np.testing.assert_allclose(decompress_lorenzo(s), recon, atol=1e-12)


def test_zero_label_dominates_on_smooth_data():
    x = np.indices((33, 33, 33)) / 32
    f = np.sin(2 * x[0] + x[1]) * np.cos(x[2] - x[0])
    s = compress_lorenzo(f, 1e-3 * np.ptp(f))
    vals, counts = np.unique(s.labels, return_counts=True)
    assert vals[np.argmax(counts)] == 0


def test_errors():
    with pytest.raises(InvalidBudgetError):
        compress_lorenzo(np.zeros(5), 0.0)
    with pytest.raises(NonFiniteDataError):
        compress_lorenzo(np.array([0.0, np.nan]), 1.0)
