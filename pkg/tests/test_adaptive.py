import numpy as np
import pytest
from fields import smooth_field

from mgrx.adaptive import (
    REFERENCE_3D,
    choose_stop,
    estimate_block_errors,
    estimate_penalty_factors,
    penalty_model,
    sample_starts,
)
from mgrx.lorenzo import lorenzo_predict


def brute_block(block, e, model):
    """Per-node scalar evaluation of both scores on one 4^d block."""
    d = block.ndim
    lor = interp = 0.0
    for local in np.ndindex(*(3,) * d):
        k = sum(1 for i in local if i == 1)
        if k == 0:
            continue
        idx = tuple(i + 1 for i in local)
        # prediction from the block itself, so the halo supplies the lower neighbours
        lor += abs(block[idx] - lorenzo_predict(block, idx)) + model.lorenzo_penalty * e
        corners = [c for c in np.ndindex(*(2,) * d)
                   if all(ci * 2 == li or li == 1 for ci, li in zip(c, local))]
        pred = np.mean([block[tuple(1 + 2 * ci for ci in c)] for c in corners])
        interp += abs(block[idx] - pred) + model.interp_penalties[k - 1] * e
    return lor, interp


def test_constant_block_3d():
    lor, interp = estimate_block_errors(np.full((4, 4, 4), 5.0), 1.0, REFERENCE_3D)
    assert lor == pytest.approx(19 * 1.22)
    assert interp == pytest.approx(12 * 0.518 + 6 * 0.366 + 0.259)


@pytest.mark.parametrize("ndim", [2, 3])
def test_block_matches_brute_force(ndim):
    rng = np.random.default_rng(ndim)
    model = REFERENCE_3D if ndim == 3 else penalty_model(2)
    for _ in range(5):
        block = rng.normal(size=(4,) * ndim)
        got = estimate_block_errors(block, 0.3, model)
        assert got == pytest.approx(brute_block(block, 0.3, model), rel=1e-12)


def test_bad_block_shape():
    with pytest.raises(ValueError):
        estimate_block_errors(np.zeros((3, 3, 3)), 1.0)


def test_trilinear_data_prefers_interpolation_at_zero_penalty():
    x = np.indices((17, 17, 17)).astype(float)
    field = x[0] * x[1] * x[2] / 100
    d = choose_stop(field, 0.0, REFERENCE_3D)
    assert not d.stop and d.interp_error == pytest.approx(0, abs=1e-9)


def test_smooth_field_loose_bound_continues():
    x = np.indices((33, 33, 33)) / 32
    field = np.sin(2 * x[0] + x[1]) * np.cos(3 * x[2] - x[0]) * np.exp(x[1] * x[2])
    assert not choose_stop(field, 1e-2 * np.ptp(field), REFERENCE_3D).stop


def test_rough_separable_field_tight_bound_stops():
    # sums of 1D noise are exact for Lorenzo but rough for interpolation
    rng = np.random.default_rng(0)
    field = rng.normal(size=(33, 1, 1)) + rng.normal(size=(1, 33, 1)) + rng.normal(size=(1, 1, 33))
    d = choose_stop(field, 1e-4, REFERENCE_3D)
    assert d.stop and d.lorenzo_error < d.interp_error


def test_too_small_level_stops():
    assert choose_stop(np.zeros((4, 9, 9)), 1.0).stop
    assert sample_starts(4).size == 0 and sample_starts(5).tolist() == [1]
    assert sample_starts(33).tolist() == [1, 9, 17, 25]


def test_sampled_decision_agrees_with_full_scan():
    agree = 0
    for seed in range(20):
        f = smooth_field(seed)
        e = 1e-3 * np.ptp(f)
        agree += choose_stop(f, e, REFERENCE_3D).stop == choose_stop(f, e, REFERENCE_3D, stride=1).stop
    assert agree >= 18


def test_bit_estimate_mode_is_deterministic():
    f = smooth_field(1)
    kw = dict(width=0.01, coarse_bound=0.02, next_bound=0.01)
    a = choose_stop(f, 0.005, REFERENCE_3D, **kw)
    assert a == choose_stop(f, 0.005, REFERENCE_3D, **kw)
    assert a.lorenzo_bits > 0 and a.multigrid_bits > 0


def test_penalty_simulation_small():
    m = estimate_penalty_factors(200_000, seed=1)
    assert m.lorenzo_penalty == pytest.approx(1.22, abs=0.02)
    assert m.cube_penalty == pytest.approx(0.259, rel=0.05)
    zero = estimate_penalty_factors(100_000, e=0.0)
    assert zero.lorenzo_penalty == 0 and zero.interp_penalties == (0.0, 0.0, 0.0)
    assert estimate_penalty_factors(100_000, seed=3) == estimate_penalty_factors(100_000, seed=3)


def test_penalty_model_selection():
    assert penalty_model(3) is REFERENCE_3D
    m2 = penalty_model(2, 4.0)
    assert m2.ndim == 2 and len(m2.interp_penalties) == 2
    assert penalty_model(3, 1.0, levelwise=False).kappa == 1.0
