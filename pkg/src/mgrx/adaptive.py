"""When to stop multigrid decomposition and hand the rest to the Lorenzo codec.

Both predictors are scored on original data over sampled ``3^d`` blocks,
each coefficient node charged its residual plus a penalty for predicting from
error-bounded rather than exact neighbours. The penalties are expected
absolute prediction shifts under the reconstruction error model and come
from Monte-Carlo simulation; 3D level-wise runs use fixed reference constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# variance (in units of e^2) of the nodal error a level's correction picks up
CORRECTION_NOISE_VAR = 0.8
SAMPLE_STRIDE = 4


@dataclass(frozen=True)
class PenaltyModel:
    """Penalties in units of the level error bound ``e``.

    ``interp_penalties[k - 1]`` applies to coefficient nodes interpolated
    along ``k`` axes (edge, plane and cube nodes in 3D).
    """

    ndim: int
    lorenzo_penalty: float
    interp_penalties: tuple[float, ...]
    correction_noise_var: float = CORRECTION_NOISE_VAR
    kappa: float = 8.0

    @property
    def edge_penalty(self) -> float:
        return self.interp_penalties[0]

    @property
    def plane_penalty(self) -> float:
        return self.interp_penalties[1]

    @property
    def cube_penalty(self) -> float:
        return self.interp_penalties[2]


REFERENCE_3D = PenaltyModel(3, 1.22, (0.518, 0.366, 0.259))


def estimate_penalty_factors(
    trials: int = 10**6,
    seed: int = 0,
    ndim: int = 3,
    kappa: float | None = None,
    correction_var: float = CORRECTION_NOISE_VAR,
    e: float = 1.0,
    chunk: int = 200_000,
) -> PenaltyModel:
    """Monte-Carlo estimate of E|prediction shift| for both predictors.

    Coefficient-node errors are U(-e, e). Nodal errors are U(-e/kappa, e/kappa)
    plus a Gaussian correction error of variance ``correction_var * e**2``.
    """
    if kappa is None:
        kappa = float(2**ndim)
    rng = np.random.default_rng(seed)
    signs = np.array(
        [(-1.0) ** (sum(s) + 1) for s in product((0, 1), repeat=ndim) if any(s)]
    )
    lor_sum = 0.0
    interp_sum = np.zeros(ndim)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        lor = rng.uniform(-e, e, (n, signs.size)) @ signs
        lor_sum += np.abs(lor).sum()
        nodal = rng.uniform(-e / kappa, e / kappa, (n, 2**ndim))
        nodal += rng.normal(0.0, np.sqrt(correction_var) * e, (n, 2**ndim))
        for k in range(1, ndim + 1):
            interp_sum[k - 1] += np.abs(nodal[:, : 2**k].mean(axis=1)).sum()
        done += n
    scale = 1.0 / (trials * e) if e > 0 else 0.0
    return PenaltyModel(
        ndim,
        float(lor_sum * scale),
        tuple(float(v * scale) for v in interp_sum),
        correction_var,
        kappa,
    )


@lru_cache(maxsize=32)
def _simulated(ndim: int, kappa: float, seed: int) -> PenaltyModel:
    return estimate_penalty_factors(200_000, seed=seed, ndim=ndim, kappa=kappa)


def penalty_model(ndim: int, kappa: float | None = None, levelwise: bool = True, seed: int = 0) -> PenaltyModel:
    """Reference constants for 3D level-wise plans, a cached simulation otherwise."""
    if ndim == 3 and levelwise:
        return REFERENCE_3D
    if kappa is None:
        kappa = float(2**ndim)
    return _simulated(ndim, round(max(kappa, 1e-3), 2), seed)


def _block_categories(ndim: int) -> np.ndarray:
    """Number of odd local coordinates of each node of a ``3^d`` block."""
    odd = [np.array([0, 1, 0])] * ndim
    grids = np.meshgrid(*odd, indexing="ij")
    return sum(grids)


def _prolong_corners(core: np.ndarray) -> np.ndarray:
    """Multilinear interpolant of the ``2^d`` corners over each ``3^d`` block."""
    out = core[(slice(None),) + (slice(None, None, 2),) * (core.ndim - 1)]
    for axis in range(1, core.ndim):
        lo = np.take(out, [0], axis=axis)
        hi = np.take(out, [1], axis=axis)
        out = np.concatenate((lo, (lo + hi) * 0.5, hi), axis=axis)
    return out


def _node_errors(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Absolute Lorenzo and interpolation residuals on each block's coefficient nodes.

    Index 0 along every axis of a ``4^d`` block is a halo feeding the Lorenzo
    stencil; indices 1..3 form the scored ``3^d`` block. Also returns the
    interpolation category (axes interpolated along) of each coefficient node.
    """
    nd = blocks.ndim - 1
    cat = _block_categories(nd).reshape(-1)
    coeff = cat > 0
    lor = blocks
    for axis in range(1, nd + 1):
        lor = np.diff(lor, axis=axis)
    core = blocks[(slice(None),) + (slice(1, None),) * nd]
    interp = core - _prolong_corners(core)
    flat = lambda a: np.abs(a.reshape(a.shape[0], -1)[:, coeff])
    return flat(lor), flat(interp), cat[coeff]


def block_errors(blocks: np.ndarray, e: float, model: PenaltyModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-block sums of residual plus penalty for a stack of ``4^d`` blocks."""
    lor, interp, cat = _node_errors(blocks)
    penalties = np.concatenate(([0.0], model.interp_penalties))[cat]
    lor_err = lor.sum(axis=1) + cat.size * model.lorenzo_penalty * e
    int_err = interp.sum(axis=1) + penalties.sum() * e
    return lor_err, int_err


def estimate_block_errors(block, e: float, model: PenaltyModel | None = None) -> tuple[float, float]:
    """Scores ``(lorenzo_error, interp_error)`` of one ``4^d`` block (with halo)."""
    block = np.asarray(block, dtype=np.float64)
    if any(n != 4 for n in block.shape):
        raise ValueError(f"expected a 4^d block (3^d plus low halo), got {block.shape}")
    model = model or penalty_model(block.ndim)
    lor, interp = block_errors(block[None], e, model)
    return float(lor[0]), float(interp[0])


def _with_noise(residual: np.ndarray, penalty) -> np.ndarray:
    # neighbour noise is independent of the residual, so magnitudes add in quadrature
    return np.hypot(residual, penalty)


def bits_per_value(errors: np.ndarray, width: float) -> float:
    """Entropy of a quantized Laplacian with the sample's mean error, in bits.

    A prefix code spends at least one bit per symbol, hence the floor.
    """
    m = float(np.mean(errors)) / width
    return max(1.0, float(np.log2(1.0 + 2.0 * np.e * m)))


@dataclass(frozen=True)
class StopDecision:
    """Sampled evidence behind one stop/continue choice.

    Error sums are in data units; bit counts are whole-level estimates for
    coding N_l with Lorenzo versus coding the level's coefficients and then
    N_(l-1) with Lorenzo.
    """

    stop: bool
    lorenzo_error: float
    interp_error: float
    blocks: int
    lorenzo_bits: float = 0.0
    multigrid_bits: float = 0.0


def sample_starts(n: int, stride: int = SAMPLE_STRIDE) -> np.ndarray:
    """Low-halo start indices of sampled blocks along an axis of length ``n``.

    Block ``j`` spans level indices ``2j .. 2j+2``; blocks whose halo or far
    edge leave the grid are skipped.
    """
    j = np.arange(1, (n - 3) // 2 + 1, stride)
    return 2 * j - 1


def sample_blocks(grid: np.ndarray, stride: int = SAMPLE_STRIDE) -> np.ndarray | None:
    starts = [sample_starts(n, stride) for n in grid.shape]
    if any(s.size == 0 for s in starts):
        return None
    windows = sliding_window_view(grid, (4,) * grid.ndim)
    return windows[np.ix_(*starts)].reshape((-1,) + (4,) * grid.ndim)


def _lorenzo_bits(grid: np.ndarray, bound: float, model: PenaltyModel, stride: int) -> float:
    blocks = sample_blocks(grid, stride)
    if blocks is None:
        return grid.size * max(1.0, float(np.log2(1.0 + np.ptp(grid) / (2.0 * bound))))
    lor, _, _ = _node_errors(blocks)
    return grid.size * bits_per_value(_with_noise(lor, model.lorenzo_penalty * bound), 2.0 * bound)


def choose_stop(
    grid,
    e: float,
    model: PenaltyModel | None = None,
    stride: int = SAMPLE_STRIDE,
    *,
    width: float | None = None,
    coarse_bound: float | None = None,
    next_bound: float | None = None,
) -> StopDecision:
    """Score the level grid ``grid`` (natural order) and pick a predictor.

    ``e`` is the level's error bound. Without the keyword arguments the
    choice compares penalised error sums directly. With them it compares
    estimated bits: Lorenzo on this grid at ``coarse_bound`` against this
    level's coefficients at bin ``width`` plus Lorenzo on the next coarser
    grid at ``next_bound``. Grids too small to hold a sampled block stop.
    """
    grid = np.asarray(grid, dtype=np.float64)
    model = model or penalty_model(grid.ndim)
    blocks = sample_blocks(grid, stride)
    if blocks is None:
        return StopDecision(True, 0.0, 0.0, 0)
    lor_sum, int_sum = (float(v.sum()) for v in block_errors(blocks, e, model))
    if width is None:
        return StopDecision(lor_sum < int_sum, lor_sum, int_sum, blocks.shape[0])
    lor, interp, cat = _node_errors(blocks)
    penalties = np.concatenate(([0.0], model.interp_penalties))[cat]
    coarse = tuple(slice(None, None, 2) for _ in grid.shape)
    n_coarse = grid[coarse].size
    lor_bits = grid.size * bits_per_value(_with_noise(lor, model.lorenzo_penalty * coarse_bound), 2.0 * coarse_bound)
    mg_bits = (grid.size - n_coarse) * bits_per_value(_with_noise(interp, penalties * e), width)
    mg_bits += _lorenzo_bits(grid[coarse], next_bound, model, stride)
    return StopDecision(lor_bits <= mg_bits, lor_sum, int_sum, blocks.shape[0], lor_bits, mg_bits)
