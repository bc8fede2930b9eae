"""Naive strided multigrid decomposition.

Works in the natural layout through strided views, builds each load vector in
two passes (fine mass matrix, then restriction to the coarse hats) and runs a
freshly factored Thomas solve line by line. It is the baseline for the
performance guard and an independent oracle for :mod:`mgrx.transform`.
"""

from __future__ import annotations

import numpy as np

from .grid import GridHierarchy, build_hierarchy
from .reorder import level_order, reorder_level


def fine_mass_apply(alpha: np.ndarray) -> np.ndarray:
    """Product with the fine-grid (spacing 1) linear-element mass matrix."""
    out = alpha * (2.0 / 3.0)
    out[0] = alpha[0] / 3.0
    out[-1] = alpha[-1] / 3.0
    out[1:] += alpha[:-1] / 6.0
    out[:-1] += alpha[1:] / 6.0
    return out


def restrict(v: np.ndarray) -> np.ndarray:
    """Transfer fine-hat inner products to coarse hats."""
    n = v.size
    m = (n + 1) // 2
    out = v[0::2].copy()
    out[: m - 1] += 0.5 * v[1 : 2 * m - 1 : 2]
    out[1:m] += 0.5 * v[1 : 2 * m - 1 : 2]
    if n % 2 == 0:
        # coarse function is constant on the trailing fine cell
        out[m - 1] += v[n - 1]
    return out


def load_vector_two_pass(line) -> np.ndarray:
    line = np.asarray(line, dtype=np.float64)
    return restrict(fine_mass_apply(line))


def thomas_solve(f, even_tail: bool = False) -> list[float]:
    n = len(f)
    a = [4.0 / 3.0] * n
    a[0] = 2.0 / 3.0
    a[-1] = 5.0 / 3.0 if even_tail else 2.0 / 3.0
    b = 1.0 / 3.0
    d = [0.0] * n
    y = [0.0] * n
    d[0] = a[0]
    y[0] = float(f[0])
    for i in range(1, n):
        w = b / d[i - 1]
        d[i] = a[i] - w * b
        y[i] = float(f[i]) - w * y[i - 1]
    z = [0.0] * n
    z[-1] = y[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        z[i] = (y[i] - b * z[i + 1]) / d[i]
    return z


def prolongate_natural(coarse: np.ndarray, fine_shape) -> np.ndarray:
    out = np.asarray(coarse, dtype=np.float64)
    for axis, n in enumerate(fine_shape):
        src = np.moveaxis(out, axis, 0)
        m = src.shape[0]
        grown = np.empty((n,) + src.shape[1:])
        grown[0::2] = src
        grown[1 : 2 * m - 1 : 2] = 0.5 * (src[:-1] + src[1:])
        if n % 2 == 0:
            grown[n - 1] = src[m - 1]
        out = np.moveaxis(grown, 0, axis)
    return out


def _correction(r: np.ndarray) -> np.ndarray:
    for axis in range(r.ndim):
        src = np.moveaxis(r, axis, -1)
        n = src.shape[-1]
        m = (n + 1) // 2
        out = np.empty(src.shape[:-1] + (m,))
        for idx in np.ndindex(*src.shape[:-1]):
            out[idx] = thomas_solve(load_vector_two_pass(src[idx]), n % 2 == 0)
        r = np.moveaxis(out, -1, axis)
    return r


def decompose_naive(field, hierarchy: GridHierarchy | None = None, stop_level: int = 0) -> np.ndarray:
    """Decompose in place of a copy; coefficients stay at their grid positions."""
    u = np.array(field, dtype=np.float64, copy=True)
    h = hierarchy or build_hierarchy(u.shape)
    for level in range(h.num_levels, stop_level, -1):
        stride = 2 ** (h.num_levels - level)
        view = u[(slice(None, None, stride),) * u.ndim]
        nodal_sl = (slice(None, None, 2),) * u.ndim
        nodal = view[nodal_sl].copy()
        r = view - prolongate_natural(nodal, view.shape)
        r[nodal_sl] = 0.0
        view[...] = r
        view[nodal_sl] = nodal + _correction(r)
    return u


def natural_positions(h: GridHierarchy, stop_level: int = 0) -> np.ndarray:
    """Natural flat index held at each position of the level-centric buffer."""
    idx = np.arange(h.total_count).reshape(h.shape)
    for level in range(h.num_levels, stop_level, -1):
        reorder_level(idx, h, level)
    return idx.reshape(-1)[level_order(h, stop_level)]
