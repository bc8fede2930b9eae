"""Multigrid decomposition and recomposition on the level-centric layout.

One decomposition step on level ``l``:

1. reorder the N_l block so N_{l-1} is its leading sub-block;
2. replace every coefficient node by its value minus the multilinear
   interpolant of the nodal values (the coefficient computation);
3. project the resulting multilevel component onto the coarse space: a load
   vector sweep followed by a tridiagonal mass-matrix solve along each axis
   (the correction computation);
4. add the correction to the nodal block.

Recomposition runs the same steps backwards. Both directions compute the
correction from the stored coefficient values, so they are exact inverses up
to rounding. Spacing is normalised to 1; it cancels between the mass matrix
and the load vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DegenerateLineError, DegenerateSystemError, InvalidLevelError, ShapeError
from .grid import GridHierarchy, build_hierarchy
from .reorder import (
    coefficient_index,
    inverse_reorder_level,
    level_offsets,
    level_order,
    level_slices,
    reorder_level,
)

# numpy per-call overhead dominates below ~1k lines per sweep step
DEFAULT_BATCH_SIZE = 1024

# mass matrix of coarse hat functions (coarse spacing 2, fine spacing 1)
MASS_OFF = 1.0 / 3.0
MASS_DIAG = 4.0 / 3.0
MASS_EDGE = 2.0 / 3.0
# last coarse node of an even-length axis also owns the trailing fine cell
MASS_TAIL = MASS_EDGE + 1.0

CoeffHook = Callable[[int, np.ndarray], np.ndarray]


def mass_matrix(m: int, even_tail: bool = False) -> np.ndarray:
    """Dense coarse mass matrix, mostly for tests and reference solves."""
    if m < 2:
        raise DegenerateSystemError(f"mass matrix needs m >= 2, got {m}")
    mat = np.diag(np.full(m, MASS_DIAG))
    mat[0, 0] = MASS_EDGE
    mat[-1, -1] = MASS_TAIL if even_tail else MASS_EDGE
    idx = np.arange(m - 1)
    mat[idx, idx + 1] = MASS_OFF
    mat[idx + 1, idx] = MASS_OFF
    return mat


@dataclass(frozen=True)
class ThomasFactors:
    """Forward-elimination multipliers and inverse pivots for one axis length."""

    m: int
    even_tail: bool
    lower: np.ndarray
    inv_diag: np.ndarray

    @classmethod
    def build(cls, m: int, even_tail: bool = False) -> "ThomasFactors":
        if m < 2:
            raise DegenerateSystemError(f"tridiagonal solve needs m >= 2, got {m}")
        diag = np.full(m, MASS_DIAG)
        diag[0] = MASS_EDGE
        diag[-1] = MASS_TAIL if even_tail else MASS_EDGE
        lower = np.zeros(m)
        piv = np.empty(m)
        piv[0] = diag[0]
        for i in range(1, m):
            lower[i] = MASS_OFF / piv[i - 1]
            piv[i] = diag[i] - lower[i] * MASS_OFF
        return cls(m, even_tail, lower, 1.0 / piv)


@dataclass
class SolverWorkspace:
    """Per-worker scratch state; never share one between threads.

    ``batch_size`` is the number of lines swept together by the load-vector
    and Thomas kernels; ``None`` or 0 sweeps all lines of an axis at once.
    Results do not depend on it.
    """

    batch_size: int | None = DEFAULT_BATCH_SIZE
    _factors: dict = dc_field(default_factory=dict, repr=False)

    def factors(self, n_fine: int) -> ThomasFactors:
        fac = self._factors.get(n_fine)
        if fac is None:
            fac = ThomasFactors.build((n_fine + 1) // 2, n_fine % 2 == 0)
            self._factors[n_fine] = fac
        return fac

    def prepare(self, h: GridHierarchy) -> "SolverWorkspace":
        """Precompute the factors of every axis length used by ``h``."""
        for level in range(1, h.num_levels + 1):
            for n in h.dims(level):
                self.factors(n)
        return self


# --- 1D kernels on lines laid out along axis 0, nodal entries first ---------


def _load_lines(x: np.ndarray) -> np.ndarray:
    """Load vector of every column of ``x`` (shape ``(n, lines)``, reordered)."""
    n = x.shape[0]
    m = (n + 1) // 2
    nodal = x[:m]
    coeff = x[m:]
    f = nodal * (5.0 / 6.0)
    f[0] = nodal[0] * (5.0 / 12.0)
    f[m - 1] = nodal[m - 1] * (5.0 / 12.0)
    f[1:] += nodal[:-1] * (1.0 / 12.0)
    f[:-1] += nodal[1:] * (1.0 / 12.0)
    half = coeff[: m - 1] * 0.5
    f[1:] += half
    f[:-1] += half
    if n % 2 == 0:
        f[m - 1] += (nodal[m - 1] + coeff[m - 1]) * 0.5
    return f


def _thomas_lines(f: np.ndarray, fac: ThomasFactors) -> np.ndarray:
    """Solve ``M z = f`` column-wise in place."""
    m = fac.m
    lower = fac.lower
    inv = fac.inv_diag
    for i in range(1, m):
        f[i] -= lower[i] * f[i - 1]
    f[m - 1] *= inv[m - 1]
    for i in range(m - 2, -1, -1):
        f[i] -= MASS_OFF * f[i + 1]
        f[i] *= inv[i]
    return f


def _natural_to_reordered(line: np.ndarray) -> np.ndarray:
    return np.concatenate((line[0::2], line[1::2]))


def load_vector_1d(line) -> np.ndarray:
    """Load vector of a line given in natural order (length ``2n+1`` or ``2n+2``).

    Interior entries weight ``c_{2i-2}, ..., c_{2i+2}`` by
    ``1/12, 1/2, 5/6, 1/2, 1/12``; end nodes use ``5/12`` for their own value.
    On an even-length line the last coarse node also integrates the trailing
    fine cell, on which the coarse function is constant.
    """
    line = np.asarray(line, dtype=np.float64)
    if line.ndim != 1 or line.size < 3:
        raise DegenerateLineError(f"load vector needs a line of length >= 3, got {line.shape}")
    return _load_lines(_natural_to_reordered(line)[:, None])[:, 0]


def solve_correction_1d(f, workspace: SolverWorkspace | None = None, *, even_tail: bool = False) -> np.ndarray:
    """Solve the coarse mass-matrix system for one load vector."""
    f = np.array(f, dtype=np.float64)
    m = f.size
    if m < 2:
        raise DegenerateSystemError(f"tridiagonal solve needs m >= 2, got {m}")
    n_fine = 2 * m if even_tail else 2 * m - 1
    fac = (workspace or SolverWorkspace()).factors(n_fine)
    return _thomas_lines(f[:, None], fac)[:, 0]


def _sweep(r: np.ndarray, axis: int, ws: SolverWorkspace) -> np.ndarray:
    """Load vector plus solve along one axis; that axis shrinks to coarse size."""
    n = r.shape[axis]
    fac = ws.factors(n)
    moved = np.moveaxis(r, axis, 0)
    rest = moved.shape[1:]
    x = np.ascontiguousarray(moved).reshape(n, -1)
    lines = x.shape[1]
    out = np.empty((fac.m, lines))
    step = ws.batch_size or lines
    for j in range(0, lines, step):
        out[:, j : j + step] = _thomas_lines(_load_lines(x[:, j : j + step]), fac)
    return np.moveaxis(out.reshape((fac.m,) + rest), 0, axis)


# --- multilinear interpolation on the reordered block -------------------------


def _axis_index(ndim: int, axis: int, sl) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def prolongate(coarse: np.ndarray, fine_shape) -> np.ndarray:
    """Multilinear interpolant of ``coarse`` on the reordered fine block.

    Along each axis the coefficient entry between nodal entries ``j`` and
    ``j+1`` gets their mean; a trailing coefficient entry of an even-length
    axis copies its single nodal neighbour.
    """
    out = np.asarray(coarse, dtype=np.float64)
    nd = out.ndim
    for axis, n in enumerate(fine_shape):
        m = out.shape[axis]
        shape = list(out.shape)
        shape[axis] = n
        grown = np.empty(shape)
        grown[_axis_index(nd, axis, slice(0, m))] = out
        left = out[_axis_index(nd, axis, slice(0, m - 1))]
        right = out[_axis_index(nd, axis, slice(1, m))]
        grown[_axis_index(nd, axis, slice(m, 2 * m - 1))] = (left + right) * 0.5
        if n % 2 == 0:
            grown[_axis_index(nd, axis, slice(n - 1, n))] = out[_axis_index(nd, axis, slice(m - 1, m))]
        out = grown
    return out


def _check_level(h: GridHierarchy, level: int) -> None:
    if not 1 <= level <= h.num_levels:
        raise InvalidLevelError(f"level {level} outside 1..{h.num_levels}")


def _coarse_slices(h: GridHierarchy, level: int) -> tuple[slice, ...]:
    return tuple(slice(0, m) for m in h.dims(level - 1))


def _residual(field: np.ndarray, h: GridHierarchy, level: int) -> np.ndarray:
    block = field[level_slices(h, level)]
    cs = _coarse_slices(h, level)
    r = block.astype(np.float64)
    r -= prolongate(block[cs], block.shape)
    r[cs] = 0.0
    return r


def _store_coefficients(field: np.ndarray, h: GridHierarchy, level: int, r: np.ndarray) -> None:
    block = field[level_slices(h, level)]
    cs = _coarse_slices(h, level)
    nodal = block[cs].copy()
    block[...] = r
    block[cs] = nodal


def compute_coefficients(field: np.ndarray, h: GridHierarchy, level: int) -> np.ndarray:
    """Replace coefficient nodes of the (reordered) N_level block by residuals."""
    _check_level(h, level)
    _store_coefficients(field, h, level, _residual(field, h, level))
    return field


def restore_coefficients(field: np.ndarray, h: GridHierarchy, level: int) -> np.ndarray:
    """Inverse of :func:`compute_coefficients`: add the interpolant back."""
    _check_level(h, level)
    block = field[level_slices(h, level)]
    cs = _coarse_slices(h, level)
    nodal = block[cs].copy()
    out = block.astype(np.float64)
    out += prolongate(nodal, block.shape)
    block[...] = out
    block[cs] = nodal
    return field


def compute_correction(
    field: np.ndarray, h: GridHierarchy, level: int, workspace: SolverWorkspace | None = None
) -> np.ndarray:
    """L2 projection of the level's multilevel component onto N_{level-1}.

    Reads the coefficient entries of the reordered N_level block (nodal
    entries count as zero) and returns a float64 array of coarse shape.
    """
    _check_level(h, level)
    ws = workspace or SolverWorkspace()
    r = field[level_slices(h, level)].astype(np.float64)
    r[_coarse_slices(h, level)] = 0.0
    for axis in range(r.ndim):
        r = _sweep(r, axis, ws)
    return r


def apply_correction(
    field: np.ndarray, correction: np.ndarray, sign: int, h: GridHierarchy, level: int
) -> np.ndarray:
    _check_level(h, level)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    cs = _coarse_slices(h, level)
    nodal = field[cs]
    if correction.shape != nodal.shape:
        raise ShapeError(f"correction shape {correction.shape} != coarse block {nodal.shape}")
    if sign > 0:
        nodal[...] = nodal + correction
    else:
        nodal[...] = nodal - correction
    return field


def decompose_level(
    field: np.ndarray,
    h: GridHierarchy,
    level: int,
    workspace: SolverWorkspace | None = None,
    coeff_hook: CoeffHook | None = None,
) -> np.ndarray:
    """One decomposition step, in place on a level-centric buffer.

    ``coeff_hook(level, values)`` may replace the level's coefficients (given
    in level-centric order) before the correction is computed from them;
    the compressor uses it to quantize inside the loop.
    """
    _check_level(h, level)
    ws = workspace or SolverWorkspace()
    reorder_level(field, h, level)
    r = _residual(field, h, level)
    if coeff_hook is not None:
        idx = _coefficient_index(h, level)
        flat = r.reshape(-1)
        flat[idx] = coeff_hook(level, flat[idx])
    _store_coefficients(field, h, level, r)
    apply_correction(field, compute_correction(field, h, level, ws), 1, h, level)
    return field


def recompose_level(
    field: np.ndarray, h: GridHierarchy, level: int, workspace: SolverWorkspace | None = None
) -> np.ndarray:
    _check_level(h, level)
    ws = workspace or SolverWorkspace()
    apply_correction(field, compute_correction(field, h, level, ws), -1, h, level)
    restore_coefficients(field, h, level)
    inverse_reorder_level(field, h, level)
    return field


@lru_cache(maxsize=64)
def _coefficient_index(h: GridHierarchy, level: int) -> np.ndarray:
    idx = coefficient_index(h, level)
    idx.flags.writeable = False
    return idx


@lru_cache(maxsize=16)
def _level_order(h: GridHierarchy, stop_level: int) -> np.ndarray:
    order = level_order(h, stop_level)
    order.flags.writeable = False
    return order


@dataclass
class MultilevelCoefficients:
    """Level-centric coefficient buffer.

    ``buffer`` holds the coarse representation on N_stop first (C order),
    followed by the coefficients of levels ``stop_level+1 .. L``.
    """

    buffer: np.ndarray
    hierarchy: GridHierarchy
    stop_level: int = 0

    def __post_init__(self):
        if self.buffer.ndim != 1 or self.buffer.size != self.hierarchy.total_count:
            raise ShapeError(
                f"buffer of size {self.buffer.size} does not match #N_L = {self.hierarchy.total_count}"
            )

    @property
    def offsets(self) -> list[int]:
        return level_offsets(self.hierarchy, self.stop_level)

    def coarse(self) -> np.ndarray:
        """Coarse representation reshaped to the N_stop grid."""
        n = self.hierarchy.count(self.stop_level)
        return self.buffer[:n].reshape(self.hierarchy.dims(self.stop_level))

    def level(self, level: int) -> np.ndarray:
        """Coefficients of N*_level (a view)."""
        if not self.stop_level < level <= self.hierarchy.num_levels:
            raise InvalidLevelError(f"level {level} holds no coefficients")
        off = self.offsets
        i = level - self.stop_level
        return self.buffer[off[i] : off[i + 1]]


def to_level_centric(field: np.ndarray, h: GridHierarchy, stop_level: int) -> np.ndarray:
    return field.reshape(-1)[_level_order(h, stop_level)]


def from_level_centric(buffer: np.ndarray, h: GridHierarchy, stop_level: int) -> np.ndarray:
    field = np.empty(h.shape, dtype=buffer.dtype)
    field.reshape(-1)[_level_order(h, stop_level)] = buffer
    return field


def decompose(
    field,
    hierarchy: GridHierarchy | None = None,
    stop_level: int = 0,
    workspace: SolverWorkspace | None = None,
) -> MultilevelCoefficients:
    """Decompose ``field`` down to N_stop; the input array is not modified."""
    field = np.asarray(field)
    if not np.issubdtype(field.dtype, np.floating):
        field = field.astype(np.float64)
    h = hierarchy or build_hierarchy(field.shape)
    if tuple(field.shape) != h.shape:
        raise ShapeError(f"field shape {field.shape} does not match hierarchy {h.shape}")
    if not 0 <= stop_level <= h.num_levels:
        raise InvalidLevelError(f"stop level {stop_level} outside 0..{h.num_levels}")
    ws = workspace or SolverWorkspace()
    buf = np.array(field, copy=True, order="C")
    for level in range(h.num_levels, stop_level, -1):
        decompose_level(buf, h, level, ws)
    return MultilevelCoefficients(to_level_centric(buf, h, stop_level), h, stop_level)


def recompose(
    coeffs: MultilevelCoefficients,
    workspace: SolverWorkspace | None = None,
    target_level: int | None = None,
) -> np.ndarray:
    """Rebuild the field on N_target (default: the finest grid)."""
    h = coeffs.hierarchy
    s = coeffs.stop_level
    target = h.num_levels if target_level is None else target_level
    if not s <= target <= h.num_levels:
        raise InvalidLevelError(f"target level {target} outside {s}..{h.num_levels}")
    ht = h.truncated(target)
    ws = workspace or SolverWorkspace()
    buf = from_level_centric(coeffs.buffer[: ht.total_count], ht, s)
    for level in range(s + 1, target + 1):
        recompose_level(buf, ht, level, ws)
    return buf
