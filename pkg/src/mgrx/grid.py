"""Nested grid hierarchy N_L > N_{L-1} > ... > N_0.

Level ``L`` is the input grid. Each coarser level keeps the even-index nodes
of the previous one along every axis, so an axis of length ``n`` coarsens to
``ceil(n / 2)``. Grid spacing is taken as 1 at every level.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

from .errors import DepthExceededError, InvalidDimsError, InvalidLevelError

Dims = tuple[int, ...]


def coarsen(dims: Dims) -> Dims:
    return tuple((n + 1) // 2 for n in dims)


def max_depth(dims: Dims) -> int:
    """Number of coarsenings possible before some axis would drop below 2."""
    depth = 0
    cur = tuple(dims)
    while all(n >= 3 for n in cur):
        cur = coarsen(cur)
        depth += 1
    return depth


@dataclass(frozen=True)
class GridHierarchy:
    dims_per_level: tuple[Dims, ...]
    num_levels: int
    delta_counts: tuple[int, ...]
    total_count: int

    @property
    def ndim(self) -> int:
        return len(self.dims_per_level[0])

    @property
    def shape(self) -> Dims:
        return self.dims_per_level[0]

    def _check(self, level: int) -> None:
        if not 0 <= level <= self.num_levels:
            raise InvalidLevelError(
                f"level {level} outside 0..{self.num_levels}"
            )

    def dims(self, level: int) -> Dims:
        """Grid shape of N_level."""
        self._check(level)
        return self.dims_per_level[self.num_levels - level]

    def count(self, level: int) -> int:
        """#N_level, with #N_{-1} = 0."""
        if level == -1:
            return 0
        return prod(self.dims(level))

    def delta_count(self, level: int) -> int:
        return delta_count(self, level)

    def truncated(self, level: int) -> "GridHierarchy":
        """The sub-hierarchy whose finest grid is N_level."""
        self._check(level)
        return build_hierarchy(self.dims(level), level)


def build_hierarchy(dims, levels: int | None = None) -> GridHierarchy:
    dims = tuple(int(n) for n in dims)
    if len(dims) < 1:
        raise InvalidDimsError("at least one dimension is required")
    if any(n < 2 for n in dims):
        raise InvalidDimsError(f"every dimension must be >= 2, got {dims}")
    feasible = max_depth(dims)
    if levels is None:
        levels = feasible
    elif levels < 0:
        raise InvalidLevelError(f"negative level count {levels}")
    elif levels > feasible:
        raise DepthExceededError(
            f"{levels} levels requested but dims {dims} allow at most {feasible}"
        )
    per_level = [dims]
    for _ in range(levels):
        per_level.append(coarsen(per_level[-1]))
    counts = [prod(d) for d in reversed(per_level)]  # coarsest first
    deltas = tuple(c - p for c, p in zip(counts, [0] + counts[:-1]))
    return GridHierarchy(tuple(per_level), levels, deltas, counts[-1])


def delta_count(h: GridHierarchy, level: int) -> int:
    """#N*_level = #N_level - #N_{level-1}."""
    if level == -1:
        return 0
    h._check(level)
    return h.delta_counts[level]
