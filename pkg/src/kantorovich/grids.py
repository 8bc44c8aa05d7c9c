"""Evaluation grids and sampled surfaces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid given per axis as ``(lo, hi, points)``; axis 0 is ``x``."""

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(points)) for lo, hi, points in self.axes)
        if not axes:
            raise ValueError("a grid needs at least one axis")
        for lo, hi, points in axes:
            if not lo < hi:
                raise ValueError(f"grid axis needs lo < hi, got [{lo}, {hi}]")
            if points < 2:
                raise ValueError(f"grid axis needs at least 2 points, got {points}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def square(cls, lo: float, hi: float, points: int, dims: int = 2) -> "GridSpec":
        return cls(((lo, hi, points),) * dims)

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(points for _, _, points in self.axes)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, points) for lo, hi, points in self.axes)

    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (points - 1) for lo, hi, points in self.axes)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coordinates(), indexing="ij"))

    def padded(self, margin: float) -> "GridSpec":
        """Same resolution per unit length, extended by ``margin`` on every side."""
        axes = []
        for lo, hi, points in self.axes:
            h = (hi - lo) / (points - 1)
            extra = int(np.ceil(margin / h))
            axes.append((lo - extra * h, hi + extra * h, points + 2 * extra))
        return GridSpec(tuple(axes))


def as_axes(grid) -> tuple[np.ndarray, ...]:
    """Coordinate arrays for a :class:`GridSpec` or a sequence of 1-D arrays.

    Arrays already in ``np.longdouble`` keep that precision; everything else
    becomes float64.
    """
    if isinstance(grid, GridSpec):
        return grid.coordinates()
    out = []
    for c in grid:
        c = np.atleast_1d(np.asarray(c))
        out.append(c.astype(np.result_type(c.dtype, np.float64), copy=False))
    return tuple(out)


@dataclass
class Surface:
    """Values sampled on the tensor product of ``axes`` (``values[i0, i1, ...]``)."""

    axes: tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise GridMismatchError(
                f"values shape {self.values.shape} does not match axes "
                f"{tuple(len(a) for a in self.axes)}")

    @classmethod
    def sample(cls, fn, grid) -> "Surface":
        """Evaluate ``fn(*mesh)`` on a grid."""
        axes = as_axes(grid)
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(axes, np.broadcast_to(fn(*mesh), mesh[0].shape))

    def same_grid(self, other: "Surface") -> bool:
        return (len(self.axes) == len(other.axes)
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes)))

    def __sub__(self, other: "Surface") -> "Surface":
        if not self.same_grid(other):
            raise GridMismatchError("surfaces live on different grids")
        return Surface(self.axes, self.values - other.values)

    def column_names(self) -> list[str]:
        d = len(self.axes) - 1
        names = ["x"] + (["y"] if d == 1 else [f"y{i}" for i in range(1, d + 1)])
        return names + ["value"]

    def rows(self) -> Sequence[tuple[float, ...]]:
        """One row per node, row-major with the first axis varying slowest."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        return list(zip(*(c.tolist() for c in cols)))
