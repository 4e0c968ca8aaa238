"""Grid-sampled scalar and vector fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        X, Y = grid.coords()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (n+1, n+1, 2)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape + (2,):
            raise ValueError("vector field must have shape grid.shape + (2,)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "VectorField":
        X, Y = grid.coords()
        fx, fy = fn(X, Y)
        vals = np.stack([np.broadcast_to(fx, grid.shape), np.broadcast_to(fy, grid.shape)], axis=-1)
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros(grid.shape + (2,)))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.values[..., 0], self.values[..., 1])
