"""Grid functions on the space-time cylinder and on its lateral boundary."""

from __future__ import annotations

import numpy as np

from .grid import Grid

__all__ = ["ScalarField", "BoundaryField", "Potential"]


class ScalarField:
    """Complex samples on every grid point of the closed cylinder.

    values has shape (nt, nx) in 1-d and (nt, nx, nx) in 2-d; time is axis 0.
    """

    def __init__(self, grid: Grid, values):
        values = np.asarray(values)
        if values.shape != grid.field_shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid {grid.field_shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=np.complex128)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "ScalarField":
        """Sample fn(x, t) (1-d) or fn(x, y, t) (2-d); arguments broadcast."""
        t = grid.ts.reshape((grid.nt,) + (1,) * grid.n)
        coords = grid.space_coordinates()
        if grid.n == 1:
            values = fn(coords[0][None, :], t) + np.zeros(grid.field_shape)
        else:
            values = fn(coords[0][None], coords[1][None], t) + np.zeros(grid.field_shape)
        return cls(grid, values)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.field_shape))

    def l2_norm(self) -> float:
        """Trapezoid L2 norm over the cylinder."""
        return float(np.sqrt(self.grid.integrate_volume(np.abs(self.values) ** 2).real))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def boundary_trace(self) -> "BoundaryField":
        vals = self.values[(slice(None),) + self.grid.boundary_index]
        return BoundaryField(self.grid, vals)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


class BoundaryField:
    """Complex samples on the lateral boundary cylinder, shape (nt, nb).

    Points follow the grid's single-counted boundary enumeration.
    """

    def __init__(self, grid: Grid, values):
        values = np.asarray(values)
        if values.shape != (grid.nt, grid.n_boundary):
            raise ValueError(
                f"boundary field shape {values.shape} does not match "
                f"({grid.nt}, {grid.n_boundary})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("boundary field contains non-finite values")
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=np.complex128)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "BoundaryField":
        """Sample fn(points, t) where points is the (nb, n) coordinate array."""
        vals = np.empty((grid.nt, grid.n_boundary), dtype=np.complex128)
        for k, t in enumerate(grid.ts):
            vals[k] = fn(grid.boundary_points, t)
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "BoundaryField":
        return cls(grid, np.zeros((grid.nt, grid.n_boundary)))

    @classmethod
    def constant(cls, grid: Grid, value) -> "BoundaryField":
        return cls(grid, np.full((grid.nt, grid.n_boundary), value, dtype=np.complex128))

    def l2_norm(self) -> float:
        return float(
            np.sqrt(self.grid.integrate_boundary(np.abs(self.values) ** 2).real)
        )

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def restricted(self, mask) -> "BoundaryField":
        """Zero outside the mask (mask is a DirectionMask or boolean vector)."""
        keep = getattr(mask, "values", mask)
        return BoundaryField(self.grid, self.values * keep[None, :])

    def copy(self) -> "BoundaryField":
        return BoundaryField(self.grid, self.values.copy())


class Potential:
    """Real bounded zero-order coefficient q(x, t) with certified bound m."""

    def __init__(self, grid: Grid, values, m: float | None = None):
        values = np.asarray(values)
        if values.shape != grid.field_shape:
            raise ValueError(
                f"potential shape {values.shape} does not match grid {grid.field_shape}"
            )
        if np.iscomplexobj(values):
            if np.abs(values.imag).max() > 0:
                raise ValueError("potential must be real-valued")
            values = values.real
        if not np.all(np.isfinite(values)):
            raise ValueError("potential contains non-finite values")
        sup = float(np.abs(values).max()) if values.size else 0.0
        if m is None:
            m = sup
        elif sup > m + 1e-12:
            raise ValueError(f"potential exceeds its stated bound: sup={sup} > m={m}")
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.m = float(m)

    @classmethod
    def zero(cls, grid: Grid) -> "Potential":
        return cls(grid, np.zeros(grid.field_shape), m=0.0)

    @classmethod
    def from_callable(cls, grid: Grid, fn, m: float | None = None) -> "Potential":
        t = grid.ts.reshape((grid.nt,) + (1,) * grid.n)
        coords = grid.space_coordinates()
        if grid.n == 1:
            values = fn(coords[0][None, :], t) + np.zeros(grid.field_shape)
        else:
            values = fn(coords[0][None], coords[1][None], t) + np.zeros(grid.field_shape)
        return cls(grid, values, m=m)

    def __sub__(self, other: "Potential") -> "Potential":
        return Potential(self.grid, self.values - other.values)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())
