"""Second-order finite-difference stencils along one axis of a field array.

Interior points use central differences; the first and last layers use the
matching one-sided three/four point formulas so every stencil is second-order
accurate up to the boundary.
"""

from __future__ import annotations

import numpy as np

__all__ = ["diff1", "diff2"]


def _axslice(ndim, axis, sl):
    out = [slice(None)] * ndim
    out[axis] = sl
    return tuple(out)


def diff1(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """First derivative along `axis`; one-sided 3-point formulas at the ends."""
    if values.shape[axis] < 3:
        raise ValueError("need at least 3 points along the axis")
    out = np.empty_like(values)
    a = lambda sl: _axslice(values.ndim, axis, sl)
    out[a(slice(1, -1))] = (values[a(slice(2, None))] - values[a(slice(None, -2))]) / (
        2 * h
    )
    out[a(0)] = (
        -3 * values[a(0)] + 4 * values[a(1)] - values[a(2)]
    ) / (2 * h)
    out[a(-1)] = (
        3 * values[a(-1)] - 4 * values[a(-2)] + values[a(-3)]
    ) / (2 * h)
    return out


def diff2(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative along `axis`; one-sided 4-point formulas at the ends."""
    if values.shape[axis] < 4:
        raise ValueError("need at least 4 points along the axis")
    out = np.empty_like(values)
    a = lambda sl: _axslice(values.ndim, axis, sl)
    out[a(slice(1, -1))] = (
        values[a(slice(2, None))]
        - 2 * values[a(slice(1, -1))]
        + values[a(slice(None, -2))]
    ) / h**2
    out[a(0)] = (
        2 * values[a(0)] - 5 * values[a(1)] + 4 * values[a(2)] - values[a(3)]
    ) / h**2
    out[a(-1)] = (
        2 * values[a(-1)] - 5 * values[a(-2)] + 4 * values[a(-3)] - values[a(-4)]
    ) / h**2
    return out
