"""Convergence of the three solvers on manufactured solutions.

Each solver gets an exact solution built from a separated mode, so the
errors below are pure discretization error.  Halving the step should cut
them by four; the fitted slopes say whether it does.

Run:  python3 demos/forward_orders.py
"""

import numpy as np

from cgolab import BoundaryField, Potential, ScalarField, build_grid
from cgolab.forward import solve_backward, solve_forward
from cgolab.semilinear import Nonlinearity, semilinear_solution

RESOLUTIONS = [17, 33, 65, 129]


def forward_error(nx: int) -> float:
    grid = build_grid(1, nx, nx, 1.0)
    xs = grid.space_coordinates()[0]
    q = Potential(grid, np.full(grid.field_shape, 0.3), m=0.3)
    exact = np.exp(-grid.ts)[:, None] * np.cos(3 * xs)[None, :]
    bdata = BoundaryField.from_callable(
        grid, lambda p, t: np.exp(-t) * np.cos(3 * p[:, 0]))
    u = solve_forward(grid, q, bdata, u0=np.cos(3 * xs),
                      source=ScalarField(grid, 8.3 * exact))
    return float(np.abs(u.values - exact).max())


def backward_error(nx: int) -> float:
    grid = build_grid(1, nx, nx, 1.0)
    xs = grid.space_coordinates()[0]
    q = Potential(grid, np.full(grid.field_shape, 0.3), m=0.3)
    exact = np.exp(grid.ts)[:, None] * np.cos(3 * xs)[None, :]
    bdata = BoundaryField.from_callable(
        grid, lambda p, t: np.exp(t) * np.cos(3 * p[:, 0]))
    v = solve_backward(grid, q, bdata, uT=np.exp(grid.T) * np.cos(3 * xs),
                       source=ScalarField(grid, 8.3 * exact))
    return float(np.abs(v.values - exact).max())


def semilinear_error(nx: int) -> float:
    grid = build_grid(1, nx, nx, 1.0)
    xs = grid.space_coordinates()[0]
    lam = 1.0 + np.pi**2
    exact = np.exp(-lam * grid.ts)[:, None] * np.sin(np.pi * xs)[None, :]
    a = Nonlinearity(lambda x, t, u: u, lambda x, t, u: np.ones_like(u),
                     monotone=True)
    zero = BoundaryField.from_callable(grid, lambda p, t: np.zeros(p.shape[0]))
    u = semilinear_solution(grid, a, zero, u0=np.sin(np.pi * xs))
    return float(np.abs(u.values - exact).max())


def main() -> None:
    solvers = [("forward", forward_error), ("backward", backward_error),
               ("semilinear", semilinear_error)]
    hs = [1.0 / (nx - 1) for nx in RESOLUTIONS]
    print(f"{'nx':>5}  " + "".join(f"{name:>12}" for name, _ in solvers))
    table = {name: [fn(nx) for nx in RESOLUTIONS] for name, fn in solvers}
    for i, nx in enumerate(RESOLUTIONS):
        row = "".join(f"{table[name][i]:>12.3e}" for name, _ in solvers)
        print(f"{nx:>5}  {row}")
    for name, _ in solvers:
        slope = np.polyfit(np.log(hs), np.log(table[name]), 1)[0]
        print(f"{name}: fitted order {slope:.3f}")


if __name__ == "__main__":
    main()
