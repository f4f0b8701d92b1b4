"""Weighted energy inequalities, checked numerically over a sample family.

For a family of admissible samples (vanishing on the lateral boundary and
on the starting slice) the script tabulates two ratios against rho:

  poincare   rho ||v|| / ||(d_t - 2 rho omega.grad) v||      should stay <= 2
  carleman   weighted lhs / weighted rhs                     should stay bounded

Ratios that refuse to grow with rho are the whole point: they are what
makes the reconstruction's parameter choice work at finite scale.

Run:  python3 demos/carleman_sweep.py
"""

import numpy as np

from cgolab import Potential, build_grid
from cgolab.carleman import carleman_report, poincare_ratio, sample_family

RHOS = [4.0, 8.0, 16.0, 32.0]
SAMPLES = 20
SEED = 3


def main() -> None:
    grid = build_grid(1, 65, 129, 1.0)
    xs = grid.space_coordinates()[0]
    qv = 0.5 * np.sin(np.pi * xs)[None, :] * np.cos(np.pi * grid.ts)[:, None]
    q = Potential(grid, np.broadcast_to(qv, grid.field_shape).copy(), m=0.5)

    print("poincare ratios (worst over the family)")
    print(f"{'rho':>6} {'eps=+1':>10} {'eps=-1':>10}")
    for rho in RHOS:
        worst = {}
        for eps in (1, -1):
            family = sample_family(grid, SAMPLES, seed=SEED, epsilon=eps)
            omega = np.array([float(eps)])
            worst[eps] = max(poincare_ratio(b, omega, rho, epsilon=eps)
                             for b in family)
        print(f"{rho:>6.0f} {worst[1]:>10.4f} {worst[-1]:>10.4f}")

    print("\ncarleman lhs/rhs ratios (worst over the family, eps=+1)")
    print(f"{'rho':>6} {'q = 0':>10} {'q bounded':>12}")
    rows = {}
    for label, pot in (("zero", None), ("bounded", q)):
        family = sample_family(grid, SAMPLES, seed=SEED, epsilon=1)
        rep = carleman_report(grid, pot, np.array([1.0]), RHOS, family, epsilon=1)
        by_rho = {}
        for row in rep.rows:
            by_rho.setdefault(row["rho"], []).append(row["ratio"])
        rows[label] = {r: max(v) for r, v in by_rho.items()}
    for rho in RHOS:
        print(f"{rho:>6.0f} {rows['zero'][rho]:>10.4f} {rows['bounded'][rho]:>12.4f}")

    base = rows["bounded"][RHOS[0]]
    tail = max(rows["bounded"][r] for r in RHOS[1:])
    print(f"\ngrowth over rho: {tail / base:.3f}  (uniform if ~1 or below)")


if __name__ == "__main__":
    main()
