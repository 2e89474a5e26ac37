"""Newton refinement of first-order guesses, and the decaying family.

Run with ``python demos/02_newton_near_two.py``.
"""

import warnings

import numpy as np

from alpha_riccati import (
    build_operators,
    characteristic_solve,
    count_zeros,
    newton_solve,
    perturbation_guess,
    solve_family_b,
    truncated_grid,
)
from alpha_riccati import discretization as disc
from alpha_riccati.solver import characteristic_error, moment_identity_defect

grid = truncated_grid(700, 6)
print(f"grid: N={grid.N}, M={grid.M}, {grid.dof} unknowns, t_max={grid.t_max:.3f}")

# %% Spectral accuracy on the linear problem at alpha = 2
# coarse grids separate the nullspace poorly and warn about it
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    for N in (50, 100, 200, 400, 700):
        print(f"N={N:4d}: max error {characteristic_error(truncated_grid(N, 6, clip=True), 1):.2e}")

v = characteristic_solve(build_operators(grid, 2 ** (1 / 3)))
print("zeros of the n = 3 grid solution:", count_zeros(grid, v))

# %% Nonconstant solutions on both sides of alpha = 2
for eps in (-0.1, -0.01, 0.01, 0.1):
    alpha = 2 + eps
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        guess = perturbation_guess(1, eps, grid.interior)
    r = newton_solve(build_operators(grid, alpha), guess)
    gap = disc.quadrature_norm(grid, r.values - guess)
    print(f"alpha={alpha:.2f}: {r.classification:5s} after {r.iterations} steps, "
          f"||v - guess|| = {gap:.3e}, moment defect {moment_identity_defect(grid, r.values, alpha):.1e}")

# %% The solution with u(0) = 1 that decays to zero
for alpha in (1.5, 2.0, 3.0):
    r = solve_family_b(build_operators(grid, alpha, disc.Mode.FAMILY_B))
    u = disc.interpolate(grid, r.values, np.array([0.0, 1.0, 2.0, 5.0]))
    print(f"alpha={alpha}: u(0, 1, 2, 5) = {np.array2string(u, precision=6)}")
