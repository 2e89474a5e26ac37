"""Continuation of the n = 1 and n = 2 branches across alpha in [1.3, 4.2].

Run with ``python demos/03_bifurcation_atlas.py``; pass ``--plot`` to draw the
diagram (needs matplotlib).
"""

import math
import sys

from alpha_riccati import atlas, solutions_at, truncated_grid
from alpha_riccati import discretization as disc

grid = truncated_grid(700, 6)
at = atlas([1, 2], epsilon_seed=0.01, alpha_window=(1.3, 4.2), grid=grid)

# %% Branches and folds
for b in at.branches:
    print(f"branch seeded at n={b.seed['n']}, eps={b.seed['epsilon']:+g}: "
          f"{len(b.points)} points, {b.status}")
for i, a in at.folds:
    print(f"fold on branch {i}: alpha = {a:.8f}, n = {math.log(2) / math.log(a):.6f}")

# %% Counting solutions at fixed alpha
for alpha in (1.404, 1.424, 1.43, 1.46, 2.0, 4.0):
    sols = solutions_at(at, alpha)
    desc = ", ".join(f"{r.classification} ({disc.quadrature_norm(grid, r.values):.3f})" for r in sols)
    print(f"alpha = {alpha}: {desc}")

# %% Diagram: squared norm against n
if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for b in at.branches:
        ns = [p.n for p in b.points]
        ax.plot(ns, b.norms_sq, "-", lw=1, label=f"seed n = {b.seed['n']}")
    for _, a in at.folds:
        ax.axvline(math.log(2) / math.log(a), color="0.6", ls=":")
    ax.set_xlabel("n = log 2 / log alpha")
    ax.set_ylabel("||v||^2")
    ax.legend()
    plt.tight_layout()
    plt.show()
