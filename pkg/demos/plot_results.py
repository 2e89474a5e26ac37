"""Render the data files written by the ``alpha-riccati`` CLI.

    python demos/plot_results.py results/ [--save figs/]

Draws whatever it finds among ``atlas_branches.csv``, ``verify_linear.csv``,
``solve_dense.csv`` and ``residual_check.csv``. Not part of the toolkit.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def atlas(ax, path):
    _, rows = read(path)
    lines = defaultdict(list)
    for bid, _, _, n, q, _ in rows:
        lines[bid].append((float(n), float(q)))
    for bid, pts in lines.items():
        x, y = np.array(pts).T
        ax.plot(x, y, lw=1, label=f"branch {bid}")
    ax.set(xlabel="n", ylabel="||v||^2", title="bifurcation diagram")
    ax.legend()


def verify(ax, path):
    _, rows = read(path)
    by_alpha = defaultdict(list)
    for a, n, N, _, err in rows:
        by_alpha[n].append((int(N), float(err)))
    for n, pts in by_alpha.items():
        x, y = np.array(sorted(pts)).T
        ax.semilogy(x, y, "o-", label=f"n = {n}")
    ax.set(xlabel="N", ylabel="max grid error", title="linear convergence")
    ax.legend()


def curves(ax, path, title):
    head, rows = read(path)
    data = np.array(rows, dtype=float)
    for k, name in enumerate(head[1:], 1):
        ax.plot(data[:, 0], data[:, k], lw=1, label=name)
    ax.set(xlabel="t", title=title)
    ax.legend()


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("directory")
    p.add_argument("--save", metavar="DIR")
    args = p.parse_args()
    d = Path(args.directory)
    jobs = [
        ("atlas_branches.csv", atlas),
        ("verify_linear.csv", verify),
        ("solve_dense.csv", lambda ax, f: curves(ax, f, "solution")),
        ("residual_check.csv", lambda ax, f: curves(ax, f, "first-order residual")),
    ]
    found = [(name, fn) for name, fn in jobs if (d / name).exists()]
    if not found:
        raise SystemExit(f"no CLI output files in {d}")
    for name, fn in found:
        fig, ax = plt.subplots(figsize=(7, 4))
        fn(ax, d / name)
        fig.tight_layout()
        if args.save:
            Path(args.save).mkdir(parents=True, exist_ok=True)
            fig.savefig(Path(args.save) / name.replace(".csv", ".png"), dpi=120)
    if not args.save:
        plt.show()


if __name__ == "__main__":
    main()
