import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alpha_riccati import continuation as cont  # noqa: E402
from alpha_riccati import discretization as disc  # noqa: E402
from alpha_riccati.moments import perturbation_guess  # noqa: E402
from alpha_riccati.solver import newton_solve  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    """Default grid: N = 700, M = 6 (159 unknowns)."""
    return disc.truncated_grid(700, 6)


@pytest.fixture(scope="session")
def small_grid():
    return disc.truncated_grid(100, 4)


def _solve(grid, n, eps):
    alpha = 2 ** (1 / n) + eps
    ops = disc.build_operators(grid, alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        guess = perturbation_guess(n, eps, grid.interior)
    return newton_solve(ops, guess), guess


@pytest.fixture(scope="session")
def perturbation_runs(grid):
    """Newton runs from the first-order guess, keyed by ``(n, eps)``."""
    runs = {}
    for n in (1, 2, 3):
        for eps in (0.02, 0.01, 0.005, -0.005, -0.01, -0.02):
            runs[(n, eps)] = _solve(grid, n, eps)
    return runs


@pytest.fixture(scope="session")
def atlas12(grid):
    """Atlas of the n = 1 and n = 2 branches on alpha in [1.3, 4.2]."""
    return cont.atlas([1, 2], 0.01, (1.3, 4.2), grid=grid)


@pytest.fixture(scope="session")
def family_a_solutions(grid, perturbation_runs, atlas12):
    """Every converged family-(A) state produced by the shared fixtures."""
    out = []
    for (n, eps), (r, _) in sorted(perturbation_runs.items()):
        if r.converged:
            out.append((f"newton n={n} eps={eps:+g}", r.alpha, r.values))
    for b, branch in enumerate(atlas12.branches):
        for k, p in enumerate(branch.points):
            out.append((f"branch {b} point {k}", p.alpha, p.values))
    for a in (1.43, 1.46, 2.0, 4.0):
        for k, r in enumerate(cont.solutions_at(atlas12, a)):
            out.append((f"snapshot alpha={a} #{k}", r.alpha, r.values))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA: dict = {}


@pytest.fixture
def report(capsys):
    """Record and print a one-line verdict for an acceptance criterion."""

    def _report(k: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _CRITERIA[k] = line
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])
