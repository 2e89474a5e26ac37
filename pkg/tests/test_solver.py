import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpha_riccati import DomainError
from alpha_riccati import discretization as disc
from alpha_riccati.moments import perturbation_guess, scaling_coefficient
from alpha_riccati.qseries import characteristic_series, sample_E
from alpha_riccati.solver import (
    SolveResult,
    alpha_derivative,
    characteristic_error,
    characteristic_solve,
    classify,
    count_zeros,
    jacobian,
    moment_identity_defect,
    newton_solve,
    residual,
    solve_family_b,
)

# u = 1 plugged into the u-form system at N = 9, M = 1, alpha = 1.5,
# assembled with mpmath in tests/oracles.py
U_ONE_RESIDUAL = [0.0, -0.076589527113454287301, 0.088146559938267013075, 0.21225380243994828744]


def fd_jacobian(ops, v, h=1e-7):
    J = np.empty((len(v), len(v)))
    for k in range(len(v)):
        e = np.zeros(len(v))
        e[k] = h
        J[:, k] = (residual(ops, v + e) - residual(ops, v - e)) / (2 * h)
    return J


def test_zero_is_a_solution(grid):
    ops = disc.build_operators(grid, 1.7)
    assert np.all(residual(ops, np.zeros(grid.dof)) == 0)


def test_linear_guess_residual_is_second_order(grid):
    ops = disc.build_operators(grid, 2.0)
    e = float(scaling_coefficient(1).C_n) * sample_E(characteristic_series(1), grid.interior)
    r1 = np.max(np.abs(residual(ops, 1e-4 * e)))
    r2 = np.max(np.abs(residual(ops, 2e-4 * e)))
    assert r2 / r1 == pytest.approx(4, rel=0.05)


def test_family_b_residual_hand_case():
    g = disc.truncated_grid(9, 1)
    assert g.dof == 3
    ops = disc.build_operators(g, 1.5, disc.Mode.FAMILY_B)
    r = residual(ops, np.ones(4))
    assert np.allclose(r, U_ONE_RESIDUAL, rtol=1e-12, atol=1e-14)
    assert np.max(np.abs(r)) > 0.05


def test_residual_shape_checked(small_grid):
    ops = disc.build_operators(small_grid, 1.5)
    with pytest.raises(DomainError):
        residual(ops, np.zeros(small_grid.dof + 1))


def test_jacobian_at_zero(small_grid):
    ops = disc.build_operators(small_grid, 1.5)
    J = jacobian(ops, np.zeros(small_grid.dof))
    assert np.array_equal(J, ops.D + np.eye(small_grid.dof) - 2 * ops.P_alpha)


@pytest.mark.parametrize("mode", list(disc.Mode))
def test_jacobian_finite_difference_dof20(rng, mode):
    g = disc.truncated_grid(100, 2)
    assert g.dof == 20
    ops = disc.build_operators(g, 1.6, mode)
    v = rng.normal(size=ops.size) * np.exp(-0.5 * (g.nodes[1:] if ops.size == g.dof else g.nodes))
    J = jacobian(ops, v)
    Jfd = fd_jacobian(ops, v)
    assert np.max(np.abs(J - Jfd)) <= 1e-6 * np.max(np.abs(J))


def test_directional_derivative_second_order(rng, small_grid):
    ops = disc.build_operators(small_grid, 1.8)
    v = 0.3 * np.exp(-small_grid.interior) * np.sin(small_grid.interior)
    w = rng.normal(size=small_grid.dof) * np.exp(-0.5 * small_grid.interior)
    J = jacobian(ops, v)
    errs = []
    for h in (1e-2, 5e-3):
        errs.append(np.linalg.norm(residual(ops, v + h * w) - residual(ops, v) - h * J @ w))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


def test_alpha_derivative_finite_difference(small_grid):
    v = 0.2 * np.exp(-small_grid.interior) * small_grid.interior
    a, h = 1.6, 1e-5
    ops = disc.build_operators(small_grid, a, derivative=True)
    fd = (residual(ops.at(a + h), v) - residual(ops.at(a - h), v)) / (2 * h)
    assert np.max(np.abs(alpha_derivative(ops, v) - fd)) < 1e-6 * np.max(np.abs(fd))


def test_newton_from_exact_root(grid):
    r = newton_solve(disc.build_operators(grid, 2.0), np.zeros(grid.dof))
    assert r.converged and r.iterations == 0
    assert r.classification == "trivial"


def test_plus_solution_right_of_two(grid):
    ops = disc.build_operators(grid, 2.1)
    r = newton_solve(ops, perturbation_guess(1, 0.1, grid.interior))
    assert r.converged and r.classification == "plus"
    assert np.max(r.values) > 0
    # decays back to the constant state
    assert abs(disc.interpolate(grid, r.values, 30.0)) < 1e-8


def test_minus_solution_left_of_two(grid):
    ops = disc.build_operators(grid, 1.9)
    r = newton_solve(ops, perturbation_guess(1, -0.1, grid.interior))
    assert r.converged and r.classification == "minus"


def test_newton_reports_failure(grid):
    ops = disc.build_operators(grid, 1.9)
    r = newton_solve(ops, 50 * np.exp(-grid.interior) * grid.interior**4, max_iter=2)
    assert not r.converged and r.message
    assert r.classification is None


def test_newton_rejects_bad_tolerance(small_grid):
    with pytest.raises(DomainError):
        newton_solve(disc.build_operators(small_grid, 1.5), np.zeros(small_grid.dof), tol=0)


def test_characteristic_alpha_two(grid):
    assert characteristic_error(grid, 1) <= 1e-6


def test_characteristic_fifth(grid):
    assert characteristic_error(grid, 5) <= 1e-5


def test_characteristic_rejects_other_alpha(small_grid):
    with pytest.raises(DomainError):
        characteristic_solve(disc.build_operators(small_grid, 1.9))


def test_characteristic_normalised(grid):
    v = characteristic_solve(disc.build_operators(grid, 2 ** (1 / 3)))
    assert disc.quadrature_norm(grid, v) == pytest.approx(1.0, rel=1e-12)
    assert count_zeros(grid, v) == 2


@pytest.mark.parametrize("n, zeros", [(1, 0), (4, 3)])
def test_zero_count_and_sign_invariance(grid, n, zeros):
    v = characteristic_solve(disc.build_operators(grid, 2 ** (1 / n)))
    assert count_zeros(grid, v) == zeros
    assert count_zeros(grid, -v) == zeros


def test_classify_trivial(small_grid):
    assert classify(small_grid, np.zeros(small_grid.dof)) == "trivial"


def test_classify_flips_with_sign(grid):
    r = newton_solve(disc.build_operators(grid, 2.1), perturbation_guess(1, 0.1, grid.interior))
    assert classify(grid, r.values) == "plus"
    assert classify(grid, -r.values) == "minus"


def test_family_b(grid):
    ops = disc.build_operators(grid, 1.5, disc.Mode.FAMILY_B)
    r = solve_family_b(ops)
    assert r.converged and r.classification == "decaying"
    assert abs(r.values[0] - 1) <= 1e-12
    u = disc.interpolate(grid, r.values, [1.0, 5.0, 20.0])
    assert np.all(np.diff(u) < 0) and u[-1] < 1e-6


def test_family_b_off_grid_residual(grid):
    alpha = 3.0
    r = solve_family_b(disc.build_operators(grid, 1.5), alpha=alpha)
    assert r.converged and r.alpha == alpha
    ts = np.array([0.5, 1.0, 2.0])
    W, dW = disc.interpolation_matrix(grid, ts, derivative=True)
    Wa = disc.interpolation_matrix(grid, alpha * ts)
    res = dW @ r.values + W @ r.values - (Wa @ r.values) ** 2
    assert np.max(np.abs(res)) <= 1e-6


def test_family_b_rejects_alpha(small_grid):
    with pytest.raises(DomainError):
        solve_family_b(disc.build_operators(small_grid, 1.5), alpha=0.9)


def test_solve_result_roundtrip(grid):
    r = newton_solve(disc.build_operators(grid, 2.1), perturbation_guess(1, 0.1, grid.interior))
    back = SolveResult.from_dict(r.to_dict())
    assert np.array_equal(back.values, r.values)
    assert back.classification == r.classification
    assert '"alpha": 2.1' in r.to_json()


@settings(max_examples=8, deadline=None)
@given(st.floats(-0.1, 0.1).filter(lambda e: abs(e) > 1e-3))
def test_moment_identity_near_two(grid, eps):
    ops = disc.build_operators(grid, 2 + eps)
    r = newton_solve(ops, perturbation_guess(1, eps, grid.interior))
    assert r.converged
    assert moment_identity_defect(grid, r.values, 2 + eps) <= 1e-6


def test_moment_identity_flags_non_solutions(grid):
    v = np.exp(-grid.interior) * grid.interior
    assert moment_identity_defect(grid, v, 2.5) > 1e-2
