import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_laguerre

import oracles
from alpha_riccati import ConfigurationError, DomainError
from alpha_riccati import discretization as disc
from alpha_riccati.moments import scaling_coefficient
from alpha_riccati.qseries import characteristic_series, evaluate_E, sample_E
from alpha_riccati.solver import characteristic_solve

# 159th root of L_700, from mpmath root-finding (tests/oracles.py)
L700_ROOT_159 = 89.7284880257042633959156496921


def test_rule_n1():
    x, w = disc.gauss_laguerre(1)
    assert x[0] == pytest.approx(1.0, abs=1e-15)
    assert w[0] == pytest.approx(1.0, abs=1e-15)


def test_rule_n2():
    x, _ = disc.gauss_laguerre(2)
    assert np.allclose(x, [2 - math.sqrt(2), 2 + math.sqrt(2)], rtol=1e-15)


@pytest.mark.parametrize("N", [5, 37, 100])
def test_rule_matches_scipy(N):
    x, w = disc.gauss_laguerre(N)
    xs, ws = roots_laguerre(N)
    assert np.allclose(x, xs, rtol=1e-12)
    assert np.allclose(w, ws, rtol=1e-9, atol=1e-300)


def test_rule_700_weights_sum():
    _, w = disc.gauss_laguerre(700)
    assert abs(w.sum() - 1) < 1e-13


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 300), st.integers(0, 12))
def test_rule_exact_on_monomials(N, k):
    k = min(k, 2 * N - 1)
    x, w = disc.gauss_laguerre(N)
    assert np.sum(w * x**k) == pytest.approx(math.factorial(k), rel=1e-11)


def test_rule_bounds():
    with pytest.raises(DomainError):
        disc.gauss_laguerre(0)


def test_grid_sizes(grid):
    assert grid.dof == 159
    assert disc.truncated_grid(100, 1).dof == 10
    assert grid.nodes[0] == 0
    assert np.all(np.diff(grid.nodes) > 0)


def test_grid_last_node(grid):
    assert grid.t_max == pytest.approx(L700_ROOT_159, rel=1e-13)


def test_grid_overflow_is_config_error():
    with pytest.raises(ConfigurationError):
        disc.truncated_grid(25, 6)
    assert disc.truncated_grid(25, 6, clip=True).dof == 25
    with pytest.raises(ConfigurationError):
        disc.truncated_grid(100, 0)


def test_D_on_exponential():
    # the t = 0 row carries entries of size ~N, so rounding grows with N
    g = disc.truncated_grid(64, 4)
    D = disc.differentiation_matrix(g)
    f = np.exp(-g.nodes)
    assert np.max(np.abs(D @ f + f)) < 1e-12


def test_D_on_t_exponential():
    g = disc.truncated_grid(100, 4)
    D = disc.differentiation_matrix(g)
    t = g.nodes
    assert np.max(np.abs(D @ (t * np.exp(-t)) - (1 - t) * np.exp(-t))) < 1e-11


def test_D_annihilates_weighted_constants():
    # without truncation the polynomial part of D has zero row sums, i.e.
    # D maps the weight to -decay times the weight
    g = disc.truncated_grid(30, 6, clip=True)
    assert g.dof == g.N
    D = disc.differentiation_matrix(g)
    w = np.exp(-disc.DECAY * g.nodes)
    assert np.max(np.abs(D @ w + disc.DECAY * w)) < 1e-12


def test_P_identity(grid):
    P = disc.resampling_matrix(grid, 1.0)
    assert np.max(np.abs(P - np.eye(len(grid.nodes)))) < 1e-13


def test_P_exponential_alpha_two(small_grid):
    t = small_grid.nodes
    P = disc.resampling_matrix(small_grid, 2.0)
    assert np.max(np.abs(P @ np.exp(-t) - np.exp(-2 * t))) < 1e-12


def test_P_cubic_sqrt2(small_grid):
    t = small_grid.nodes
    a = math.sqrt(2)
    P = disc.resampling_matrix(small_grid, a)
    f = np.exp(-t) * t**3
    want = np.exp(-a * t) * (a * t) ** 3
    assert np.max(np.abs(P @ f - want)) < 1e-10 * np.max(np.abs(want))


def test_dP_matches_finite_difference(small_grid):
    a, h = 1.7, 1e-5
    _, dP = disc.resampling_matrix(small_grid, a, derivative=True)
    fd = (disc.resampling_matrix(small_grid, a + h) - disc.resampling_matrix(small_grid, a - h)) / (2 * h)
    assert np.max(np.abs(dP - fd)) < 1e-6 * np.max(np.abs(dP))


def test_dP_on_exponential(grid):
    # d/dalpha exp(-alpha t) = -t exp(-alpha t)
    t = grid.nodes
    _, dP = disc.resampling_matrix(grid, 1.3, derivative=True)
    assert np.max(np.abs(dP @ np.exp(-t) + t * np.exp(-1.3 * t))) < 1e-9


def test_matrices_match_hand_oracle():
    g = disc.truncated_grid(9, 1)
    D = disc.differentiation_matrix(g)
    P = disc.resampling_matrix(g, 1.5)
    import mpmath as mp

    x = [mp.mpf(v) for v in g.full_nodes]
    for i in range(4):
        prow = oracles.weighted_lagrange(x, 4, 1.5 * x[i])
        assert np.allclose(P[i], [float(c) for c in prow], rtol=1e-12, atol=1e-14)
        drow = [mp.diff(lambda y, j=j: oracles.weighted_lagrange(x, 4, y)[j], x[i]) for j in range(4)]
        assert np.allclose(D[i], [float(c) for c in drow], rtol=1e-10, atol=1e-12)


def test_norm_of_exponential(grid):
    assert disc.quadrature_norm(grid, np.exp(-grid.interior)) == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    assert disc.quadrature_norm(grid, np.zeros(grid.dof)) == 0


def test_norm_of_scaled_characteristic(grid):
    rec = scaling_coefficient(1)
    v = float(rec.C_n) * sample_E(characteristic_series(1), grid.interior)
    assert disc.quadrature_norm(grid, v) == pytest.approx(1.811978234, rel=1e-9)


def test_interpolate_at_node(grid):
    v = np.sin(grid.interior) * np.exp(-grid.interior)
    assert disc.interpolate(grid, v, grid.interior[7]) == v[7]


def test_interpolate_exponential(grid):
    assert disc.interpolate(grid, np.exp(-grid.nodes), 0.3) == pytest.approx(math.exp(-0.3), abs=1e-12)


def test_interpolate_characteristic_off_grid(grid):
    ops = disc.build_operators(grid, 2.0)
    v = characteristic_solve(ops)
    e = sample_E(characteristic_series(1), grid.interior)
    scale = disc.quadrature_norm(grid, e)
    ref = float(evaluate_E(characteristic_series(1), 5.0)) / scale
    assert disc.interpolate(grid, v, 5.0) == pytest.approx(ref, abs=1e-7)


def test_interpolate_warns_far_out(small_grid):
    with pytest.warns(RuntimeWarning):
        disc.interpolate(small_grid, np.zeros(small_grid.dof), 1.5 * small_grid.t_max)


def test_interpolate_rejects_negative(small_grid):
    with pytest.raises(DomainError):
        disc.interpolate(small_grid, np.zeros(small_grid.dof), -1.0)


def test_operator_blocks(small_grid):
    a = disc.build_operators(small_grid, 1.5)
    b = disc.build_operators(small_grid, 1.5, disc.Mode.FAMILY_B)
    assert a.D.shape == (small_grid.dof, small_grid.dof)
    assert b.D.shape == (small_grid.dof + 1, small_grid.dof + 1)
    assert np.array_equal(a.D, b.D[1:, 1:])
    with pytest.raises(AttributeError):
        a.dP_alpha
    assert a.at(2.0).alpha == 2.0


def test_dump_csv(tmp_path, small_grid):
    ops = disc.build_operators(small_grid, 1.5)
    paths = disc.dump_operators_csv(ops, tmp_path)
    assert {p.name for p in paths} == {"grid.csv", "D.csv", "P_alpha.csv"}
    assert np.allclose(np.loadtxt(tmp_path / "D.csv", delimiter=","), ops.D_full, rtol=1e-15)
