import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from alpha_riccati import DomainError
from alpha_riccati.moments import (
    limiting_residual,
    moment_by_quadrature,
    moment_E,
    moment_E2,
    perturbation_guess,
    perturbation_residual,
    scaling_coefficient,
    weight_sequence,
)
from alpha_riccati.qseries import build_series, characteristic_series

# reference values of (C_n, ||C_n E_n||_2)
TABLE = {
    1: (11.369115199592, 1.81197823422642),
    2: (-809.366572149393, 9.26693515926297),
    3: (31551.1556685585, 29.5829803331573),
    4: (-1099159.13650433, 85.4609652569168),
    5: (34825078.4777884, 224.473429010346),
    6: (-1045480822.24227, 557.278822837151),
}

# frozen from tests/oracles.py
MU0_E1 = 0.2887880950866024
MU0_E1_SQ = 0.025401105540470408
W3 = ("20.7941171752909210942664162221", "-9.6946442037261452790378324931", "1.0")
E_SQRT2 = {
    0.5: -0.000179789099016026341731424858195,
    1.0: -0.00471275370492567141098868563829,
    2.0: -0.00775732302102470877702860317705,
    5.0: 0.00306785506957600583704315983854,
}


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_scaling_table(n):
    rec = scaling_coefficient(n)
    C, norm = TABLE[n]
    assert float(rec.C_n) == pytest.approx(C, rel=1e-12)
    assert float(rec.scaled_norm) == pytest.approx(norm, rel=1e-12)


def test_scaling_first_value_closed_form():
    # n = 1 has a single weight, so C_1 = mu_0(E) / mu_0(E**2)
    rec = scaling_coefficient(1)
    with mp.workprec(256):
        assert float(rec.moments_E[0] / rec.moments_E2[0]) == pytest.approx(11.36911520, rel=1e-9)


@pytest.mark.parametrize("n", [2, 3])
def test_lower_moments_vanish(n):
    s = characteristic_series(n)
    for j in range(n - 1):
        assert abs(moment_E(s, j)) < mp.mpf(10) ** -30


def test_moments_against_quadrature_oracle():
    s = characteristic_series(1)
    assert float(moment_E(s, 0)) == pytest.approx(MU0_E1, abs=1e-12)
    assert float(moment_E2(s, 0)) == pytest.approx(MU0_E1_SQ, abs=1e-12)


def test_moment_quadrature_helper_matches_sums():
    s = characteristic_series(1)
    assert float(moment_by_quadrature(s, 1)) == pytest.approx(float(moment_E(s, 1)), abs=1e-12)
    assert float(moment_by_quadrature(s, 0, squared=True)) == pytest.approx(MU0_E1_SQ, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(1.5, 4.0), st.integers(0, 3))
def test_moment_E2_symmetric(alpha, j):
    # summing over (l, k) instead of (k, l) gives the same value
    s = build_series(alpha)
    b, r = s.coefficients, s.rates
    with mp.workprec(256):
        K = len(b)
        swapped = mp.factorial(j) * mp.fsum(
            b[l] * b[k] / (r[l] + r[k]) ** (j + 1) for l in range(K) for k in range(K)
        )
        assert abs(swapped - moment_E2(s, j)) <= mp.mpf(10) ** -60 * (1 + abs(swapped))


def test_negative_moment_order():
    with pytest.raises(DomainError):
        moment_E(characteristic_series(1), -1)


def test_weights():
    assert weight_sequence(1) == [1]
    w2 = weight_sequence(2)
    assert float(w2[0]) == pytest.approx(-(2 + math.sqrt(2)), rel=1e-15)
    assert w2[1] == 1
    w3 = weight_sequence(3)
    with mp.workprec(256):
        for got, ref in zip(w3, W3):
            assert abs(got - mp.mpf(ref)) < mp.mpf(10) ** -25


def test_weights_match_substitution_oracle():
    with mp.workdps(60):
        for n in (4, 5, 6):
            ref = oracles.weights_by_substitution(n)
            for got, want in zip(weight_sequence(n), ref):
                assert abs(got - want) < mp.mpf(10) ** -40 * (1 + abs(want))


@pytest.mark.parametrize("n", [0, 7])
def test_scaling_domain(n):
    with pytest.raises(DomainError):
        scaling_coefficient(n)


def test_guess_vanishes_at_origin():
    assert abs(perturbation_guess(1, 0.1, [0.0])[0]) < 1e-30


def test_guess_minus_side_dips():
    t = np.linspace(0.01, 3, 300)
    g = perturbation_guess(1, -0.1, t)
    first = g[np.argmax(np.abs(g) > 1e-6 * np.abs(g).max())]
    assert first < 0


def test_guess_matches_product_oracle():
    C2 = TABLE[2][0]
    ts = sorted(E_SQRT2)
    got = perturbation_guess(2, 0.01, ts)
    want = np.array([C2 * E_SQRT2[t] * 0.01 for t in ts])
    assert np.allclose(got, want, rtol=1e-12, atol=0)


def test_guess_warns_for_large_epsilon():
    with pytest.warns(RuntimeWarning):
        perturbation_guess(1, 0.3, [1.0])


def test_residual_first_order_convergence():
    r0 = limiting_residual(1, 1.0)
    d3 = abs(perturbation_residual(1, 1e-3, 1.0) - r0)
    d4 = abs(perturbation_residual(1, 1e-4, 1.0) - r0)
    assert d3 < 1e-3 * 100 * max(1, abs(r0))
    assert 5 < d3 / d4 < 20


def test_limit_matches_richardson_extrapolation():
    eps = 1e-3
    extrap = 2 * perturbation_residual(2, eps / 2, 1.0) - perturbation_residual(2, eps, 1.0)
    assert extrap == pytest.approx(limiting_residual(2, 1.0), rel=1e-5)


@pytest.mark.parametrize("eps", [1e-2, -3e-3, 1e-4])
def test_residual_zero_at_origin(eps):
    assert abs(perturbation_residual(2, eps, 0.0)) < 1e-20


def test_limit_zero_at_origin():
    assert abs(limiting_residual(1, 0.0)) < 1e-20


def test_residual_rejects_zero_epsilon():
    with pytest.raises(DomainError):
        perturbation_residual(1, 0.0, 1.0)


def test_residual_bounded_n3():
    ts = np.linspace(0, 40, 161)
    vals = np.array([perturbation_residual(3, 1e-4, t) for t in ts])
    assert np.all(np.isfinite(vals))
    assert np.max(np.abs(vals)) < 1e4
    # decays back towards zero at the end of the window
    assert abs(vals[-1]) < 1e-3 * np.max(np.abs(vals))
