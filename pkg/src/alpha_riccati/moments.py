"""Moments of the characteristic functions and the perturbation approximation.

Near ``alpha_n = 2**(1/n)`` the nonconstant solutions of
``v' + v = 2 v(alpha t) + v(alpha t)**2`` are, to first order in
``eps = alpha - alpha_n``,

    v(t) ~ C_n E(t; alpha_n) eps.

The scaling coefficient ``C_n`` follows from the moment relations of the
nonlinear equation. With ``w_{n-1} = 1`` and
``w_{j-1} = j alpha_n**(j+1) / (alpha_n**j - 2) w_j`` one has

    C_n = 2n mu_{n-1}(E_n) / (alpha_n sum_j w_j mu_j(E_n**2)),

where the moments are summed term by term from the series coefficients:

    mu_j(E)    = j! sum_k b_k / alpha**((j+1)k)
    mu_j(E**2) = j! sum_k sum_l b_k b_l / (alpha**k + alpha**l)**(j+1).

Both sums cancel heavily, so they are evaluated in extended precision.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Iterable

import mpmath as mp
import numpy as np

from .errors import DomainError, NumericalDegeneracyError
from .qseries import (
    PrecisionConfig,
    SeriesSolution,
    characteristic_alpha,
    characteristic_series,
    evaluate_E,
    evaluate_E_derivative,
)

__all__ = [
    "ScalingRecord",
    "moment_E",
    "moment_E2",
    "moment_by_quadrature",
    "weight_sequence",
    "scaling_coefficient",
    "scaling_table",
    "perturbation_guess",
    "perturbation_residual",
    "limiting_residual",
]

N_MAX = 6


@dataclass(frozen=True)
class ScalingRecord:
    """Everything computed on the way to ``C_n`` for one characteristic value."""

    n: int
    alpha_n: mp.mpf
    moments_E: tuple
    moments_E2: tuple
    weights: tuple
    C_n: mp.mpf
    scaled_norm: mp.mpf

    @property
    def series(self) -> SeriesSolution:
        return characteristic_series(self.n, _precision_for(self.n))


def _precision_for(n: int) -> PrecisionConfig:
    return PrecisionConfig(significand_bits=256 if n <= 4 else 512)


def moment_E(series: SeriesSolution, j: int) -> mp.mpf:
    """``j-th`` moment ``int t**j E(t) dt`` by term-wise integration."""
    if j < 0:
        raise DomainError("moment order must be non-negative")
    with mp.workprec(series.precision.significand_bits):
        p = j + 1
        return mp.factorial(j) * mp.fsum(
            b / r**p for b, r in zip(series.coefficients, series.rates)
        )


def moment_E2(series: SeriesSolution, j: int) -> mp.mpf:
    """``j-th`` moment of ``E**2``; both indices truncated at the series length."""
    if j < 0:
        raise DomainError("moment order must be non-negative")
    with mp.workprec(series.precision.significand_bits):
        p = j + 1
        b, r = series.coefficients, series.rates
        K = len(b)
        return mp.factorial(j) * mp.fsum(
            b[k] * b[l] / (r[k] + r[l]) ** p for k in range(K) for l in range(K)
        )


def moment_by_quadrature(
    series: SeriesSolution, j: int, squared: bool = False, upper: float = 200.0, bits: int = 96
) -> mp.mpf:
    """Same moments by adaptive quadrature of the summed series on ``[0, upper]``.

    Slow; meant as a cross-check of :func:`moment_E` and :func:`moment_E2`.
    """
    breaks = [0, 0.5, 1, 2, 4, 8, 16, 32, 64, 128, upper]
    breaks = [x for x in breaks if x < upper] + [upper]

    def integrand(t):
        e = evaluate_E(series, t)
        return t**j * (e * e if squared else e)

    with mp.workprec(bits):
        return mp.quad(integrand, breaks)


def weight_sequence(n: int, precision: PrecisionConfig | None = None) -> list:
    """Weights ``w_0 .. w_{n-1}`` generated backwards from ``w_{n-1} = 1``."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer (got {n})")
    precision = precision or _precision_for(n)
    a = characteristic_alpha(n, precision)
    with mp.workprec(precision.significand_bits):
        w = [mp.mpf(0)] * n
        w[n - 1] = mp.mpf(1)
        for j in range(n - 1, 0, -1):
            w[j - 1] = j * a ** (j + 1) / (a**j - 2) * w[j]
        return w


@functools.lru_cache(maxsize=None)
def scaling_coefficient(n: int, precision: PrecisionConfig | None = None) -> ScalingRecord:
    """Compute ``C_n`` and ``||C_n E_n||_2`` for ``1 <= n <= 6``.

    Raises:
        DomainError: ``n`` outside ``1..6``.
        NumericalDegeneracyError: the weighted moment sum is below 1e-30.
    """
    if int(n) != n or not 1 <= n <= N_MAX:
        raise DomainError(f"n must lie in 1..{N_MAX} (got {n})")
    precision = precision or _precision_for(n)
    series = characteristic_series(n, precision)
    a = series.alpha
    w = weight_sequence(n, precision)
    with mp.workprec(precision.significand_bits):
        mE = tuple(moment_E(series, j) for j in range(n))
        mE2 = tuple(moment_E2(series, j) for j in range(n))
        denom = a * mp.fsum(wj * m for wj, m in zip(w, mE2))
        if abs(denom) < mp.mpf("1e-30"):
            raise NumericalDegeneracyError(f"weighted moment sum vanishes for n={n}")
        C = 2 * n * mE[n - 1] / denom
        norm = abs(C) * mp.sqrt(mE2[0])
    return ScalingRecord(n, a, mE, mE2, tuple(w), C, norm)


def scaling_table(max_n: int = N_MAX) -> list[ScalingRecord]:
    return [scaling_coefficient(n) for n in range(1, max_n + 1)]


def perturbation_guess(n: int, epsilon: float, t_values: Iterable[float]) -> np.ndarray:
    """First-order approximation ``C_n E(t; alpha_n) eps`` at the given points."""
    if abs(epsilon) > 0.2:
        warnings.warn(
            f"|epsilon| = {abs(epsilon)} is outside the range where the "
            "first-order approximation is reliable",
            RuntimeWarning,
            stacklevel=2,
        )
    rec = scaling_coefficient(n)
    series = rec.series
    with mp.workprec(series.precision.significand_bits):
        scale = rec.C_n * mp.mpf(epsilon)
        return np.array([float(scale * evaluate_E(series, t)) for t in t_values], dtype=float)


def perturbation_residual(n: int, epsilon: float, t: float) -> float:
    """Defect of the first-order approximation divided by ``eps**2``.

    Evaluates ``[v' + v - 2 v(a t) - v(a t)**2] / eps**2`` with
    ``v = C_n E(.; alpha_n) eps`` and ``a = alpha_n + eps``.
    """
    if epsilon == 0:
        raise DomainError("epsilon = 0: use limiting_residual")
    if t < 0:
        raise DomainError("t must be non-negative")
    rec = scaling_coefficient(n)
    series = rec.series
    with mp.workprec(series.precision.significand_bits):
        eps = mp.mpf(epsilon)
        t = mp.mpf(t)
        c = rec.C_n * eps
        a = rec.alpha_n + eps
        v = c * evaluate_E(series, t)
        dv = c * evaluate_E_derivative(series, t)
        va = c * evaluate_E(series, a * t)
        return float((dv + v - 2 * va - va * va) / eps**2)


def limiting_residual(n: int, t: float) -> float:
    """``eps -> 0`` limit of :func:`perturbation_residual`.

    ``-2 C_n E'(alpha_n t) t - (C_n E(alpha_n t))**2``.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    rec = scaling_coefficient(n)
    series = rec.series
    with mp.workprec(series.precision.significand_bits):
        t = mp.mpf(t)
        s = rec.alpha_n * t
        e = rec.C_n * evaluate_E(series, s)
        return float(-2 * rec.C_n * evaluate_E_derivative(series, s) * t - e * e)
