"""Exact series machinery for the linear dilation equation.

The linearisation of ``u' + u = u(alpha t)**2`` about ``u = 1`` is

    u'(t) + u(t) = 2 u(alpha t),

which for ``alpha > 1`` has the exponential series solution

    E(t; alpha) = sum_k b_k exp(-alpha**k t),
    b_0 = 1,  b_k = 2**k / ((1 - alpha)(1 - alpha**2)...(1 - alpha**k)).

``E(0; alpha) = 1 + sum b_k`` vanishes exactly at ``alpha = 2**(1/n)``; this is
checked against the Euler product ``prod (1 - 2 alpha**-k)``.

The coefficients alternate in sign and grow transiently before decaying, so
everything here runs in mpmath at a configurable binary precision.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import mpmath as mp
import numpy as np

from .errors import DomainError

__all__ = [
    "PrecisionConfig",
    "SeriesSolution",
    "default_precision",
    "characteristic_alpha",
    "build_series",
    "characteristic_series",
    "evaluate_E",
    "evaluate_E_derivative",
    "sample_E",
    "sample_E_derivative",
    "lemma1_sum",
    "euler_product",
    "characteristic_zeros",
]


@dataclass(frozen=True)
class PrecisionConfig:
    """Working precision and truncation controls for series evaluation.

    Attributes:
        significand_bits: mpmath binary precision (at least 64).
        term_tolerance: relative cutoff used when truncating series.
        max_terms: hard cap on the number of retained terms.
    """

    significand_bits: int = 256
    term_tolerance: float = 1e-40
    max_terms: int = 1000

    def __post_init__(self):
        if int(self.significand_bits) < 64:
            raise DomainError("significand_bits must be >= 64")
        if not 0 < self.term_tolerance < 1:
            raise DomainError("term_tolerance must lie in (0, 1)")
        if int(self.max_terms) < 1:
            raise DomainError("max_terms must be >= 1")


def default_precision(alpha) -> PrecisionConfig:
    """256 bits down to ``alpha_4``, 512 bits closer to 1."""
    a = float(alpha)
    if a > 1 and math.log(2) / math.log(a) > 4.5:
        return PrecisionConfig(significand_bits=512)
    return PrecisionConfig(significand_bits=256)


@dataclass(frozen=True)
class SeriesSolution:
    """Truncated coefficient list of ``E(t; alpha)``.

    ``rates[k]`` holds ``alpha**k`` and ``peak`` the largest partial-sum
    magnitude met while summing the coefficients; ``peak * term_tolerance``
    is the noise floor of any value computed from the series.
    """

    alpha: mp.mpf
    coefficients: tuple
    precision: PrecisionConfig
    rates: tuple = field(repr=False)
    peak: mp.mpf = field(repr=False)

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    @property
    def noise_floor(self) -> float:
        return float(10 * self.precision.term_tolerance * self.peak)


def _check_alpha(alpha):
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1 (got {alpha})")


def characteristic_alpha(n: int, precision: PrecisionConfig | None = None) -> mp.mpf:
    """Return ``alpha_n = 2**(1/n)`` at working precision."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer (got {n})")
    bits = (precision or PrecisionConfig()).significand_bits
    with mp.workprec(bits):
        return mp.mpf(2) ** (mp.mpf(1) / int(n))


def build_series(alpha, precision: PrecisionConfig | None = None) -> SeriesSolution:
    """Compute the coefficients ``b_k`` of ``E(t; alpha)``.

    Terms are kept until ``|b_k|`` drops below ``term_tolerance`` times the
    running maximum of the partial sums (so the cutoff is measured against the
    transient peak), or ``max_terms`` is reached.
    """
    precision = precision or default_precision(alpha)
    with mp.workprec(precision.significand_bits):
        a = mp.mpf(alpha)
        _check_alpha(a)
        tol = mp.mpf(precision.term_tolerance)
        b = [mp.mpf(1)]
        rates = [mp.mpf(1)]
        partial = mp.mpf(1)
        peak = mp.mpf(1)
        rate = mp.mpf(1)
        for _ in range(1, precision.max_terms):
            rate *= a
            bk = b[-1] * 2 / (1 - rate)
            if abs(bk) < tol * peak:
                break
            b.append(bk)
            rates.append(rate)
            partial += bk
            peak = max(peak, abs(partial))
        else:
            warnings.warn(
                f"series for alpha={mp.nstr(a, 8)} hit max_terms={precision.max_terms}",
                RuntimeWarning,
                stacklevel=2,
            )
    return SeriesSolution(a, tuple(b), precision, tuple(rates), peak)


@functools.lru_cache(maxsize=64)
def characteristic_series(n: int, precision: PrecisionConfig | None = None) -> SeriesSolution:
    """Series for the n-th characteristic function ``E_n = E(t; 2**(1/n))``."""
    precision = precision or PrecisionConfig(significand_bits=256 if n <= 4 else 512)
    return build_series(characteristic_alpha(n, precision), precision)


def _check_t(t):
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")


def evaluate_E(series: SeriesSolution, t) -> mp.mpf:
    """``sum_k b_k exp(-alpha**k t)`` in working precision."""
    with mp.workprec(series.precision.significand_bits):
        t = mp.mpf(t)
        _check_t(t)
        return mp.fsum(b * mp.exp(-r * t) for b, r in zip(series.coefficients, series.rates))


def evaluate_E_derivative(series: SeriesSolution, t) -> mp.mpf:
    """``-sum_k b_k alpha**k exp(-alpha**k t)`` in working precision."""
    with mp.workprec(series.precision.significand_bits):
        t = mp.mpf(t)
        _check_t(t)
        return -mp.fsum(
            b * r * mp.exp(-r * t) for b, r in zip(series.coefficients, series.rates)
        )


def sample_E(series: SeriesSolution, t_values: Iterable[float]) -> np.ndarray:
    """Evaluate ``E`` at many points, rounded to double precision."""
    return np.array([float(evaluate_E(series, t)) for t in t_values], dtype=float)


def sample_E_derivative(series: SeriesSolution, t_values: Iterable[float]) -> np.ndarray:
    return np.array([float(evaluate_E_derivative(series, t)) for t in t_values], dtype=float)


def lemma1_sum(alpha, precision: PrecisionConfig | None = None) -> mp.mpf:
    """Raw coefficient sum ``1 + sum_{k>=1} b_k``, i.e. ``E(0; alpha)``.

    Vanishes exactly when ``alpha = 2**(1/n)``.
    """
    series = build_series(alpha, precision)
    with mp.workprec(series.precision.significand_bits):
        return mp.fsum(series.coefficients)


def euler_product(c, q, precision: PrecisionConfig | None = None) -> mp.mpf:
    """``prod_{k>=1} (1 - c q**k)``, truncated once ``|c q**k| < term_tolerance``.

    With ``c = 2`` and ``q = 1/alpha`` this equals :func:`lemma1_sum` by the
    Euler q-series identity, which makes it an independent check.
    """
    precision = precision or PrecisionConfig()
    with mp.workprec(precision.significand_bits):
        c = mp.mpf(c)
        q = mp.mpf(q)
        if not abs(q) < 1:
            raise DomainError(f"|q| must be < 1 (got {q})")
        tol = mp.mpf(precision.term_tolerance)
        prod = mp.mpf(1)
        term = c * q
        for _ in range(precision.max_terms):
            if abs(term) < tol:
                break
            prod *= 1 - term
            if prod == 0:
                return prod
            term *= q
        return prod


def characteristic_zeros(
    series: SeriesSolution,
    t_min: float = 1e-3,
    t_max: float = 50.0,
    samples: int = 10_000,
    sample_points: Sequence[float] | None = None,
) -> list[float]:
    """Sign changes of ``E`` on a geometric grid, refined by bisection.

    Samples whose magnitude is below the series noise floor are skipped; the
    flat region near ``t = 0`` sits there and would otherwise produce spurious
    sign flips.
    """
    ts = np.geomspace(t_min, t_max, samples) if sample_points is None else np.asarray(sample_points)
    floor = series.noise_floor
    with mp.workprec(series.precision.significand_bits):
        vals = [evaluate_E(series, t) for t in ts]
        keep = [i for i, v in enumerate(vals) if abs(v) > floor]
        zeros = []
        for i, j in zip(keep, keep[1:]):
            if mp.sign(vals[i]) == mp.sign(vals[j]):
                continue
            lo, hi = mp.mpf(ts[i]), mp.mpf(ts[j])
            flo = vals[i]
            for _ in range(60):
                mid = (lo + hi) / 2
                fm = evaluate_E(series, mid)
                if mp.sign(fm) == mp.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            zeros.append(float((lo + hi) / 2))
    return zeros
