"""The linearized problem: q-series solutions and their scaling coefficients.

Run with ``python demos/01_linear_problem.py``.
"""

import mpmath as mp
import numpy as np

from alpha_riccati import (
    PrecisionConfig,
    build_series,
    characteristic_alpha,
    characteristic_series,
    characteristic_zeros,
    evaluate_E,
    lemma1_sum,
    scaling_table,
)

# %% The series E(t) = sum_k b_k exp(-alpha**k t) solves E' + E = 2 E(alpha t)
# for every alpha > 1. Its value at t = 0 vanishes only at alpha = 2**(1/n).
cfg = PrecisionConfig(significand_bits=256)
for a in (1.2, 1.5, 2.0, 3.0):
    print(f"E(0; {a}) = {mp.nstr(lemma1_sum(a, cfg), 12)}")
for n in range(1, 7):
    print(f"n={n}: alpha_n = {float(characteristic_alpha(n)):.12f}, "
          f"E(0) = {mp.nstr(lemma1_sum(characteristic_alpha(n), cfg), 3)}")

# %% Coefficients grow before they decay when alpha is close to 1
s = characteristic_series(6)
mags = np.array([float(abs(b)) for b in s.coefficients])
print(f"alpha_6: {s.n_terms} terms, largest |b_k| = {mags.max():.6g} at k = {mags.argmax()}")

# %% The characteristic solution E_n has n - 1 sign changes
for n in range(1, 5):
    zs = characteristic_zeros(characteristic_series(n))
    print(f"n={n}: zeros at {[round(float(z), 4) for z in zs]}")

# %% A few values of E(t; 2)
s2 = build_series(2)
for t in (0.0, 0.5, 1.0, 2.0, 5.0):
    print(f"E({t}; 2) = {mp.nstr(evaluate_E(s2, t), 15)}")

# %% Scaling coefficients C_n and the norms of C_n E_n
for rec in scaling_table():
    print(f"n={rec.n}: C_n = {mp.nstr(rec.C_n, 15):>22}   ||C_n E_n|| = {mp.nstr(rec.scaled_norm, 12)}")
