"""Newton solves, characteristic nullspaces and solution classification.

Family (A) is solved in the shifted form ``v = u - 1``:

    (D + I - 2P) v - P (v * v) = 0,      v(0) = 0 built into the interior block,

family (B) in the original form with the ``t = 0`` row replaced by ``u(0) = 1``:

    (D + I) u - P (u * u) = 0.
"""

from __future__ import annotations

import functools
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import discretization as disc
from .discretization import Grid, Mode, OperatorSet
from .errors import ClassificationError, DomainError
from .qseries import characteristic_series, sample_E

__all__ = [
    "SolveResult",
    "residual",
    "jacobian",
    "newton_solve",
    "characteristic_solve",
    "classify",
    "count_zeros",
    "locate_zeros",
    "solve_family_b",
    "moment_identity_defect",
    "characteristic_error",
]

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
MAX_ITER = 25
MAX_HALVINGS = 8
T_MIN = 0.05
TRIVIAL_LEVEL = 1e-10
# samples below this fraction of the peak are treated as flat/noise
SIGNIFICANCE = 1e-7


@dataclass
class SolveResult:
    alpha: float
    mode: str
    values: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    classification: str | None
    nodes: np.ndarray = field(repr=False, default=None)
    history: list = field(repr=False, default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = [float(x) for x in self.values]
        d["nodes"] = [float(x) for x in self.nodes] if self.nodes is not None else None
        d["history"] = [float(x) for x in self.history]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SolveResult":
        d = dict(d)
        d["values"] = np.asarray(d["values"], dtype=float)
        if d.get("nodes") is not None:
            d["nodes"] = np.asarray(d["nodes"], dtype=float)
        return cls(**d)


def _check_size(ops: OperatorSet, values):
    v = np.asarray(values, dtype=float)
    if v.shape != (ops.size,):
        raise DomainError(f"expected a vector of length {ops.size}, got shape {v.shape}")
    return v


def residual(ops: OperatorSet, values) -> np.ndarray:
    """Discrete residual of the nonlinear equation."""
    v = _check_size(ops, values)
    D, P = ops.D, ops.P_alpha
    if ops.mode is Mode.FAMILY_A:
        return D @ v + v - 2 * (P @ v) - P @ (v * v)
    r = D @ v + v - P @ (v * v)
    r[0] = v[0] - 1.0
    return r


def jacobian(ops: OperatorSet, values) -> np.ndarray:
    """Analytic Jacobian of :func:`residual` with respect to the grid values."""
    v = _check_size(ops, values)
    D, P = ops.D, ops.P_alpha
    n = len(v)
    if ops.mode is Mode.FAMILY_A:
        return D + np.eye(n) - 2 * P - 2 * P * v[None, :]
    J = D + np.eye(n) - 2 * P * v[None, :]
    J[0] = 0.0
    J[0, 0] = 1.0
    return J


def alpha_derivative(ops: OperatorSet, values) -> np.ndarray:
    """Partial derivative of :func:`residual` with respect to ``alpha``."""
    v = _check_size(ops, values)
    dP = ops.dP_alpha
    if ops.mode is Mode.FAMILY_A:
        return -2 * (dP @ v) - dP @ (v * v)
    r = -(dP @ (v * v))
    r[0] = 0.0
    return r


def _classification_label(ops: OperatorSet, v) -> str | None:
    if ops.mode is Mode.FAMILY_B:
        return "decaying"
    try:
        return classify(ops.grid, v)
    except ClassificationError:
        return None


def newton_solve(
    ops: OperatorSet, initial, tol: float = NEWTON_TOL, max_iter: int = MAX_ITER
) -> SolveResult:
    """Damped Newton iteration on :func:`residual`.

    The step is halved (at most eight times) while the residual grows. A
    singular Jacobian or a non-finite iterate ends the run with
    ``converged=False`` rather than raising.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    v = _check_size(ops, initial).copy()
    r = residual(ops, v)
    rn = float(np.max(np.abs(r)))
    history = [rn]
    it = 0
    message = ""
    while rn > tol and it < max_iter:
        it += 1
        try:
            step = np.linalg.solve(jacobian(ops, v), -r)
        except np.linalg.LinAlgError:
            message = "singular Jacobian"
            break
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = v + lam * step
            r_trial = residual(ops, trial)
            rn_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(rn_trial) and rn_trial < rn:
                break
            lam /= 2
        if not np.isfinite(rn_trial):
            message = "non-finite iterate"
            break
        v, r, rn = trial, r_trial, rn_trial
        history.append(rn)
    converged = rn <= tol
    if not converged and not message:
        message = f"no convergence after {it} iterations"
    log.debug("newton alpha=%.6g iters=%d residual=%.3e", ops.alpha, it, rn)
    return SolveResult(
        alpha=ops.alpha,
        mode=ops.mode.value,
        values=v,
        residual_norm=rn,
        iterations=it,
        converged=converged,
        classification=_classification_label(ops, v) if converged else None,
        nodes=ops.grid.nodes[1:] if ops.mode is Mode.FAMILY_A else ops.grid.nodes,
        history=history,
        message=message,
    )


def _nearest_characteristic(alpha: float) -> int:
    n = max(1, round(math.log(2) / math.log(alpha)))
    return n


def characteristic_solve(ops: OperatorSet) -> np.ndarray:
    """Nullspace of ``D + I - 2P`` at a characteristic ``alpha = 2**(1/n)``.

    Returns the right singular vector of the smallest singular value, scaled to
    unit L2 norm with its first excursion positive.
    """
    if not ops.alpha > 1:
        raise DomainError("alpha must exceed 1")
    n = _nearest_characteristic(ops.alpha)
    if abs(ops.alpha - 2 ** (1 / n)) > 1e-12:
        raise DomainError(f"alpha = {ops.alpha!r} is not a characteristic value 2**(1/n)")
    A = ops.D_full[1:, 1:] + np.eye(ops.grid.dof) - 2 * ops.P_full[1:, 1:]
    _, s, vt = np.linalg.svd(A)
    if s[-2] < 1e3 * s[-1]:
        warnings.warn(
            f"ambiguous nullspace: singular values {s[-1]:.2e}, {s[-2]:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    v = vt[-1]
    v = v / disc.quadrature_norm(ops.grid, v)
    if _first_excursion_sign(ops.grid, v) < 0:
        v = -v
    return v


@functools.lru_cache(maxsize=8)
def _dense_sampler(grid: Grid, t_min: float, samples: int = 4000):
    ts = np.geomspace(t_min, grid.t_max, samples)
    return ts, disc.interpolation_matrix(grid, ts)


def _dense_values(grid: Grid, values, t_min: float):
    ts, W = _dense_sampler(grid, t_min)
    return ts, W @ disc._full_values(grid, values)


def _first_excursion_sign(grid: Grid, values, t_min: float = T_MIN) -> int:
    _, y = _dense_values(grid, values, t_min)
    amp = np.max(np.abs(y))
    k0 = int(np.argmax(np.abs(y) > SIGNIFICANCE * amp))
    return 1 if y[k0] > 0 else -1


def classify(grid: Grid, values, t_min: float = T_MIN) -> str:
    """``'plus'`` if the first turning point beyond ``t_min`` is a maximum.

    Returns ``'minus'`` for a minimum and ``'trivial'`` for a numerically zero
    vector. For a family-(B) ``u`` pass ``u - 1``.

    Raises:
        ClassificationError: no turning point on the grid span.
    """
    v = np.asarray(values, dtype=float)
    if np.max(np.abs(v)) <= TRIVIAL_LEVEL:
        return "trivial"
    ts, y = _dense_values(grid, v, t_min)
    amp = np.max(np.abs(y))
    k0 = int(np.argmax(np.abs(y) > SIGNIFICANCE * amp))
    direction = 1.0 if y[k0] > 0 else -1.0
    dy = np.diff(y[k0:])
    turn = np.flatnonzero(direction * dy < 0)
    if turn.size == 0:
        raise ClassificationError("no turning point found on the grid span")
    return "plus" if direction > 0 else "minus"


def locate_zeros(grid: Grid, values, t_min: float = T_MIN) -> list[float]:
    """Zeros of the interpolant beyond ``t_min``, refined by bisection.

    Sign changes are only counted between samples above the significance
    level, which discards the flat start and the noisy far tail.
    """
    ts, y = _dense_values(grid, values, t_min)
    amp = np.max(np.abs(y))
    if amp == 0:
        return []
    keep = np.flatnonzero(np.abs(y) > SIGNIFICANCE * amp)
    full = disc._full_values(grid, values)
    zeros = []
    for i, j in zip(keep[:-1], keep[1:]):
        if np.sign(y[i]) == np.sign(y[j]):
            continue
        lo, hi, flo = ts[i], ts[j], y[i]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            fm = float(disc.interpolation_matrix(grid, [mid])[0] @ full)
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        zeros.append(0.5 * (lo + hi))
    return zeros


def count_zeros(grid: Grid, values, t_min: float = T_MIN) -> int:
    """Number of sign changes of the interpolant on ``(t_min, t_max)``."""
    return len(locate_zeros(grid, values, t_min))


def solve_family_b(
    ops: OperatorSet, alpha: float | None = None, tol: float = NEWTON_TOL, max_iter: int = MAX_ITER
) -> SolveResult:
    """Solution with ``u(0) = 1`` that decays like ``exp(-t)``.

    Newton starts from ``exp(-t)``; ``ops`` is rebuilt in u-form if needed.
    """
    if alpha is None:
        alpha = ops.alpha
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")
    if ops.mode is not Mode.FAMILY_B or ops.alpha != alpha:
        ops = disc.build_operators(ops.grid, alpha, Mode.FAMILY_B, D_full=ops.D_full)
    guess = np.exp(-ops.grid.nodes)
    return newton_solve(ops, guess, tol, max_iter)


def moment_identity_defect(grid: Grid, values, alpha: float) -> float:
    """``|(alpha - 2) Q(v) - Q(v**2)| / (1 + |Q(v)|)`` with grid quadrature ``Q``.

    Integrating the v-form equation over ``[0, inf)`` gives
    ``(alpha - 2) int v = int v**2`` for any family-(A) solution.
    """
    v = disc._interior_values(grid, values)
    q1 = disc.quadrature_integral(grid, v)
    q2 = disc.quadrature_integral(grid, v * v)
    return abs((alpha - 2) * q1 - q2) / (1 + abs(q1))


def characteristic_error(grid: Grid, n: int) -> float:
    """Max grid error of :func:`characteristic_solve` at ``alpha_n``.

    The reference is the series ``E_n`` sampled on the interior nodes and
    scaled to unit quadrature norm with the sign of the computed vector.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer (got {n})")
    ops = disc.build_operators(grid, 2 ** (1 / n))
    v = characteristic_solve(ops)
    e = sample_E(characteristic_series(int(n)), grid.interior)
    e = e / disc.quadrature_norm(grid, e)
    if np.dot(e, v) < 0:
        e = -e
    return float(np.max(np.abs(v - e)))
