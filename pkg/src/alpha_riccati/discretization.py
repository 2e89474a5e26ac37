"""Truncated Laguerre collocation: nodes, differentiation and resampling.

Functions on ``[0, inf)`` are represented by their values on the first
``m = ceil(M sqrt(N))`` zeros of the Laguerre polynomial ``L_N``, with
``t = 0`` prepended. The interpolant is the weighted polynomial

    v(t) = exp(-t/2) p(t),

where ``p`` interpolates ``exp(t/2) v`` at all ``N + 1`` nodes and the values
at the dropped nodes ``m+1..N`` are taken to be zero (truncated Lagrange
interpolation). Those dropped nodes still enter the barycentric weights, which
is what keeps dilated points ``alpha t_i`` (up to twice the kept span) inside
the interpolation interval.

The ``exp(-t/2)`` factor makes the Lagrange functions bounded Laguerre
functions. All exponential factors and barycentric products are combined in
log space, so nothing overflows at ``N = 700``.
"""

from __future__ import annotations

import csv
import enum
import functools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, ConstructionError, DomainError

__all__ = [
    "Mode",
    "Grid",
    "OperatorSet",
    "gauss_laguerre",
    "truncated_grid",
    "differentiation_matrix",
    "resampling_matrix",
    "interpolation_matrix",
    "build_operators",
    "quadrature_norm",
    "quadrature_integral",
    "interpolate",
    "dump_operators_csv",
]

# exponent of the interpolation weight exp(-DECAY t)
DECAY = 0.5
N_MAX = 10_000
_LOG_MAX = 700.0


class Mode(str, enum.Enum):
    """Boundary handling of the discretised operator."""

    FAMILY_A = "family_A_v_form"
    FAMILY_B = "family_B_u_form"


@functools.lru_cache(maxsize=32)
def _gauss_laguerre(N: int):
    if N == 1:
        return np.array([1.0]), np.array([0.0])
    k = np.arange(1, N, dtype=float)
    x0 = eigh_tridiagonal(2.0 * np.arange(N) + 1.0, -k, eigvals_only=True)
    # Newton polish on the three-term recurrence in extended precision;
    # the recurrence is rescaled as it runs and the scale kept as a log.
    x = x0.astype(np.longdouble)
    tol = 8 * np.finfo(np.longdouble).eps
    for _ in range(30):
        p0 = np.ones_like(x)
        p1 = 1 - x
        logscale = np.zeros_like(x)
        for j in range(1, N):
            p0, p1 = p1, ((2 * j + 1 - x) * p1 - j * p0) / (j + 1)
            big = np.abs(p1) > 1e100
            if big.any():
                s = np.where(big, np.abs(p1), 1)
                p0, p1 = p0 / s, p1 / s
                logscale += np.log(s)
        dp = N * (p1 - p0) / x
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx) / x) < tol:
            break
    # w = 1 / (x L_N'(x)**2)
    logw = -np.log(x) - 2 * (logscale + np.log(np.abs(dp)))
    return x.astype(float), logw.astype(float)


def gauss_laguerre(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the N-point Gauss-Laguerre rule (weight ``exp(-t)``).

    Nodes start from the Jacobi-matrix eigenvalues and are polished by Newton's
    method on the Laguerre recurrence. Weights of the largest nodes underflow
    to zero in double precision.
    """
    if int(N) != N or not 1 <= N <= N_MAX:
        raise DomainError(f"N must lie in 1..{N_MAX} (got {N})")
    x, logw = _gauss_laguerre(int(N))
    return x.copy(), np.exp(logw)


@dataclass(frozen=True, eq=False)
class Grid:
    """Truncated Laguerre grid.

    Attributes:
        N: size of the underlying Laguerre rule.
        M: truncation multiplier.
        nodes: ``t_0 = 0 < t_1 < ... < t_m``.
        quad_weights: Gauss-Laguerre weights of ``t_1..t_m``.
        full_nodes: all ``N + 1`` nodes including the dropped ones.
        log_bary: ``log |lambda_j|`` of the kept nodes, over the full node set.
        bary_sign: sign of ``lambda_j``.
    """

    N: int
    M: float
    nodes: np.ndarray
    quad_weights: np.ndarray
    full_nodes: np.ndarray
    log_bary: np.ndarray
    bary_sign: np.ndarray

    @property
    def dof(self) -> int:
        return len(self.nodes) - 1

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:]

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def l2_weights(self) -> np.ndarray:
        """Weights for ``int_0^inf f(t) dt ~ sum l2_weights * f(t_i)``."""
        return self.quad_weights * np.exp(self.interior)


def truncated_grid(N: int, M: float, clip: bool = False) -> Grid:
    """Keep the first ``ceil(M sqrt(N))`` Laguerre nodes and prepend ``t = 0``.

    Args:
        clip: cap the kept count at ``N`` instead of raising; only used by
            convergence sweeps that start from very small ``N``.

    Raises:
        ConfigurationError: ``ceil(M sqrt(N)) > N`` and ``clip`` is false.
    """
    if M <= 0:
        raise ConfigurationError("M must be positive")
    m = math.ceil(M * math.sqrt(N))
    if m > N:
        if not clip:
            raise ConfigurationError(f"ceil(M sqrt(N)) = {m} exceeds N = {N}")
        m = N
    x, w = gauss_laguerre(N)
    full = np.concatenate(([0.0], x))
    nodes = full[: m + 1].copy()
    if np.any(np.diff(full) <= 0):
        raise ConstructionError("grid nodes are not strictly increasing")
    diff = nodes[:, None] - full[None, :]
    diff[np.arange(m + 1), np.arange(m + 1)] = 1.0
    log_bary = -np.sum(np.log(np.abs(diff)), axis=1)
    # lambda_j = 1 / prod_{k != j} (t_j - t_k): one negative factor per larger node
    bary_sign = np.where((N - np.arange(m + 1)) % 2 == 0, 1.0, -1.0)
    for arr in (nodes, w, full, log_bary, bary_sign):
        arr.setflags(write=False)
    return Grid(int(N), float(M), nodes, w[:m].copy(), full, log_bary, bary_sign)


def differentiation_matrix(grid: Grid, decay: float = DECAY) -> np.ndarray:
    """Differentiation matrix of the weighted interpolant on the kept nodes.

    Returns the full ``(m+1) x (m+1)`` matrix including the ``t = 0`` row and
    column; family-(A) operators drop both afterwards.
    """
    t, full = grid.nodes, grid.full_nodes
    n = len(t)
    diff = t[:, None] - t[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0):
        raise ConstructionError("duplicate nodes")
    logs = decay * (t[None, :] - t[:, None]) + grid.log_bary[None, :] - grid.log_bary[:, None]
    _check_exponent(logs, t)
    sign = grid.bary_sign[None, :] * grid.bary_sign[:, None]
    D = sign * np.exp(logs) / diff
    inv = t[:, None] - full[None, :]
    inv[np.arange(n), np.arange(n)] = np.inf
    np.fill_diagonal(D, np.sum(1.0 / inv, axis=1) - decay)
    return D


def _check_exponent(logs, points):
    bad = np.argwhere(logs > _LOG_MAX)
    if bad.size:
        i = bad[0][0]
        raise ConstructionError(f"exponent overflow at query point t = {points[i]!r}")


def interpolation_matrix(
    grid: Grid, points, decay: float = DECAY, derivative: bool = False
):
    """Rows mapping kept-node values to interpolant values at ``points``.

    With ``derivative=True`` also returns the matrix of ``d/dt`` of the
    interpolant at the same points.
    """
    y = np.atleast_1d(np.asarray(points, dtype=float))
    t, full = grid.nodes, grid.full_nodes
    n = len(t)
    W = np.zeros((len(y), n))
    dW = np.zeros((len(y), n)) if derivative else None
    for i, yi in enumerate(y):
        d = yi - full
        hit = np.flatnonzero(d == 0)
        if hit.size:
            k = hit[0]
            if k < n:
                W[i, k] = 1.0
            if derivative:
                dW[i] = _derivative_row_at_node(grid, k, decay)
            continue
        logabs = np.log(np.abs(d))
        total = logabs.sum()
        sgn_total = np.prod(np.sign(d))
        dk = d[:n]
        # log|l_j(y)| = log|lambda_j| + sum_{k != j} log|y - t_k|
        logs = -decay * (yi - t) + grid.log_bary + (total - logabs[:n])
        _check_exponent(logs[None, :], [yi])
        W[i] = sgn_total * np.sign(dk) * grid.bary_sign * np.exp(logs)
        if derivative:
            inv = 1.0 / d
            s = inv.sum()
            excl = s - inv[:n]
            j = int(np.argmin(np.abs(dk)))
            excl[j] = np.delete(inv, j).sum()
            dW[i] = W[i] * (excl - decay)
    return (W, dW) if derivative else W


def _derivative_row_at_node(grid: Grid, k: int, decay: float) -> np.ndarray:
    """Derivative of each weighted Lagrange function at node ``full_nodes[k]``."""
    t, full = grid.nodes, grid.full_nodes
    n = len(t)
    tk = full[k]
    dk = tk - full
    dk_nz = np.delete(dk, k)
    log_nodeprod = np.log(np.abs(dk_nz)).sum()
    sign_nodeprod = np.prod(np.sign(dk_nz))
    row = np.zeros(n)
    for j in range(n):
        if j == k:
            row[j] = np.sum(1.0 / dk_nz) - decay
            continue
        # l_j'(t_k) = lambda_j prod_{l != j, k} (t_k - t_l)
        logs = -decay * (tk - t[j]) + grid.log_bary[j] + log_nodeprod - math.log(abs(dk[j]))
        row[j] = grid.bary_sign[j] * sign_nodeprod * math.copysign(1.0, dk[j]) * math.exp(logs)
    return row


def resampling_matrix(grid: Grid, alpha: float, decay: float = DECAY, derivative: bool = False):
    """Matrix ``P`` with ``P v(t) ~ v(alpha t)`` on the kept nodes.

    With ``derivative=True`` also returns ``dP/dalpha``.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    t = grid.nodes
    if derivative:
        W, dW = interpolation_matrix(grid, alpha * t, decay, derivative=True)
        return W, t[:, None] * dW
    return interpolation_matrix(grid, alpha * t, decay)


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Discrete operators at one value of ``alpha``.

    ``D_full`` and ``P_full`` act on all ``m + 1`` kept nodes. ``D`` and
    ``P_alpha`` are the matrices the solver uses: interior block for
    family (A), where ``v(0) = 0`` removes the boundary row and column, and the
    full matrices for family (B).
    """

    grid: Grid
    alpha: float
    D_full: np.ndarray
    P_full: np.ndarray
    mode: Mode = Mode.FAMILY_A
    dP_full: np.ndarray | None = None

    @property
    def D(self) -> np.ndarray:
        return self.D_full[1:, 1:] if self.mode is Mode.FAMILY_A else self.D_full

    @property
    def P_alpha(self) -> np.ndarray:
        return self.P_full[1:, 1:] if self.mode is Mode.FAMILY_A else self.P_full

    @property
    def dP_alpha(self) -> np.ndarray:
        if self.dP_full is None:
            raise AttributeError("operators built without the alpha-derivative")
        return self.dP_full[1:, 1:] if self.mode is Mode.FAMILY_A else self.dP_full

    @property
    def size(self) -> int:
        return self.grid.dof if self.mode is Mode.FAMILY_A else self.grid.dof + 1

    def at(self, alpha: float) -> "OperatorSet":
        """Same grid and mode at another ``alpha`` (``D`` is reused)."""
        return build_operators(
            self.grid, alpha, self.mode, derivative=self.dP_full is not None, D_full=self.D_full
        )


@functools.lru_cache(maxsize=8)
def _cached_D(grid: Grid) -> np.ndarray:
    D = differentiation_matrix(grid)
    D.setflags(write=False)
    return D


def build_operators(
    grid: Grid,
    alpha: float,
    mode: Mode | str = Mode.FAMILY_A,
    derivative: bool = False,
    D_full: np.ndarray | None = None,
) -> OperatorSet:
    mode = Mode(mode)
    if D_full is None:
        D_full = _cached_D(grid)
    if derivative:
        P, dP = resampling_matrix(grid, alpha, derivative=True)
    else:
        P, dP = resampling_matrix(grid, alpha), None
    return OperatorSet(grid, float(alpha), D_full, P, mode, dP)


def _full_values(grid: Grid, values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if len(v) == grid.dof:
        return np.concatenate(([0.0], v))
    if len(v) == grid.dof + 1:
        return v
    raise DomainError(f"expected {grid.dof} or {grid.dof + 1} values, got {len(v)}")


def _interior_values(grid: Grid, values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if len(v) == grid.dof:
        return v
    if len(v) == grid.dof + 1:
        return v[1:]
    raise DomainError(f"expected {grid.dof} values, got {len(v)}")


def quadrature_norm(grid: Grid, values) -> float:
    """L2 norm on ``[0, inf)`` by Gauss-Laguerre quadrature on the kept nodes."""
    v = _interior_values(grid, values)
    return math.sqrt(float(np.sum(grid.l2_weights * v * v)))


def quadrature_integral(grid: Grid, values) -> float:
    """``int_0^inf v(t) dt`` by Gauss-Laguerre quadrature on the kept nodes."""
    return float(np.sum(grid.l2_weights * _interior_values(grid, values)))


def interpolate(grid: Grid, values, t_query):
    """Evaluate the weighted interpolant at ``t_query`` (scalar or array).

    ``values`` holds either the interior values (``v(0) = 0`` implied) or all
    ``m + 1`` kept-node values.
    """
    v = _full_values(grid, values)
    tq = np.asarray(t_query, dtype=float)
    if np.any(tq < 0):
        raise DomainError("t_query must be non-negative")
    if np.any(tq > 1.2 * grid.t_max):
        warnings.warn(
            f"evaluating beyond 1.2x the last kept node ({grid.t_max:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    out = interpolation_matrix(grid, tq.ravel()) @ v
    return float(out[0]) if tq.ndim == 0 else out.reshape(tq.shape)


def dump_operators_csv(ops: OperatorSet, directory) -> list[Path]:
    """Write nodes, weights, ``D`` and ``P`` as CSV files for inspection."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    g = ops.grid
    paths = []
    p = directory / "grid.csv"
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "t", "quad_weight"])
        for i, t in enumerate(g.nodes):
            w.writerow([i, repr(float(t)), repr(float(g.quad_weights[i - 1])) if i else ""])
    paths.append(p)
    for name, mat in (("D", ops.D_full), ("P_alpha", ops.P_full)):
        p = directory / f"{name}.csv"
        np.savetxt(p, mat, delimiter=",", fmt="%.17e")
        paths.append(p)
    return paths
