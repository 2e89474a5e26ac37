"""Pseudo-arclength continuation of family-(A) solutions in ``alpha``.

States are pairs ``y = (v, alpha)`` with the inner product

    <(v, a), (w, b)> = sum_i q_i v_i w_i + a b,

where ``q`` are the L2 quadrature weights of the grid, so the arclength of a
branch is measured in the same norm as the bifurcation diagram. Each step
predicts along the unit tangent and corrects with Newton's method on the
residual bordered by the arclength condition

    <y - y_prev, tangent_prev> = ds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .discretization import Grid, Mode
from .errors import ClassificationError, DomainError
from .moments import perturbation_guess
from .solver import (
    NEWTON_TOL,
    SolveResult,
    alpha_derivative,
    classify,
    jacobian,
    moment_identity_defect,
    newton_solve,
    residual,
)

__all__ = [
    "ContinuationControls",
    "BranchPoint",
    "Branch",
    "Atlas",
    "extended_residual",
    "extended_jacobian",
    "trace_branch",
    "detect_folds",
    "atlas",
    "solutions_at",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuationControls:
    ds0: float = 1e-2
    ds_min: float = 1e-5
    ds_max: float = 0.1
    tol: float = NEWTON_TOL
    max_corrector: int = 8
    fast_corrector: int = 3
    max_steps: int = 5000
    min_cos: float = 0.9


@dataclass
class BranchPoint:
    alpha: float
    values: np.ndarray
    norm_sq: float
    classification: str | None
    tangent: np.ndarray
    residual_norm: float = 0.0
    moment_defect: float = 0.0
    ds: float = 0.0

    @property
    def n(self) -> float:
        """The ``alpha`` coordinate as ``log 2 / log alpha``."""
        return math.log(2) / math.log(self.alpha)


@dataclass
class Branch:
    points: list
    seed: dict
    folds: list = field(default_factory=list)
    status: str = ""
    grid: Grid | None = field(default=None, repr=False)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.points])

    @property
    def norms_sq(self) -> np.ndarray:
        return np.array([p.norm_sq for p in self.points])

    def arclengths(self) -> np.ndarray:
        s = [0.0]
        for a, b in zip(self.points, self.points[1:]):
            s.append(s[-1] + _dist(self.grid, a, b))
        return np.array(s)


@dataclass
class Atlas:
    branches: list
    window: tuple
    failures: list = field(default_factory=list)
    grid: Grid | None = field(default=None, repr=False)

    @property
    def folds(self) -> list:
        return [(i, a) for i, b in enumerate(self.branches) for a in b.folds]


def _weights(grid: Grid | None, n: int) -> np.ndarray:
    return grid.l2_weights if grid is not None else np.ones(n)


def _inner(q, y1, y2) -> float:
    return float(np.sum(q * y1[:-1] * y2[:-1]) + y1[-1] * y2[-1])


def _normalise(q, y):
    return y / math.sqrt(_inner(q, y, y))


def _dist(grid, a: BranchPoint, b: BranchPoint) -> float:
    q = _weights(grid, len(a.values))
    dv = a.values - b.values
    return math.sqrt(float(np.sum(q * dv * dv)) + (a.alpha - b.alpha) ** 2)


def _ops(grid: Grid, alpha: float, D_full=None):
    return disc.build_operators(grid, alpha, Mode.FAMILY_A, derivative=True, D_full=D_full)


def extended_residual(grid: Grid, point, prev, ds: float, tangent=None) -> np.ndarray:
    """Residual at ``point`` stacked with the arclength condition.

    ``point`` and ``prev`` are ``BranchPoint`` objects or raw ``(v, alpha)``
    state vectors; ``tangent`` defaults to ``prev.tangent``.
    """
    if ds <= 0:
        raise DomainError("ds must be positive")
    y = _state(point)
    y0 = _state(prev)
    tau = prev.tangent if tangent is None else np.asarray(tangent, dtype=float)
    if len(y) != grid.dof + 1 or len(y0) != len(y) or len(tau) != len(y):
        raise DomainError("state dimension does not match the grid")
    ops = disc.build_operators(grid, y[-1], Mode.FAMILY_A)
    q = grid.l2_weights
    return np.concatenate((residual(ops, y[:-1]), [_inner(q, y - y0, tau) - ds]))


def extended_jacobian(grid: Grid, point, tangent, ops=None) -> np.ndarray:
    """Bordered Jacobian ``[[J, dF/dalpha], [q * tangent_v, tangent_alpha]]``."""
    y = _state(point)
    if ops is None:
        ops = _ops(grid, y[-1])
    q = grid.l2_weights
    tau = np.asarray(tangent, dtype=float)
    J = jacobian(ops, y[:-1])
    Fa = alpha_derivative(ops, y[:-1])
    top = np.hstack((J, Fa[:, None]))
    bottom = np.concatenate((q * tau[:-1], [tau[-1]]))
    return np.vstack((top, bottom))


def _state(p) -> np.ndarray:
    if isinstance(p, BranchPoint):
        return np.concatenate((p.values, [p.alpha]))
    if isinstance(p, SolveResult):
        return np.concatenate((p.values, [p.alpha]))
    return np.asarray(p, dtype=float)


def _initial_tangent(grid, y, direction, ops) -> np.ndarray:
    J = jacobian(ops, y[:-1])
    Fa = alpha_derivative(ops, y[:-1])
    q = grid.l2_weights
    # null vector of [J, Fa] in the weighted metric
    sq = np.sqrt(np.concatenate((q, [1.0])))
    A = np.hstack((J, Fa[:, None])) / sq[None, :]
    _, _, vt = np.linalg.svd(A)
    tau = vt[-1] / sq
    tau = _normalise(q, tau)
    if tau[-1] * direction < 0:
        tau = -tau
    return tau


def _tangent(grid, y, tau_prev, ops) -> np.ndarray:
    K = extended_jacobian(grid, y, tau_prev, ops)
    rhs = np.zeros(len(y))
    rhs[-1] = 1.0
    tau = np.linalg.solve(K, rhs)
    tau = _normalise(grid.l2_weights, tau)
    if _inner(grid.l2_weights, tau, tau_prev) < 0:
        tau = -tau
    return tau


def _correct(grid, y_pred, y_prev, tau_prev, ds, controls, D_full):
    q = grid.l2_weights
    y = y_pred.copy()
    for it in range(1, controls.max_corrector + 1):
        ops = _ops(grid, y[-1], D_full)
        F = residual(ops, y[:-1])
        g = _inner(q, y - y_prev, tau_prev) - ds
        G = np.concatenate((F, [g]))
        K = extended_jacobian(grid, y, tau_prev, ops)
        try:
            dy = np.linalg.solve(K, -G)
        except np.linalg.LinAlgError:
            return None, it, None
        y = y + dy
        if not np.all(np.isfinite(y)) or y[-1] <= 1:
            return None, it, None
        ops = _ops(grid, y[-1], D_full)
        rn = float(np.max(np.abs(residual(ops, y[:-1]))))
        if rn <= controls.tol and abs(_inner(q, y - y_prev, tau_prev) - ds) <= 1e-8:
            return y, it, ops
    return None, controls.max_corrector, None


def _make_point(grid, y, tau, ops, ds) -> BranchPoint:
    v = y[:-1].copy()
    rn = float(np.max(np.abs(residual(ops, v))))
    try:
        cls = classify(grid, v)
    except ClassificationError:
        cls = None
    return BranchPoint(
        alpha=float(y[-1]),
        values=v,
        norm_sq=disc.quadrature_norm(grid, v) ** 2,
        classification=cls,
        tangent=tau,
        residual_norm=rn,
        moment_defect=moment_identity_defect(grid, v, float(y[-1])),
        ds=ds,
    )


def trace_branch(
    seed: SolveResult,
    alpha_range: tuple,
    ds0: float | None = None,
    controls: ContinuationControls | None = None,
    *,
    grid: Grid,
    direction: int = 1,
) -> Branch:
    """Follow the branch through ``seed`` until it leaves ``alpha_range``.

    ``direction`` selects the initial sense of travel in ``alpha``. Tracing
    also stops when the step size underflows ``ds_min``, when the branch
    settles onto the trivial solution, or after ``max_steps`` points.
    """
    if not seed.converged:
        raise DomainError("seed solution has not converged")
    controls = controls or ContinuationControls()
    ds = ds0 if ds0 is not None else controls.ds0
    lo, hi = sorted(alpha_range)
    D_full = disc._cached_D(grid)
    y = _state(seed)
    ops = _ops(grid, y[-1], D_full)
    tau = _initial_tangent(grid, y, direction, ops)
    points = [_make_point(grid, y, tau, ops, 0.0)]
    status = "max steps"
    while len(points) < controls.max_steps:
        y_pred = y + ds * tau
        y_new, iters, ops_new = _correct(grid, y_pred, y, tau, ds, controls, D_full)
        if y_new is not None:
            tau_new = _tangent(grid, y_new, tau, ops_new)
            if _inner(grid.l2_weights, tau_new, tau) < controls.min_cos:
                y_new = None
        if y_new is None:
            ds /= 2
            if ds < controls.ds_min:
                status = "step underflow"
                break
            continue
        y, tau = y_new, tau_new
        points.append(_make_point(grid, y, tau, ops_new, ds))
        if iters <= controls.fast_corrector:
            ds = min(2 * ds, controls.ds_max)
        if not lo <= y[-1] <= hi:
            status = "range exit"
            break
        if len(points) >= 3 and all(p.norm_sq < 1e-20 for p in points[-3:]):
            status = "collapsed to trivial"
            break
    branch = Branch(points, {"alpha": seed.alpha, "direction": direction}, status=status, grid=grid)
    branch.folds = detect_folds(branch)
    log.info("branch from alpha=%.4f dir=%+d: %d points, %s", seed.alpha, direction, len(points), status)
    return branch


def _join(backward: Branch, forward: Branch) -> Branch:
    pts = backward.points[::-1]
    for p in pts:
        p.tangent = -p.tangent
    pts = pts + forward.points[1:]
    branch = Branch(pts, forward.seed, status=f"{backward.status}/{forward.status}", grid=forward.grid)
    branch.folds = detect_folds(branch)
    return branch


def detect_folds(branch: Branch, refine: bool = True) -> list[float]:
    """``alpha`` values where the tangent's ``alpha``-component changes sign.

    With an attached grid the fold is refined by bisection in arclength,
    re-solving the bordered system between the bracketing points; otherwise
    the extremum of the parabola through the neighbouring points is used.
    """
    pts = branch.points
    if len(pts) < 3:
        return []
    folds = []
    for i in range(len(pts) - 1):
        a, b = pts[i].tangent[-1], pts[i + 1].tangent[-1]
        if a == 0 or np.sign(a) == np.sign(b):
            continue
        if refine and branch.grid is not None:
            folds.append(_bisect_fold(branch.grid, pts[i], pts[i + 1]))
        else:
            folds.append(_parabola_fold(pts, i))
    return folds


def _parabola_fold(pts, i) -> float:
    j = min(max(i, 1), len(pts) - 2)
    trio = pts[j - 1 : j + 2]
    s = [0.0]
    for a, b in zip(trio, trio[1:]):
        s.append(s[-1] + _dist(None, a, b))
    al = [p.alpha for p in trio]
    c = np.polyfit(s, al, 2)
    if c[0] == 0:
        return float(max(al) if pts[i].tangent[-1] > 0 else min(al))
    s_star = -c[1] / (2 * c[0])
    return float(np.polyval(c, s_star))


def _bisect_fold(grid, p0: BranchPoint, p1: BranchPoint, iters: int = 40) -> float:
    controls = ContinuationControls(max_corrector=12)
    D_full = disc._cached_D(grid)
    y0 = _state(p0)
    tau0 = p0.tangent
    sign0 = np.sign(tau0[-1])
    s_lo, s_hi = 0.0, _dist(grid, p0, p1)
    # best estimate so far: the extreme alpha among the solved points
    pick = max if sign0 > 0 else min
    best = pick(p0.alpha, p1.alpha)
    for _ in range(iters):
        s = 0.5 * (s_lo + s_hi)
        y, _, ops = _correct(grid, y0 + s * tau0, y0, tau0, s, controls, D_full)
        if y is None:
            break
        best = pick(best, float(y[-1]))
        tau = _tangent(grid, y, tau0, ops)
        if np.sign(tau[-1]) == sign0:
            s_lo = s
        else:
            s_hi = s
        if s_hi - s_lo < 1e-12:
            break
    return float(best)


def _seed_solution(grid, n, eps, tol):
    alpha = 2 ** (1 / n) + eps
    ops = disc.build_operators(grid, alpha, Mode.FAMILY_A)
    guess = perturbation_guess(n, eps, grid.interior)
    return newton_solve(ops, guess, tol)


def _on_branch(grid, branch: Branch, sol: SolveResult, tol: float = 1e-6) -> bool:
    for r in _crossings(grid, branch, sol.alpha):
        if _same(r.values, sol.values, tol):
            return True
    return False


def _same(v, w, tol) -> bool:
    scale = max(np.max(np.abs(v)), np.max(np.abs(w)), 1e-300)
    return float(np.max(np.abs(v - w))) <= tol * max(scale, 1.0)


def _crossings(grid, branch: Branch, alpha: float, tol: float = NEWTON_TOL) -> list:
    out = []
    pts = branch.points
    for a, b in zip(pts, pts[1:]):
        if (a.alpha - alpha) * (b.alpha - alpha) > 0:
            continue
        if a.alpha == b.alpha:
            w = 0.0
        else:
            w = (alpha - a.alpha) / (b.alpha - a.alpha)
        guess = (1 - w) * a.values + w * b.values
        ops = disc.build_operators(grid, alpha, Mode.FAMILY_A)
        r = newton_solve(ops, guess, tol)
        if r.converged:
            out.append(r)
    return out


def atlas(
    n_values,
    epsilon_seed: float = 0.01,
    alpha_window: tuple = (1.3, 4.2),
    controls: ContinuationControls | None = None,
    *,
    grid: Grid,
) -> Atlas:
    """Seed at ``alpha_n +- epsilon_seed`` and trace every branch across the window.

    Seeds that fail to converge, or that land on a branch already traced, are
    recorded in ``failures`` and skipped.
    """
    lo, hi = sorted(alpha_window)
    if not hi > lo:
        raise DomainError("alpha window is degenerate")
    controls = controls or ContinuationControls()
    branches, failures = [], []
    for n in n_values:
        for eps in (epsilon_seed, -epsilon_seed):
            a = 2 ** (1 / n) + eps
            if not lo <= a <= hi:
                continue
            seed = _seed_solution(grid, n, eps, controls.tol)
            if not seed.converged or seed.classification == "trivial":
                failures.append({"n": n, "epsilon": eps, "reason": seed.message or "trivial seed"})
                continue
            if any(_on_branch(grid, b, seed) for b in branches):
                log.info("seed n=%d eps=%+g already covered", n, eps)
                continue
            fwd = trace_branch(seed, (lo, hi), controls=controls, grid=grid, direction=1)
            bwd = trace_branch(seed, (lo, hi), controls=controls, grid=grid, direction=-1)
            branch = _join(bwd, fwd)
            branch.seed = {"n": n, "epsilon": eps, "alpha": a}
            branches.append(branch)
    return Atlas(branches, (lo, hi), failures, grid)


def _snap_trivial(r: SolveResult, newton_tol: float) -> SolveResult:
    # Where a branch crosses v = 0 the Jacobian is singular and Newton only
    # pins v down to about sqrt(tol); such iterates are the constant solution.
    if np.max(np.abs(r.values)) <= 10 * math.sqrt(newton_tol):
        r.values = np.zeros_like(r.values)
        r.classification = "trivial"
        r.message = "resolved to the constant solution"
    return r


def solutions_at(atlas: Atlas, alpha: float, tol: float = 1e-6) -> list[SolveResult]:
    """Distinct solutions where the atlas branches cross ``alpha``.

    Each crossing is re-solved at fixed ``alpha`` from the interpolated
    neighbouring branch points; duplicates (relative infinity-distance below
    ``tol``) are dropped.
    """
    lo, hi = atlas.window
    if not lo <= alpha <= hi:
        raise DomainError(f"alpha = {alpha} outside the atlas window {atlas.window}")
    found: list[SolveResult] = []
    for branch in atlas.branches:
        for r in _crossings(atlas.grid, branch, alpha):
            r = _snap_trivial(r, NEWTON_TOL)
            if not any(_same(r.values, f.values, tol) for f in found):
                found.append(r)
    return found
