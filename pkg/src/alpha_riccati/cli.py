"""Command-line front end.

Every subcommand writes plain data files (CSV and/or JSON) into the output
directory and records them, with SHA-256 digests, in ``manifest.json``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp
import numpy as np

from . import __version__
from . import continuation as cont
from . import discretization as disc
from . import moments, solver
from .errors import ConfigurationError, DomainError
from .qseries import PrecisionConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3

SOLVER_FMT = "{:.17e}"
TABLE_DIGITS = 20


@dataclass
class RunConfig:
    """Settings shared by all subcommands.

    Precedence is command-line flag, then config file, then these defaults.
    """

    N: int = 700
    M: float = 6.0
    bits: int = 256
    tol: float = solver.NEWTON_TOL
    max_iter: int = solver.MAX_ITER
    ds0: float = 1e-2
    ds_min: float = 1e-5
    ds_max: float = 0.1
    out: str = "results"
    format: str = "both"
    seed: int = 0

    _POSITIVE = ("N", "M", "bits", "tol", "max_iter", "ds0", "ds_min", "ds_max")

    def validate(self) -> "RunConfig":
        for name in self._POSITIVE:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive (got {getattr(self, name)})")
        if self.bits < 64:
            raise ConfigurationError("bits must be at least 64")
        if not self.ds_min <= self.ds0 <= self.ds_max:
            raise ConfigurationError("need ds_min <= ds0 <= ds_max")
        if self.format not in ("csv", "json", "both"):
            raise ConfigurationError(f"format must be csv, json or both (got {self.format!r})")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        return self

    @property
    def formats(self) -> tuple:
        return ("csv", "json") if self.format == "both" else (self.format,)

    def controls(self) -> cont.ContinuationControls:
        return cont.ContinuationControls(
            ds0=self.ds0, ds_min=self.ds_min, ds_max=self.ds_max, tol=self.tol
        )

    def snapshot(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_CASTS = {"int": int, "float": float, "str": str}


def _cast(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigurationError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            x = float(raw)
            if x != int(x):
                raise ValueError
            return int(x)
        return _CASTS[kind](raw)
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _cast(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _FIELD_TYPES:
        if key in vars(args) and getattr(args, key) is not None:
            values[key] = getattr(args, key)
    return RunConfig(**values).validate()


@dataclass
class RunManifest:
    """Config snapshot plus every emitted file with its digest."""

    command: str
    config: dict
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)
    status: int = 0
    notes: list = field(default_factory=list)

    def record(self, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.outputs.append({"path": path.name, "sha256": digest})

    def write(self, directory: Path) -> Path:
        p = directory / "manifest.json"
        doc = {}
        if p.exists():
            try:
                doc = json.loads(p.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                doc = {}
        doc.setdefault("runs", {})
        doc["toolkit_version"] = self.version
        doc["runs"][self.command] = dataclasses.asdict(self)
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class _Writer:
    """Single writer for one command run; files go to ``config.out``."""

    def __init__(self, config: RunConfig, manifest: RunManifest):
        self.dir = Path(config.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.formats = config.formats
        self.manifest = manifest

    def csv(self, name: str, header, rows) -> Path | None:
        if "csv" not in self.formats:
            return None
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self._write(name, buf.getvalue())

    def json(self, name: str, doc, force: bool = False) -> Path | None:
        if "json" not in self.formats and not force:
            return None
        return self._write(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def _write(self, name: str, text: str) -> Path:
        p = self.dir / name
        p.write_text(text, encoding="utf-8")
        self.manifest.record(p)
        return p


def _f(x) -> str:
    return SOLVER_FMT.format(float(x))


def _mp(x) -> str:
    return mp.nstr(x, TABLE_DIGITS, min_fixed=-5, max_fixed=25)


# ---------------------------------------------------------------- coeffs


def cmd_coeffs(config: RunConfig, args, writer: _Writer) -> int:
    max_n = args.max_n
    if not 1 <= max_n <= moments.N_MAX:
        raise ConfigurationError(f"--max-n must lie in 1..{moments.N_MAX}")
    rows = []
    for n in range(1, max_n + 1):
        bits = max(config.bits, moments._precision_for(n).significand_bits)
        rec = moments.scaling_coefficient(n, PrecisionConfig(significand_bits=bits))
        rows.append((n, rec))
        print(f"n={n}  C_n={mp.nstr(rec.C_n, 15)}  ||C_n E_n||={mp.nstr(rec.scaled_norm, 15)}")
    writer.csv(
        "coeffs.csv",
        ["n", "alpha_n", "C_n", "scaled_norm_L2"],
        [[n, _mp(r.alpha_n), _mp(r.C_n), _mp(r.scaled_norm)] for n, r in rows],
    )
    writer.json(
        "coeffs.json",
        {
            "rows": [
                {
                    "n": n,
                    "alpha_n": _mp(r.alpha_n),
                    "C_n": _mp(r.C_n),
                    "scaled_norm_L2": _mp(r.scaled_norm),
                    "weights": [_mp(w) for w in r.weights],
                }
                for n, r in rows
            ]
        },
    )
    return EXIT_OK


# --------------------------------------------------------- verify-linear

_CHAR_RE = re.compile(r"^2\s*(?:\^|\*\*)\s*\(\s*1\s*/\s*(\d+)\s*\)$")


def parse_characteristic(token: str) -> int:
    """Map ``'2'``, ``'2^(1/5)'`` or ``'1.148698...'`` to its index ``n``."""
    m = _CHAR_RE.match(token.strip())
    if m:
        n = int(m.group(1))
        if n < 1:
            raise ConfigurationError(f"not a characteristic value: {token!r}")
        return n
    try:
        a = float(token)
    except ValueError:
        raise ConfigurationError(f"cannot parse alpha {token!r}") from None
    if not a > 1:
        raise ConfigurationError(f"alpha must exceed 1 (got {token})")
    n = round(math.log(2) / math.log(a))
    if n < 1 or abs(a - 2 ** (1 / n)) > 1e-12:
        raise ConfigurationError(f"{token} is not a characteristic value 2^(1/n)")
    return n


def cmd_verify_linear(config: RunConfig, args, writer: _Writer) -> int:
    if not args.N_sweep:
        raise ConfigurationError("N sweep is empty")
    ns = [parse_characteristic(tok) for tok in args.alpha]
    sweep = sorted(set(args.N_sweep))
    if sweep[0] < 1:
        raise ConfigurationError("N values must be positive")
    rows, worst = [], []
    for n in ns:
        for N in sweep:
            grid = disc.truncated_grid(N, config.M, clip=True)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                err = solver.characteristic_error(grid, n)
            rows.append((2 ** (1 / n), n, N, grid.dof, err))
            print(f"alpha=2^(1/{n})  N={N:5d}  dof={grid.dof:4d}  error={err:.3e}")
        if rows[-1][-1] > args.ceiling:
            worst.append((n, rows[-1][-1]))
    writer.csv(
        "verify_linear.csv",
        ["alpha", "n", "N", "dof", "max_grid_error"],
        [[_f(a), n, N, d, _f(e)] for a, n, N, d, e in rows],
    )
    writer.json(
        "verify_linear.json",
        {"ceiling": args.ceiling, "rows": [
            {"alpha": a, "n": n, "N": N, "dof": d, "max_grid_error": e} for a, n, N, d, e in rows
        ]},
    )
    if worst:
        for n, e in worst:
            print(f"error {e:.3e} at alpha=2^(1/{n}) exceeds ceiling {args.ceiling:g}", file=sys.stderr)
        writer.manifest.notes.append(f"ceiling exceeded: {worst}")
        return EXIT_NONCONVERGENCE
    return EXIT_OK


# ----------------------------------------------------------------- solve


def cmd_solve(config: RunConfig, args, writer: _Writer) -> int:
    grid = disc.truncated_grid(config.N, config.M)
    kind = args.seed_kind
    if kind == "perturbation":
        if args.n is None or args.epsilon is None:
            raise ConfigurationError("perturbation seeds need --n and --epsilon")
        if not 1 <= args.n <= moments.N_MAX:
            raise ConfigurationError(f"--n must lie in 1..{moments.N_MAX}")
        alpha = args.alpha if args.alpha is not None else 2 ** (1 / args.n) + args.epsilon
        mode = disc.Mode.FAMILY_A
        guess = moments.perturbation_guess(args.n, args.epsilon, grid.interior)
    elif kind == "family_b":
        if args.alpha is None:
            raise ConfigurationError("family_b seeds need --alpha")
        alpha, mode = args.alpha, disc.Mode.FAMILY_B
        guess = np.exp(-grid.nodes)
    else:
        if not args.seed_file:
            raise ConfigurationError("file seeds need --seed-file")
        try:
            prior = solver.SolveResult.from_dict(json.loads(Path(args.seed_file).read_text()))
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise ConfigurationError(f"cannot load seed file: {exc}") from None
        alpha = args.alpha if args.alpha is not None else prior.alpha
        mode = disc.Mode(prior.mode)
        guess = prior.values
    if not alpha > 1:
        raise ConfigurationError(f"alpha must exceed 1 (got {alpha})")
    ops = disc.build_operators(grid, alpha, mode)
    if len(guess) != ops.size:
        raise ConfigurationError(f"seed has {len(guess)} values, grid needs {ops.size}")
    result = solver.newton_solve(ops, guess, config.tol, config.max_iter)
    print(
        f"alpha={alpha:.12g} mode={mode.value} converged={result.converged} "
        f"iterations={result.iterations} residual={result.residual_norm:.3e} "
        f"classification={result.classification}"
    )
    if not result.converged:
        writer.json("solve_diagnostics.json", result.to_dict(), force=True)
        print(f"no convergence: {result.message}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    writer.json("solve.json", result.to_dict())
    ts = np.linspace(0.0, min(args.t_max, grid.t_max), args.samples)
    dense = disc.interpolate(grid, result.values, ts)
    column = "v" if mode is disc.Mode.FAMILY_A else "u"
    writer.csv("solve_dense.csv", ["t", column], [[_f(t), _f(x)] for t, x in zip(ts, dense)])
    return EXIT_OK


# ----------------------------------------------------------------- atlas


def cmd_atlas(config: RunConfig, args, writer: _Writer) -> int:
    lo, hi = args.window
    if not (hi > lo > 1):
        raise ConfigurationError(f"alpha window [{lo}, {hi}] is degenerate or below 1")
    for n in args.n_values:
        if not 1 <= n <= moments.N_MAX:
            raise ConfigurationError(f"n must lie in 1..{moments.N_MAX}")
    grid = disc.truncated_grid(config.N, config.M)
    at = cont.atlas(args.n_values, args.epsilon_seed, (lo, hi), config.controls(), grid=grid)
    rows = []
    for bid, b in enumerate(at.branches):
        for p in b.points:
            rows.append([bid, b.seed["n"], _f(p.alpha), _f(p.n), _f(p.norm_sq), p.classification or ""])
    writer.csv("atlas_branches.csv", ["branch_id", "seed_n", "alpha", "n", "norm_sq", "class"], rows)
    writer.csv(
        "atlas_folds.csv",
        ["branch_id", "alpha", "n"],
        [[bid, _f(a), _f(math.log(2) / math.log(a))] for bid, a in at.folds],
    )
    snaps = []
    for a in args.snapshots:
        if not lo <= a <= hi:
            writer.manifest.notes.append(f"snapshot alpha={a} outside window skipped")
            continue
        sols = cont.solutions_at(at, a)
        nonconst = sum(s.classification != "trivial" for s in sols)
        print(f"alpha={a:g}: {nonconst} nonconstant solution(s)")
        for k, s in enumerate(sols):
            snaps.append((a, k, s, disc.quadrature_norm(grid, s.values) ** 2))
    writer.csv(
        "atlas_snapshots.csv",
        ["alpha", "index", "class", "norm_sq", "max_abs_v", "residual"],
        [[_f(a), k, s.classification or "", _f(q), _f(np.max(np.abs(s.values))), _f(s.residual_norm)]
         for a, k, s, q in snaps],
    )
    writer.json(
        "atlas.json",
        {
            "window": [lo, hi],
            "nodes": [float(t) for t in grid.interior],
            "branches": [
                {
                    "seed": b.seed,
                    "status": b.status,
                    "folds": b.folds,
                    "points": [
                        {"alpha": p.alpha, "norm_sq": p.norm_sq, "class": p.classification,
                         "values": [float(x) for x in p.values]}
                        for p in b.points
                    ],
                }
                for b in at.branches
            ],
            "snapshots": [
                {"alpha": a, "index": k, "class": s.classification, "norm_sq": q,
                 "values": [float(x) for x in s.values]}
                for a, k, s, q in snaps
            ],
            "failures": at.failures,
        },
    )
    for fold_branch, a in at.folds:
        print(f"fold on branch {fold_branch}: alpha={a:.8f} (n={math.log(2) / math.log(a):.6f})")
    writer.manifest.notes.extend(f"seed failure: {f}" for f in at.failures)
    covered = {b.seed["n"] for b in at.branches}
    missing = [n for n in args.n_values if n not in covered]
    if missing:
        print(f"no branch traced for n = {missing}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


# -------------------------------------------------------- residual-check


def cmd_residual_check(config: RunConfig, args, writer: _Writer) -> int:
    n = args.n
    if not 1 <= n <= moments.N_MAX:
        raise ConfigurationError(f"--n must lie in 1..{moments.N_MAX}")
    if any(e == 0 for e in args.epsilon):
        raise ConfigurationError("epsilon values must be nonzero (the limit is always emitted)")
    ts = np.linspace(0.0, args.t_max, args.samples)
    limit = [moments.limiting_residual(n, t) for t in ts]
    curves = {e: [moments.perturbation_residual(n, e, t) for t in ts] for e in args.epsilon}
    sups = {"0": float(np.max(np.abs(limit)))}
    sups.update({repr(e): float(np.max(np.abs(c))) for e, c in curves.items()})
    for key, val in sups.items():
        print(f"n={n} eps={key}: sup |r| = {val:.6e}")
    header = ["t", "r_limit"] + [f"r_eps={e!r}" for e in args.epsilon]
    rows = [[_f(t), _f(limit[i])] + [_f(curves[e][i]) for e in args.epsilon] for i, t in enumerate(ts)]
    writer.csv("residual_check.csv", header, rows)
    writer.json("residual_check.json", {"n": n, "t_max": args.t_max, "sup_norms": sups})
    return EXIT_OK


# ------------------------------------------------------------------ main


def _floats(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "both"))
    common.add_argument("-N", dest="N", type=int, help="Laguerre rule size")
    common.add_argument("-M", dest="M", type=float, help="truncation multiplier")
    common.add_argument("--bits", type=int, help="mpmath working precision")
    common.add_argument("--tol", type=float, help="Newton tolerance")
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="alpha-riccati",
        description="Solutions and bifurcations of u' + u = u(alpha t)^2.",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="scaling coefficients C_n")
    p.add_argument("--max-n", type=int, default=moments.N_MAX)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("verify-linear", parents=[common], help="characteristic nullspace vs series")
    p.add_argument("--alpha", nargs="+", default=["2"], help="values like 2, 2^(1/5) or decimals")
    p.add_argument("--N-sweep", dest="N_sweep", nargs="*", type=int,
                   default=[25, 50, 100, 200, 400, 700])
    p.add_argument("--ceiling", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify_linear)

    p = sub.add_parser("solve", parents=[common], help="Newton solve from a seed")
    p.add_argument("--seed", dest="seed_kind", choices=("perturbation", "family_b", "file"),
                   default="perturbation")
    p.add_argument("--alpha", type=_floats)
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", type=_floats)
    p.add_argument("--seed-file")
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=1001)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("atlas", parents=[common], help="continuation atlas of branches")
    p.add_argument("--n-values", nargs="+", type=int, default=[1, 2])
    p.add_argument("--window", nargs=2, type=float, default=[1.3, 4.2], metavar=("LO", "HI"))
    p.add_argument("--epsilon-seed", type=float, default=0.01)
    p.add_argument("--snapshots", nargs="*", type=float, default=[1.43, 1.46, 4.0])
    p.add_argument("--ds0", type=float)
    p.add_argument("--ds-min", dest="ds_min", type=float)
    p.add_argument("--ds-max", dest="ds_max", type=float)
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("residual-check", parents=[common], help="perturbation residual curves")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--epsilon", nargs="*", type=_floats, default=[1e-2, 1e-3])
    p.add_argument("--t-max", type=float, default=50.0)
    p.add_argument("--samples", type=int, default=501)
    p.set_defaults(func=cmd_residual_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = build_config(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = RunManifest(args.command, config.snapshot(), started=_now())
    try:
        writer = _Writer(config, manifest)
        status = args.func(config, args, writer)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NONCONVERGENCE
        manifest.notes.append(str(exc))
    manifest.status = status
    manifest.finished = _now()
    manifest.write(writer.dir)
    return status


if __name__ == "__main__":
    sys.exit(main())
