"""Series, spectral and continuation tools for ``u'(t) + u(t) = u(alpha t)**2``."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ClassificationError,
    ConfigurationError,
    ConstructionError,
    DomainError,
    NumericalDegeneracyError,
)
from .qseries import (  # noqa: E402
    PrecisionConfig,
    SeriesSolution,
    build_series,
    characteristic_alpha,
    characteristic_series,
    characteristic_zeros,
    euler_product,
    evaluate_E,
    lemma1_sum,
)
from .moments import (  # noqa: E402
    ScalingRecord,
    limiting_residual,
    perturbation_guess,
    perturbation_residual,
    scaling_coefficient,
    scaling_table,
)
from .discretization import (  # noqa: E402
    Grid,
    Mode,
    OperatorSet,
    build_operators,
    gauss_laguerre,
    truncated_grid,
)
from .solver import (  # noqa: E402
    SolveResult,
    characteristic_solve,
    classify,
    count_zeros,
    newton_solve,
    solve_family_b,
)
from .continuation import Atlas, Branch, BranchPoint, atlas, detect_folds, solutions_at, trace_branch  # noqa: E402

__all__ = [
    "__version__",
    "ClassificationError",
    "ConfigurationError",
    "ConstructionError",
    "DomainError",
    "NumericalDegeneracyError",
    "PrecisionConfig",
    "SeriesSolution",
    "build_series",
    "characteristic_alpha",
    "characteristic_series",
    "characteristic_zeros",
    "euler_product",
    "evaluate_E",
    "lemma1_sum",
    "ScalingRecord",
    "limiting_residual",
    "perturbation_guess",
    "perturbation_residual",
    "scaling_coefficient",
    "scaling_table",
    "Grid",
    "Mode",
    "OperatorSet",
    "build_operators",
    "gauss_laguerre",
    "truncated_grid",
    "SolveResult",
    "characteristic_solve",
    "classify",
    "count_zeros",
    "newton_solve",
    "solve_family_b",
    "Atlas",
    "Branch",
    "BranchPoint",
    "atlas",
    "detect_folds",
    "solutions_at",
    "trace_branch",
]
