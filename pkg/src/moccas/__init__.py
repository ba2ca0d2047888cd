"""Coverage-driven sequential search over multi-objective design spaces.

The engine proposes one design per iteration, balancing three pressures:
the next outcome should be feasible (every objective above its threshold),
novel (at least a resolution radius away from everything already observed),
and informative (optimistic where the surrogate is uncertain). Exact GP
surrogates model each objective independently; selection works either over
a finite candidate pool or a continuous box domain.
"""

from .acquisition import (
    OptimismSchedule,
    SoftAcqParams,
    feasibility_gate_hard,
    hard_acquisition,
    novelty,
    p_sat,
    soft_acquisition,
    tie_break,
)
from .baselines import ClusterConfig, Policy, kmeans, select_moo_cluster
from .errors import MoccasError
from .geometry import (
    FeasibleRegion,
    OutcomeSet,
    ball_volume,
    covered_volume,
    fill_distance,
    gauss_const,
    new_coverage_hard,
)
from .gp import GpModel, KernelParams, Posterior, StandardizedGp, Standardizer
from .metrics import NOT_REACHED, aggregate_trials, aup, positives_series, t_at
from .pool import Pool, PoolOracle
from .search import (
    History,
    MocConfig,
    RunResult,
    ShortlistConfig,
    build_shortlist,
    run,
    select_continuous,
    warm_start,
)
from .synthetic import (
    FunctionOracle,
    SyntheticProblem,
    calibrate_thresholds,
    make_pool,
    make_smooth_problem,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterConfig",
    "FeasibleRegion",
    "FunctionOracle",
    "GpModel",
    "History",
    "KernelParams",
    "MocConfig",
    "MoccasError",
    "NOT_REACHED",
    "OptimismSchedule",
    "OutcomeSet",
    "Policy",
    "Pool",
    "PoolOracle",
    "Posterior",
    "RunResult",
    "ShortlistConfig",
    "SoftAcqParams",
    "StandardizedGp",
    "Standardizer",
    "SyntheticProblem",
    "aggregate_trials",
    "aup",
    "ball_volume",
    "build_shortlist",
    "calibrate_thresholds",
    "covered_volume",
    "feasibility_gate_hard",
    "fill_distance",
    "gauss_const",
    "hard_acquisition",
    "kmeans",
    "make_pool",
    "make_smooth_problem",
    "new_coverage_hard",
    "novelty",
    "p_sat",
    "positives_series",
    "run",
    "select_continuous",
    "select_moo_cluster",
    "soft_acquisition",
    "t_at",
    "tie_break",
    "warm_start",
]
