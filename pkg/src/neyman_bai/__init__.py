"""Fixed-budget best arm identification for Gaussian bandits with known variances.

Allocation solvers (generalized Neyman, known-best closed form, full-information
oracle), large-deviation rate bounds, block-schedule strategies, and a seeded
Monte Carlo harness.
"""

__version__ = "0.1.0"

from .allocation import (
    SolverError,
    SolverReport,
    grid_oracle,
    omega,
    solve_gna,
    solve_h_gna,
    solve_known_best,
    solve_oo,
)
from .bounds import (
    chernoff_misid_bound,
    exact_two_arm_misid,
    gna_upper_bound,
    instance_rate,
    uniform_lower_bound,
    worst_case_lower_bound,
)
from .model import BanditInstance, GapBounds, ValidationError, best_arm, gaps, validate_gap_bounds
from .sim import ExperimentConfig, SweepResult, estimate_misid, generate_instance, run_sweep
from .strategies import (
    AllocationSchedule,
    StrategySpec,
    TrialOutcome,
    build_schedule,
    eba_recommend,
    make_strategy_weights,
    run_block_strategy,
    successive_rejects,
)

__all__ = [
    "AllocationSchedule",
    "BanditInstance",
    "ExperimentConfig",
    "GapBounds",
    "SolverError",
    "SolverReport",
    "StrategySpec",
    "SweepResult",
    "TrialOutcome",
    "ValidationError",
    "best_arm",
    "build_schedule",
    "chernoff_misid_bound",
    "eba_recommend",
    "estimate_misid",
    "exact_two_arm_misid",
    "gaps",
    "generate_instance",
    "gna_upper_bound",
    "grid_oracle",
    "instance_rate",
    "make_strategy_weights",
    "omega",
    "run_block_strategy",
    "run_sweep",
    "solve_gna",
    "solve_h_gna",
    "solve_known_best",
    "solve_oo",
    "successive_rejects",
    "uniform_lower_bound",
    "validate_gap_bounds",
    "worst_case_lower_bound",
]
