"""Age-of-information scheduling under interference with per-slot channel state.

The package is organized as:

* :mod:`aoisched.model` -- networks, interference structures, channels, RNG;
* :mod:`aoisched.policies` -- scheduling policies and max-weight selection;
* :mod:`aoisched.optimizer` -- exact peak-age optima and performance bounds;
* :mod:`aoisched.simulator` -- slotted simulation, estimators, diagnostics;
* :mod:`aoisched.cli` -- config-driven experiment runner (``aoisched`` command).
"""

from .model import (
    ConflictGraph,
    ExplicitSets,
    KofN,
    Network,
    RngStream,
    enumerate_feasible_sets,
    is_feasible,
    sample_channel,
    sample_channel_matrix,
)
from .optimizer import (
    AwareSolution,
    BlindSolution,
    BoundReport,
    ConvergenceError,
    SolverSettings,
    UnschedulableLinkError,
    average_age_lower_bound,
    avg_bound_coefficient,
    build_bound_report,
    factor_four_bounds,
    kofn_mixture_from_marginals,
    kofn_waterfill,
    optimal_stationary_mixture,
    peak_bound_coefficient,
    rule_success_rates,
    solve_aware_peak,
    solve_blind_peak,
    virtual_queue_peak_bound,
)
from .policies import (
    AgeBasedPolicy,
    NeverSchedulePolicy,
    PriorityPolicy,
    SchedulingPolicy,
    SetMixture,
    SOnlyMixturePolicy,
    StationaryPolicy,
    VirtualQueuePolicy,
    marginals,
    max_weight_set,
)
from .simulator import (
    DiagnosticsReport,
    MetricsReport,
    Trajectory,
    avg_age_identity_gap,
    conservation_residuals,
    diagnose,
    expected_identity_gap,
    peak_vs_avg_slack,
    run,
    run_with_checkpoints,
    squared_identity_residuals,
)

__version__ = "0.1.0"
