"""Robust forward investment criteria: simulation, verification, and exact
finite-market oracles.

The package covers one pipeline end to end:

* simulate reference and drift-shifted market scenarios with
  counter-based, thread-count-independent noise (``paths``),
* form candidate measures, densities and ambiguity penalties
  (``measures``),
* build the logarithmic robust forward criterion field, its convex dual
  and the equivalent non-robust criteria (``criteria``, ``strategies``),
* verify the saddle-point structure by Monte Carlo drift tests and
  perturbation scans (``verify``),
* solve small multinomial-tree instances exactly, primal and dual, with
  dynamic-programming and time-consistency diagnostics (``oracle``),
* measure pointwise drift relations and HJB residuals of sampled dual
  fields (``dualpde``).

``cli`` exposes the ``robust-forward`` command; every experiment is a JSON
config mapped to deterministic results.
"""

from ._rng import derive_seed, substream
from .criteria import (
    CriterionField,
    CriterionProcess,
    EquivalentFields,
    StandardForwardField,
    conjugate_by_grid,
    criterion_process,
    dual_eval,
    equivalent_mpr,
    equivalent_standard_fields,
    field_log,
)
from .dualpde import (
    CappedQuadraticIntegrand,
    DriftResult,
    QuadraticIntegrand,
    ResidualReport,
    TabulatedIntegrand,
    dense_grid_drift,
    drift_from_relation,
    hjb_residual,
    log_curvature,
    polynomial_mpr_accumulator,
    sample_dual_field,
)
from .measures import (
    CocycleReport,
    DegeneratePenalty,
    EntropicPenalty,
    GeneratorPair,
    MeasureChange,
    PenaltyReport,
    QuadraticPenalty,
    ReferenceOnlyPenalty,
    StateDensity,
    cocycle_residual,
    doleans,
    girsanov_shift,
    penalty_value,
    state_density,
)
from .oracle import (
    ArbitrageError,
    ConsistentHorizon,
    DualSolution,
    DualityReport,
    EntropicKernels,
    ExpUtility,
    FiniteKernels,
    HorizonTable,
    Kernel,
    ListedMeasureSet,
    LogUtility,
    MeasureFamily,
    PastingError,
    PowerUtility,
    TreeMarket,
    TreeSolution,
    UnsupportedInstanceError,
    bundled_instance,
    certainty_equivalent_log,
    check_dpp,
    check_time_consistency,
    duality_gap,
    entropic_equivalence_check,
    inconsistency_demo_continuous,
    instance_from_json,
    solve_dual,
    solve_primal,
)
from .paths import (
    CoefficientPaths,
    Ensemble,
    MarketCoefficients,
    PathBundle,
    TimeGrid,
    WealthPath,
    WealthPaths,
    ensemble_manifest,
    ensemble_to_csv,
    simulate_ensemble,
    wealth_from_strategy,
    write_ensemble,
)
from .strategies import (
    ConstantFraction,
    FractionalKelly,
    ScaledStrategy,
    TabulatedStrategy,
    fractional_kelly_fractions,
    restrict_strategy,
    strategy_from_config,
    worst_case_generator,
)
from .verify import (
    DriftReport,
    SaddleReport,
    drift_test,
    dual_submartingale_test,
    self_generation_scan,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # rng
    "derive_seed",
    "substream",
    # paths
    "TimeGrid",
    "MarketCoefficients",
    "CoefficientPaths",
    "Ensemble",
    "PathBundle",
    "WealthPaths",
    "WealthPath",
    "simulate_ensemble",
    "wealth_from_strategy",
    "ensemble_to_csv",
    "ensemble_manifest",
    "write_ensemble",
    # measures
    "GeneratorPair",
    "MeasureChange",
    "StateDensity",
    "QuadraticPenalty",
    "EntropicPenalty",
    "DegeneratePenalty",
    "ReferenceOnlyPenalty",
    "PenaltyReport",
    "CocycleReport",
    "doleans",
    "state_density",
    "girsanov_shift",
    "penalty_value",
    "cocycle_residual",
    # criteria
    "CriterionField",
    "StandardForwardField",
    "CriterionProcess",
    "EquivalentFields",
    "field_log",
    "dual_eval",
    "conjugate_by_grid",
    "criterion_process",
    "equivalent_mpr",
    "equivalent_standard_fields",
    # strategies
    "FractionalKelly",
    "ConstantFraction",
    "TabulatedStrategy",
    "ScaledStrategy",
    "fractional_kelly_fractions",
    "worst_case_generator",
    "restrict_strategy",
    "strategy_from_config",
    # verify
    "DriftReport",
    "SaddleReport",
    "drift_test",
    "self_generation_scan",
    "dual_submartingale_test",
    # oracle
    "ArbitrageError",
    "PastingError",
    "UnsupportedInstanceError",
    "TreeMarket",
    "Kernel",
    "FiniteKernels",
    "EntropicKernels",
    "MeasureFamily",
    "ListedMeasureSet",
    "ConsistentHorizon",
    "HorizonTable",
    "LogUtility",
    "PowerUtility",
    "ExpUtility",
    "TreeSolution",
    "DualSolution",
    "DualityReport",
    "solve_primal",
    "solve_dual",
    "duality_gap",
    "check_dpp",
    "check_time_consistency",
    "certainty_equivalent_log",
    "entropic_equivalence_check",
    "inconsistency_demo_continuous",
    "bundled_instance",
    "instance_from_json",
    # dualpde
    "QuadraticIntegrand",
    "CappedQuadraticIntegrand",
    "TabulatedIntegrand",
    "DriftResult",
    "ResidualReport",
    "drift_from_relation",
    "dense_grid_drift",
    "hjb_residual",
    "log_curvature",
    "sample_dual_field",
    "polynomial_mpr_accumulator",
]
