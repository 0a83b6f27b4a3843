"""Quantitative stability of perturbed isometries.

Tools for bounding how far a distance-respecting bijection can move
midpoints, certifying those bounds on sampled maps, recovering signed
coordinate bijections from expansion-bounded operators on sup-norm
spaces, and searching for worst-case deviation ratios.
"""

from .errors import (
    BudgetExceeded,
    CapExceeded,
    CardinalityMismatch,
    ConditionIIViolated,
    ConfigError,
    DimensionMismatch,
    EmptyForBothSigns,
    EpsVanishes,
    HalvingViolated,
    HypothesisFailed,
    IndexOutOfRange,
    InversionDiverged,
    IsoperturbError,
    MissingTableEntry,
    ModulusMismatch,
    MTooLarge,
    NegativeInput,
    NonFinite,
    NotBijective,
    NotSingleValued,
    OutOfRange,
    PositiveOverflow,
    RecoveryFailed,
)
from .perturb import (
    ITERATION_CAP,
    OVERFLOW_CEILING,
    HalvingCheck,
    IntegralCheck,
    PerturbationFunction,
    check_halving,
    evaluate,
    gap,
    integral_bound_check,
    iterate,
)
from .bounds import (
    MidpointBoundReport,
    bilip_bound,
    dyadic_k_for_eps,
    exp_majorant,
    hyers_ulam_bound,
    midpoint_bound,
    net_bound,
    optimize_bound,
    power_alpha_bound,
    trivial_bound,
)
from .spaces import (
    Composite,
    CoordinatewiseVestfrid,
    EmpiricalModulus,
    NoisyIsometry,
    RepairResult,
    SignedPermutation,
    SpacePoint,
    Vestfrid1D,
    check_against_bound,
    deviation_sup_oracle,
    greedy_separated_net,
    map_from_json,
    map_to_json,
    measure_eps,
    midpoint_deviation,
    repair_to_bijection,
)
from .banach_stone import (
    M_LIMIT,
    OperatorOracle,
    RecoveredIsometry,
    candidate_set,
    candidate_threshold,
    expansion_gap,
    modulus_check,
    recover,
    separation_margin,
    sign_check,
    stability_report,
)
from .keps import (
    KepsInstance,
    PiecewiseLinearMap,
    canonical_kink,
    search_lower_bound,
    upper_bounds,
    vestfrid_ratio,
)
from .verify import CriterionResult, run_criterion, run_suite

__version__ = "0.1.0"
