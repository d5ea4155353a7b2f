"""Fisher-market toolkit: consumer-theory primitives for the linear,
Cobb-Douglas, Leontief and CES families, the convex potential whose
subgradient is the negative excess demand, an entropic tatonnement
engine with verifiable step-size rules, equilibrium oracles, and a
seeded convergence-experiment harness."""

from .consumer import (
    DemandBundle,
    DemandKind,
    ElasticityReport,
    TieBreak,
    elasticity_of_demand,
    expenditure,
    hicksian_demand,
    identity_suite,
    indirect_utility,
    marshallian_demand,
    shephard_check,
)
from .model import (
    Allocation,
    Buyer,
    Family,
    Market,
    MarketFormatError,
    PriceVector,
    UnsupportedFamilyError,
    UtilityFunction,
    load_market,
    parse_market,
    serialize_market,
    validate_allocation,
)
from .oracle import (
    EquilibriumResult,
    Method,
    brute_force_tiny,
    cobb_douglas_equilibrium,
    solve_by_descent,
)
from .potentials import (
    PotentialEval,
    allocation_from_prices,
    dual_offset,
    eg_dual,
    eg_primal_objective,
    excess_demand,
    potential,
    subgradient_check,
)
from .tatonnement import (
    Kernel,
    KernelSpec,
    Policy,
    Status,
    StepPolicy,
    Trajectory,
    compute_gamma,
    nonconverged,
    read_trajectory_csv,
    run,
    step_entropic,
    step_euclidean,
    verify_demand_bounds,
    verify_descent_bound,
    verify_step_lemmas,
    write_trajectory_csv,
)

__version__ = "0.1.0"
