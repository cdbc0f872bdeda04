"""Numerical laboratory for standing-wave solitons of the nonlinear
Klein-Gordon equation: charge-constrained minimization on a radial
grid, threshold estimation, bound-state multiplicity, and direct time
evolution for stability checks."""

from .errors import (
    BasinExitError,
    CflError,
    CollapseError,
    ConfigError,
    ConstructionError,
    DecompositionError,
    EvolutionAborted,
    GridGeometryError,
    GroundStateNotFound,
    ModelDomainError,
    ModelRangeError,
    NkgError,
)
from .nonlinearity import (
    ConditionReport,
    NonlinearityModel,
    PolynomialR,
    TruncatedR,
    WellsR,
    check_conditions,
    decompose_negative_set,
    evaluate,
    load_model_file,
    model_hash,
    parse_model_text,
    truncate_model,
)
from .radial import (
    FunctionalValues,
    RadialGrid,
    bump_functionals_exact,
    compute_functionals,
    decay_diagnostic,
    gradient_e_sigma,
    gradient_j0,
    make_bump,
    rescale,
    rescale_prediction,
    static_residual,
)
from .minimize import (
    LocalMinCertificate,
    MultiplicityResult,
    SolverConfig,
    StandingWaveResult,
    certify_local_min,
    find_bound_state_in_basin,
    find_ground_state,
    find_multiple_states,
    minimize_energy,
)
from .dynamics import (
    ComplexFieldState,
    StabilityReport,
    conserved_charge,
    conserved_energy,
    embed_standing_wave,
    evolve,
    orbit_distance,
    stability_experiment,
)
from .thresholds import (
    ThresholdReport,
    bump_upper_bounds,
    check_small_frequency,
    constrained_j0_minimum,
    estimate_kbar,
    estimate_sigma_b,
    estimate_sigma_g,
    make_threshold_report,
)

__version__ = "0.1.0"
