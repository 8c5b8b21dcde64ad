"""samlab: a numerical laboratory for GD, SAM, and USAM dynamics."""

from .core import (
    DEFAULT_EPS_GRAD,
    DegenerateGradientError,
    GradientCheckReport,
    HyperParams,
    OptimizerKind,
    RunStatus,
    Trajectory,
    check_gradient,
    default_blowup_radius,
    finite_diff_grad,
    gd_step,
    run,
    sam_step,
    usam_step,
)
from .losses import (
    SCALAR_LOSSES,
    SQRT_LOSS,
    SYMMETRIZED_LOGISTIC,
    MatrixSensingInstance,
    MatrixSensingLoss,
    QuadraticLoss,
    ScalarFactorizationLoss,
    ScalarLossSpec,
    SingleNeuronInit,
    SingleNeuronLoss,
    SmoothnessProfile,
    gen_matrix_sensing,
    sensing_test_error,
    sensing_value_grad,
    sqrt_loss,
    symmetrized_logistic,
    verify_scalar_assumptions,
)
from .analysis import (
    HypothesisError,
    PhaseReport,
    StabilityVerdict,
    TrapReport,
    TravelBound,
    detect_phases,
    detect_trap,
    final_phase_box,
    gd_limit_bracket,
    gd_limit_measure,
    sam_descent_residual,
    sam_loss_bound,
    scalar_fact_verdicts,
    travel_bound,
    usam_pl_descent_check,
    usam_pl_rate,
    usam_quadratic_verdict,
    usam_trap_threshold,
)

from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from .presets import PRESETS, preset

__version__ = "0.1.0"
