"""Conformal risk control for ordinal classification with contiguous prediction sets."""

from .calibration import (
    JumpDiagnostics,
    SampleBreakpoints,
    calibrate_binary,
    calibrate_exact,
    jump_diagnostics,
    sample_breakpoints,
)
from .core import (
    CalibrationResult,
    Dataset,
    InfeasibleError,
    LabeledScore,
    LossSpec,
    OrdinalCRCError,
    PredictionSet,
    ScoreVector,
    ValidationError,
    WeightScheme,
    validate_dataset,
)
from .evaluation import (
    RiskReport,
    alpha_for_target_size,
    centroid_distribution,
    run_trials,
    sweep_alpha,
)
from .losses import (
    divergence_loss,
    interval_risk_divergence,
    interval_risk_weighted,
    weighted_loss,
)
from .sets import (
    build_divergence_set,
    build_set,
    build_weighted_set,
    divergence_chain,
    oracle_divergence_set,
    oracle_weighted_set,
    point_prediction,
    weighted_chain,
)

__version__ = "0.1.0"
