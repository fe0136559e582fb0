"""Mixture-prior information criteria for multivariate linear regression."""

from .criteria import (
    AIC,
    AICc,
    BIC,
    GIC,
    MPIC,
    BetaPosterior,
    ConstantAlpha,
    InversePower,
    Oracle,
    PowerAlpha,
    PriorKind,
    RatioPower,
    Score,
    log_weight,
    penalty_exact_aic,
    score,
    weight,
)
from .errors import (
    DataError,
    DegenerateResiduals,
    DimensionGuard,
    MissingFit,
    MpicselError,
    NoScoreableModel,
    RankDeficient,
    SigmaNotPD,
    TooManyModels,
)
from .regression import Dataset, FitResult, ModelIndex, fit, logdet_capacitance, quadform_smoothed
from .selection import Explicit, ForcedSubsets, Nested, SelectionReport, select, select_many

__version__ = "0.1.0"

__all__ = [
    "AIC", "AICc", "BIC", "GIC", "MPIC", "Oracle",
    "BetaPosterior", "ConstantAlpha", "InversePower", "PowerAlpha", "PriorKind", "RatioPower",
    "Score", "log_weight", "penalty_exact_aic", "score", "weight",
    "DataError", "DegenerateResiduals", "DimensionGuard", "MissingFit", "MpicselError",
    "NoScoreableModel", "RankDeficient", "SigmaNotPD", "TooManyModels",
    "Dataset", "FitResult", "ModelIndex", "fit", "logdet_capacitance", "quadform_smoothed",
    "Explicit", "ForcedSubsets", "Nested", "SelectionReport", "select", "select_many",
]
