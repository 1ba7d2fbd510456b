"""Area-level small area estimation with correlated measurement and sampling errors.

This package provides:
- Validated area datasets with known error covariances
- Moment/ML estimation of (beta0, beta1, sigma2_b) and the shrinkage predictor
- Jackknife MSPE estimation and parameter covariance
- Fay-Herriot and Ybarra-Lohr comparators
- Unit-level survey preparation with pooled delta-method covariances
"""
# Core types
from .types import (
    # Enums
    Method,
    Distribution,
    PsiPattern,
    JkScale,
    # Area types
    ErrorCov,
    AreaObservation,
    ModelParams,
    LatentTruth,
    # Result types
    MomentStats,
    FitResult,
    PredictionRecord,
    JackknifeSet,
    JackknifeCovariance,
    MspeRecord,
    # Survey types
    UnitRecord,
    PreparedArea,
)

# Errors
from .errors import (
    SaeError,
    ValidationError,
    NumericalError,
    DimensionMismatch,
    NonPSDCovariance,
    NonFiniteValue,
    TooFewAreas,
    SchemaError,
    EmptyArea,
    SingletonArea,
    NonPositiveMean,
    InsufficientDegreesOfFreedom,
    SingularMomentMatrix,
    NonPositiveTotalVariance,
    JackknifeDegenerate,
    SimulationUnstable,
)

# Dataset
from .dataset import AreaDataset, validate_dataset

# Estimation
from .estimation import (
    compute_moments,
    estimate_beta,
    solve_moments,
    delta_variances,
    sigma2_b_yl,
    profile_loglik,
    maximize_on_interval,
    estimate_sigma2_b_ml,
    fit_mecor,
)

# Prediction
from .prediction import (
    residual_v,
    shrinkage_terms,
    predict_theta,
    predict_dataset,
)

# MSPE
from .mspe import (
    jackknife_refits,
    mspe_estimate,
    apply_lower_bound,
    nonpositive_areas,
    jackknife_covariance,
)

# Baselines
from .baselines import BaselineResult, fit_fh, fit_yl, fh_mspe, direct_predictions

# Survey preparation
from .survey_prep import (
    PrepResult,
    area_means,
    within_area_cov,
    delta_transform,
    pool_psi,
    prepare,
)

__all__ = [
    # Enums
    "Method",
    "Distribution",
    "PsiPattern",
    "JkScale",
    # Area types
    "ErrorCov",
    "AreaObservation",
    "ModelParams",
    "LatentTruth",
    # Result types
    "MomentStats",
    "FitResult",
    "PredictionRecord",
    "JackknifeSet",
    "JackknifeCovariance",
    "MspeRecord",
    # Survey types
    "UnitRecord",
    "PreparedArea",
    # Errors
    "SaeError",
    "ValidationError",
    "NumericalError",
    "DimensionMismatch",
    "NonPSDCovariance",
    "NonFiniteValue",
    "TooFewAreas",
    "SchemaError",
    "EmptyArea",
    "SingletonArea",
    "NonPositiveMean",
    "InsufficientDegreesOfFreedom",
    "SingularMomentMatrix",
    "NonPositiveTotalVariance",
    "JackknifeDegenerate",
    "SimulationUnstable",
    # Dataset
    "AreaDataset",
    "validate_dataset",
    # Estimation
    "compute_moments",
    "estimate_beta",
    "solve_moments",
    "delta_variances",
    "sigma2_b_yl",
    "profile_loglik",
    "maximize_on_interval",
    "estimate_sigma2_b_ml",
    "fit_mecor",
    # Prediction
    "residual_v",
    "shrinkage_terms",
    "predict_theta",
    "predict_dataset",
    # MSPE
    "jackknife_refits",
    "mspe_estimate",
    "apply_lower_bound",
    "nonpositive_areas",
    "jackknife_covariance",
    # Baselines
    "BaselineResult",
    "fit_fh",
    "fit_yl",
    "fh_mspe",
    "direct_predictions",
    # Survey preparation
    "PrepResult",
    "area_means",
    "within_area_cov",
    "delta_transform",
    "pool_psi",
    "prepare",
]
