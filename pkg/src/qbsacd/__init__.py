"""Skew-QBS-ACD duration models: distribution, estimation, diagnostics and Monte Carlo tools."""
from .acd import ExplosivePathError, ParamVector, PathInit, loglik, quantile_path
from .dist import EBS, SkewQBS
from .estimate import (EcmConfig, FitReport, fit_baseline, fit_direct_ml, fit_ecm,
                       profile_q, starting_values)

__all__ = [
    "EBS", "SkewQBS", "ParamVector", "PathInit", "ExplosivePathError", "loglik",
    "quantile_path", "EcmConfig", "FitReport", "fit_ecm", "fit_direct_ml", "fit_baseline",
    "profile_q", "starting_values",
]
__version__ = "0.1.0"
