"""Matrix factor models with time-varying grand mean and row/column main effects."""

from .linalg import EigenTopK, double_center, space_distance, sym_eig_topk
from .model import (
    DegenerateFitWarning,
    FMFit,
    MEFMFit,
    MeanEffects,
    detrend,
    estimate_factors,
    estimate_loadings,
    estimate_mean_effects,
    fit_fm,
    fit_mefm,
    fm_to_mefm,
)
from .rank import RankSelection, select_ranks
from .fmtest import TestResult, empirical_quantile, residual_max_stats, run_fm_vs_mefm_test
from .dgp import DGPConfig, GroundTruth, gen_dataset, preset
from .harness import ReplicationSummary, power_curve, relative_mse, run_replications

__all__ = [
    "DGPConfig",
    "DegenerateFitWarning",
    "EigenTopK",
    "FMFit",
    "GroundTruth",
    "MEFMFit",
    "MeanEffects",
    "RankSelection",
    "ReplicationSummary",
    "TestResult",
    "detrend",
    "double_center",
    "empirical_quantile",
    "estimate_factors",
    "estimate_loadings",
    "estimate_mean_effects",
    "fit_fm",
    "fit_mefm",
    "fm_to_mefm",
    "gen_dataset",
    "power_curve",
    "preset",
    "relative_mse",
    "residual_max_stats",
    "run_fm_vs_mefm_test",
    "run_replications",
    "select_ranks",
    "space_distance",
    "sym_eig_topk",
]

__version__ = "0.1.0"
