"""Calibration assessment and post-hoc recalibration for just-in-time defect predictors."""

__version__ = "0.1.0"

from .binning import DEFAULT_CONFIGS, Bin, BinningConfig, ProbabilityBinner, assign_bins, bin_statistics, make_edges
from .dataset import (FoldPlan, LabeledInstance, PredictionRecord, PredictionSet, dump_predictions, load_commits,
                      load_predictions, split_folds)
from .metrics import (AccuracyReport, CalibrationReport, auc, brier, calibration_report, confusion, ece, mce,
                      reliability_series)
from .predictor import LAPredict, LogRegModel, predict, train_logreg
from .recalibration import (PlattParams, PlattScaling, TemperatureParam, TemperatureScaling, apply_platt,
                            apply_temperature, fit_platt, fit_temperature, nll)
from .stats import (SignificanceResult, dagostino_pearson, monte_carlo_normality, paired_t_test, significance,
                    wilcoxon_signed_rank)
from .protocol import MeasurementRecord, MeasurementTable, compare, run_external, run_rq1, run_rq2

__all__ = [
    "DEFAULT_CONFIGS",
    "Bin",
    "BinningConfig",
    "ProbabilityBinner",
    "assign_bins",
    "bin_statistics",
    "make_edges",
    "FoldPlan",
    "LabeledInstance",
    "PredictionRecord",
    "PredictionSet",
    "dump_predictions",
    "load_commits",
    "load_predictions",
    "split_folds",
    "AccuracyReport",
    "CalibrationReport",
    "auc",
    "brier",
    "calibration_report",
    "confusion",
    "ece",
    "mce",
    "reliability_series",
    "LAPredict",
    "LogRegModel",
    "predict",
    "train_logreg",
    "PlattParams",
    "PlattScaling",
    "TemperatureParam",
    "TemperatureScaling",
    "apply_platt",
    "apply_temperature",
    "fit_platt",
    "fit_temperature",
    "nll",
    "SignificanceResult",
    "dagostino_pearson",
    "monte_carlo_normality",
    "paired_t_test",
    "significance",
    "wilcoxon_signed_rank",
    "MeasurementRecord",
    "MeasurementTable",
    "compare",
    "run_external",
    "run_rq1",
    "run_rq2",
]
