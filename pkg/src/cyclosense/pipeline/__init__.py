"""Dataset generation, experiment orchestration and reporting."""

from .config import CROP_SIZES, DEFAULT_SNR_LEVELS, ExperimentConfig, Mode
from .dataset import FeatureSet, build_feature_set, cmd_generate, cmd_scf, iter_records, load_feature_set, record_seed
from .experiments import (
    run_case1,
    run_case2,
    run_crop_sweep,
    run_experiment,
    run_feature_sweep,
    run_sense_compare,
    time_epoch,
    train_stage,
)
from .report import ExperimentReport, cmd_report, read_report, recompute_curves, write_report

__all__ = [
    "CROP_SIZES",
    "DEFAULT_SNR_LEVELS",
    "ExperimentConfig",
    "Mode",
    "FeatureSet",
    "build_feature_set",
    "cmd_generate",
    "cmd_scf",
    "iter_records",
    "load_feature_set",
    "record_seed",
    "run_case1",
    "run_case2",
    "run_crop_sweep",
    "run_experiment",
    "run_feature_sweep",
    "run_sense_compare",
    "time_epoch",
    "train_stage",
    "ExperimentReport",
    "cmd_report",
    "read_report",
    "recompute_curves",
    "write_report",
]
