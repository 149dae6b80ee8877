"""Objective, training loop, evaluation and the modality ablation harness."""

from .data import PreparedData, prepare, prepare_with
from .loss import LossParts, band_labels, total_loss
from .metrics import (Metrics, SubgroupReport, TargetMetrics, band_accuracy, band_accuracy_7, confusion_matrix,
                      metrics, subgroup_report)
from .loop import EpochRecord, TrainReport, train
from .evaluate import EvaluationResult, evaluate, prediction_frame
from .ablation import ABLATION_CONFIGS, AblationResult, run_ablation
