from .metrics import ConfusionMatrix, MetricsReport, binary_accuracy, confusion_matrix
from .evaluate import EvalOptions, accuracy_from_audit, evaluate_split
from .stats import DatasetStats, dataset_stats, render_stats
from .export import TrainingExportConfig, export_training_set, subsample_corpus

__all__ = [
    "ConfusionMatrix",
    "DatasetStats",
    "EvalOptions",
    "MetricsReport",
    "TrainingExportConfig",
    "accuracy_from_audit",
    "binary_accuracy",
    "confusion_matrix",
    "dataset_stats",
    "evaluate_split",
    "export_training_set",
    "render_stats",
    "subsample_corpus",
]
