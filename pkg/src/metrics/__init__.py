"""
Class-incremental evaluation metrics.
"""
from .accuracy import AccuracyMatrix, aia, evaluate_task, faa, forgetting, stage_accuracies
from .report import metrics_report, seed_summary, write_report
