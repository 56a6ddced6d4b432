"""
Metrics, bootstrap evaluation and reference predictors

The experiment drivers live in src.evaluation.experiments and are imported
explicitly, since they depend on the whole pipeline.
"""

from .metrics import (
    METRIC_NAMES, all_metrics, avg_med_metric, ddi_rate_metric, f1_metric, jaccard_metric, prauc_metric,
)
from .bootstrap import MetricsReport, bootstrap_evaluate
from .baselines import FrequencyBaseline, RuleOracle

__all__ = [
    "METRIC_NAMES", "jaccard_metric", "ddi_rate_metric", "f1_metric", "prauc_metric", "avg_med_metric",
    "all_metrics", "MetricsReport", "bootstrap_evaluate", "FrequencyBaseline", "RuleOracle",
]
