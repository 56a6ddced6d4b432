"""
Cross-modal alignment over partially overlapping modalities
"""

from .contrastive import TemperatureParam, contrastive_loss, dispersion
from .coverage import CoverageReport, coverage_stats
from .pretrain import (
    PretrainConfig, PretrainResult, chance_level, intersection_pretrain, pretrain,
    retrieval_eval, run_pretraining,
)
from .records import CoverageProfile, MultimodalRecord
from .schedule import intersection_pool, intersection_schedule, rotating_schedule

__all__ = [
    "MultimodalRecord", "CoverageProfile", "TemperatureParam", "contrastive_loss", "dispersion",
    "rotating_schedule", "intersection_schedule", "intersection_pool",
    "PretrainConfig", "PretrainResult", "pretrain", "intersection_pretrain", "run_pretraining",
    "retrieval_eval", "chance_level", "CoverageReport", "coverage_stats",
]
