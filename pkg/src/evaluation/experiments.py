"""
Experiment drivers: ablation, modality-count sweep, alignment-mode comparison
and parameter sweep

Each driver returns structured results for one seed; run_experiment flattens
them into a long-format table with one row per configuration x metric x seed.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import pandas as pd
from loguru import logger

from ..align import intersection_pool
from ..core.pipeline import VARIANTS, MKMedPipeline
from ..utils.config_loader import Config
from ..utils.data_io import Dataset
from ..utils.errors import ConfigError, EmptyIntersection, ModalityUnderfilled, UnknownVariant
from .bootstrap import MetricsReport
from .metrics import METRIC_NAMES

EXPERIMENTS = ("ablation", "modality-sweep", "alignment-comparison", "param-sweep")
SWEEP_ORDER = ("structure", "text", "image", "props", "kg")
ALIGNMENT_MODES = ("rotating", "intersection")
COLUMNS = ["experiment", "configuration", "metric", "seed", "value", "config_hash"]


@dataclass
class SweepPoint:
    k: int
    modalities: Sequence[str]
    dispersion: Optional[float]
    report: Optional[MetricsReport]


@dataclass
class AlignmentPoint:
    k: int
    mode: str
    pool_size: int
    pool_fraction: float
    report: Optional[MetricsReport]


@dataclass
class ExperimentReport:
    """Long-format experiment table"""
    name: str
    config_hash: str
    rows: List[Dict] = field(default_factory=list)

    def add(self, configuration: str, metric: str, seed: int, value: Optional[float]):
        self.rows.append({
            "experiment": self.name, "configuration": configuration, "metric": metric,
            "seed": seed, "value": value, "config_hash": self.config_hash,
        })

    def add_report(self, configuration: str, seed: int, report: Optional[MetricsReport]):
        for metric in METRIC_NAMES:
            self.add(configuration, metric, seed, None if report is None else report.mean[metric])

    def frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=COLUMNS)
        frame["value"] = pd.to_numeric(frame["value"], errors="coerce")
        return frame

    def to_csv(self, path: Union[str, Path]):
        self.frame().to_csv(path, index=False, float_format="%.10g")


def run_ablation(variant: str, config: Config, dataset: Dataset, seed: Optional[int] = None) -> MetricsReport:
    """
    Raises:
        UnknownVariant: variant outside full/mol/pt/pm
    """
    if variant not in VARIANTS:
        raise UnknownVariant(f"unknown variant {variant!r}; expected one of {list(VARIANTS)}")
    return MKMedPipeline(config, dataset, seed).run_variant(variant).report


def run_modality_sweep(config: Config, dataset: Dataset, seed: Optional[int] = None,
                       ks: Sequence[int] = range(len(SWEEP_ORDER) + 1)) -> List[SweepPoint]:
    """
    Rotating pre-training over the first k modalities of the fixed order, k = 0
    meaning no pre-training; dispersion is measured on the corpus after
    pre-training
    """
    pipeline = MKMedPipeline(config, dataset, seed)
    points = []
    for k in ks:
        modalities = SWEEP_ORDER[:k]
        suite = pipeline.build_suite()
        try:
            if k > 0:
                pipeline.pretrain(suite, modalities, "rotating")
        except ModalityUnderfilled as e:
            logger.warning(f"modality sweep k={k}: {e}; recorded as null")
            points.append(SweepPoint(k, modalities, None, None))
            continue
        spread = pipeline.corpus_dispersion(suite)
        _, _, report = pipeline.finish("pt" if k == 0 else "full", suite)
        logger.info(f"modality sweep k={k}: jaccard {report['jaccard']:.4f}, dispersion {spread:.4f}")
        points.append(SweepPoint(k, modalities, spread, report))
    return points


def _pool(dataset: Dataset, modalities: Sequence[str], mode: str) -> int:
    if mode == "intersection":
        return len(intersection_pool(dataset.records, modalities))
    return min(sum(1 for r in dataset.records if r.has(m)) for m in modalities)


def run_alignment_comparison(config: Config, dataset: Dataset, seed: Optional[int] = None,
                             ks: Sequence[int] = range(1, len(SWEEP_ORDER) + 1)) -> List[AlignmentPoint]:
    """
    Rotating against intersection pre-training for k = 1..5 modalities

    Pool size is the smallest per-modality pool in rotating mode and the
    all-modality intersection in intersection mode. An empty intersection is
    recorded with a null report.
    """
    pipeline = MKMedPipeline(config, dataset, seed)
    total = len(dataset.records)
    points = []
    for k in ks:
        modalities = SWEEP_ORDER[:k]
        for mode in ALIGNMENT_MODES:
            pool = _pool(dataset, modalities, mode)
            report = None
            suite = pipeline.build_suite()
            try:
                pipeline.pretrain(suite, modalities, mode)
                _, _, report = pipeline.finish("full", suite)
            except (EmptyIntersection, ModalityUnderfilled) as e:
                logger.warning(f"alignment comparison k={k} ({mode}): {e}; recorded as null")
            points.append(AlignmentPoint(k, mode, pool, pool / total if total else 0.0, report))
    return points


def param_sweep_configs(config: Config) -> Dict[str, Config]:
    """One-at-a-time variations of the embedding width and the GIN depth"""
    configs = {}
    for dim in config.get("experiment.dims"):
        variant = config.copy()
        variant.set("model.dim", dim)
        configs[f"dim={dim}"] = variant
    for depth in config.get("experiment.depths"):
        variant = config.copy()
        variant.set("model.gin_layers", depth)
        configs[f"gin_layers={depth}"] = variant
    return configs


def run_param_sweep(config: Config, dataset: Dataset, seed: Optional[int] = None) -> Dict[str, MetricsReport]:
    reports = {}
    for label, variant in param_sweep_configs(config).items():
        logger.info(f"parameter sweep: {label}")
        reports[label] = MKMedPipeline(variant, dataset, seed).run_variant("full").report
    return reports


def _ablation_rows(out: ExperimentReport, config: Config, dataset: Dataset, seed: int):
    for variant in VARIANTS:
        out.add_report(variant, seed, run_ablation(variant, config, dataset, seed))


def _sweep_rows(out: ExperimentReport, config: Config, dataset: Dataset, seed: int):
    for point in run_modality_sweep(config, dataset, seed):
        label = f"k={point.k}"
        out.add_report(label, seed, point.report)
        out.add(label, "dispersion", seed, point.dispersion)


def _alignment_rows(out: ExperimentReport, config: Config, dataset: Dataset, seed: int):
    for point in run_alignment_comparison(config, dataset, seed):
        label = f"k={point.k} {point.mode}"
        out.add_report(label, seed, point.report)
        out.add(label, "pool_size", seed, point.pool_size)
        out.add(label, "pool_fraction", seed, point.pool_fraction)


def _param_rows(out: ExperimentReport, config: Config, dataset: Dataset, seed: int):
    for label, report in run_param_sweep(config, dataset, seed).items():
        out.add_report(label, seed, report)


DRIVERS: Dict[str, Callable[[ExperimentReport, Config, Dataset, int], None]] = {
    "ablation": _ablation_rows,
    "modality-sweep": _sweep_rows,
    "alignment-comparison": _alignment_rows,
    "param-sweep": _param_rows,
}


def run_experiment(name: str, config: Config, dataset: Dataset,
                   seeds: Optional[Sequence[int]] = None) -> ExperimentReport:
    """
    Run a named experiment over seeds (default: experiment.seeds)

    Raises:
        ConfigError: unknown experiment name
    """
    if name not in DRIVERS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {list(EXPERIMENTS)}")
    seeds = list(seeds) if seeds is not None else list(config.get("experiment.seeds"))
    out = ExperimentReport(name, config.config_hash())
    for seed in seeds:
        logger.info(f"Experiment {name}: seed {seed}")
        DRIVERS[name](out, config, dataset, seed)
    logger.info(f"Experiment {name} finished: {len(out.rows)} rows over {len(seeds)} seeds")
    return out
