"""
Bootstrap evaluation and the metrics report
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..clinical.ehr import DDIMatrix, PatientHistory, medication_matrix
from ..utils.errors import EmptyTestSet
from .metrics import METRIC_NAMES, all_metrics

REPORT_VERSION = 1

# histories -> one (T, |M|) score array per patient
Predictor = Callable[[Sequence[PatientHistory]], List[np.ndarray]]


@dataclass
class MetricsReport:
    """Per-sample metric table plus mean / sample-std summary"""
    samples: pd.DataFrame
    header: Dict[str, Any] = field(default_factory=dict)

    @property
    def mean(self) -> Dict[str, float]:
        return {m: float(self.samples[m].mean()) for m in METRIC_NAMES}

    @property
    def std(self) -> Dict[str, float]:
        if len(self.samples) < 2:
            return {m: 0.0 for m in METRIC_NAMES}
        return {m: float(self.samples[m].std(ddof=1)) for m in METRIC_NAMES}

    def __getitem__(self, metric: str) -> float:
        return self.mean[metric]

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame({"mean": self.mean, "std": self.std}).loc[list(METRIC_NAMES)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "report_version": REPORT_VERSION,
            **self.header,
            "bootstrap_samples": len(self.samples),
            "summary": {m: {"mean": self.mean[m], "std": self.std[m]} for m in METRIC_NAMES},
            "samples": {m: self.samples[m].tolist() for m in METRIC_NAMES},
        }

    def to_json(self, path: Union[str, Path]):
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    def to_csv(self, path: Union[str, Path]):
        table = self.summary().reset_index().rename(columns={"index": "metric"})
        table.insert(0, "report_version", REPORT_VERSION)
        table.to_csv(path, index=False)

    def format(self) -> str:
        return "  ".join(f"{m}={self.mean[m]:.4f}±{self.std[m]:.4f}" for m in METRIC_NAMES)


def bootstrap_evaluate(predict: Predictor, patients: Sequence[PatientHistory], ddi: DDIMatrix,
                       n_samples: int = 10, seed: int = 0, delta: float = 0.5,
                       ddi_mode: str = "standard", threads: Optional[int] = None,
                       header: Optional[Dict[str, Any]] = None) -> MetricsReport:
    """
    Resample test patients with replacement and compute every metric per resample

    Patients are sorted by id first, and resample b draws from the stream
    seeded by (seed, b), so the report does not depend on input order or on
    the thread count.

    Args:
        predict: Maps histories to per-patient (T, |M|) score arrays
        patients: Test patients
        ddi: Interaction matrix
        n_samples: Number of bootstrap resamples B
        seed: Base seed
        delta: Selection threshold
        ddi_mode: 'standard' or 'paper-literal' ('truth-pairs' is an alias)
        threads: Worker threads for the resamples

    Raises:
        EmptyTestSet: no test patients
    """
    if not patients:
        raise EmptyTestSet("bootstrap evaluation needs at least one test patient")
    if n_samples < 1:
        raise ValueError("bootstrap needs B >= 1")

    ordered = sorted(patients, key=lambda h: h.patient_id)
    scores = [np.asarray(s, dtype=np.float64) for s in predict(ordered)]
    truths = [medication_matrix([h], ddi.size) for h in ordered]
    n = len(ordered)

    def one_sample(b: int) -> Dict[str, float]:
        rng = np.random.default_rng([seed, b])
        idx = rng.integers(0, n, size=n)
        return all_metrics(
            np.concatenate([scores[i] for i in idx]),
            np.concatenate([truths[i] for i in idx]),
            ddi, delta=delta, ddi_mode=ddi_mode,
        )

    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        rows = list(pool.map(one_sample, range(n_samples)))

    report = MetricsReport(pd.DataFrame(rows, columns=list(METRIC_NAMES)), dict(header or {}))
    logger.info(f"Bootstrap ({n_samples} samples over {n} patients): {report.format()}")
    return report
