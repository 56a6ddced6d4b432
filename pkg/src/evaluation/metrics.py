"""
Recommendation metrics over visits

Predictions, truths and scores are (V, |M|) arrays: one row per visit.
"""

from typing import TYPE_CHECKING, Dict, Optional

import numpy as np

from ..utils.errors import ShapeMismatch

if TYPE_CHECKING:
    from ..clinical.ehr import DDIMatrix

METRIC_NAMES = ("jaccard", "ddi_rate", "f1", "prauc", "avg_med")


def _as_2d(name: str, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be (visits, medications), got shape {a.shape}")
    return a


def _pair(pred, truth):
    pred, truth = _as_2d("predictions", pred), _as_2d("truths", truth)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"predictions {pred.shape} and truths {truth.shape} differ")
    return pred > 0.5, truth > 0.5


def jaccard_metric(predictions, truths) -> float:
    """Mean per-visit |pred & truth| / |pred | truth|; 1 when both are empty"""
    pred, truth = _pair(predictions, truths)
    if pred.shape[0] == 0:
        return 0.0
    inter = (pred & truth).sum(axis=1)
    union = (pred | truth).sum(axis=1)
    per_visit = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    return float(per_visit.mean())


def f1_metric(predictions, truths) -> float:
    """Mean per-visit F1; 0 when precision + recall is 0"""
    pred, truth = _pair(predictions, truths)
    if pred.shape[0] == 0:
        return 0.0
    inter = (pred & truth).sum(axis=1)
    precision = inter / np.maximum(pred.sum(axis=1), 1)
    recall = inter / np.maximum(truth.sum(axis=1), 1)
    denom = precision + recall
    f1 = np.where(denom == 0, 0.0, 2 * precision * recall / np.where(denom == 0, 1, denom))
    return float(f1.mean())


def prauc_metric(scores, truths) -> float:
    """
    Mean per-visit step-sum area under the precision-recall curve

    Medications are ranked by descending score, ties by ascending index.
    Visits without any positive label contribute 0.
    """
    scores = _as_2d("scores", scores)
    truth = _as_2d("truths", truths) > 0.5
    if scores.shape != truth.shape:
        raise ShapeMismatch(f"scores {scores.shape} and truths {truth.shape} differ")
    if scores.shape[0] == 0:
        return 0.0
    n_meds = scores.shape[1]
    areas = np.zeros(scores.shape[0])
    for v in range(scores.shape[0]):
        positives = truth[v].sum()
        if positives == 0:
            continue
        # stable sort on the negated score keeps ascending index among ties
        order = np.argsort(-scores[v], kind="stable")
        hits = truth[v, order].astype(np.float64)
        tp = np.cumsum(hits)
        precision = tp / np.arange(1, n_meds + 1)
        areas[v] = float(np.sum(precision * hits) / positives)
    return float(areas.mean())


DDI_MODES = ("standard", "paper-literal")
GROUND_TRUTH_MODES = ("paper-literal", "truth-pairs")


def ddi_rate_metric(predictions, ddi: "DDIMatrix", mode: str = "standard", truths=None) -> float:
    """
    Share of interacting medication pairs

    standard: interacting predicted unordered pairs / predicted unordered pairs,
    both summed over visits. paper-literal (alias truth-pairs): the same
    numerator over the number of unordered ground-truth pairs (needs truths;
    not bounded by 1).
    """
    pred = _as_2d("predictions", predictions) > 0.5
    if pred.shape[1] != ddi.size:
        raise ShapeMismatch(f"predictions cover {pred.shape[1]} medications, DDI matrix {ddi.size}")
    upper = np.triu(ddi.matrix, k=1)
    hits = float(sum(upper[np.ix_(row, row)].sum() for row in pred))
    if mode == "standard":
        counts = pred.sum(axis=1)
        pairs = float(np.sum(counts * (counts - 1) / 2))
    elif mode in GROUND_TRUTH_MODES:
        if truths is None:
            raise ValueError(f"{mode} DDI rate needs the ground-truth sets")
        truth = _as_2d("truths", truths) > 0.5
        if truth.shape != pred.shape:
            raise ShapeMismatch(f"predictions {pred.shape} and truths {truth.shape} differ")
        counts = truth.sum(axis=1)
        pairs = float(np.sum(counts * (counts - 1) / 2))
    else:
        raise ValueError(f"unknown DDI rate mode {mode!r}")
    return hits / pairs if pairs > 0 else 0.0


def avg_med_metric(predictions) -> float:
    pred = _as_2d("predictions", predictions) > 0.5
    if pred.shape[0] == 0:
        return 0.0
    return float(pred.sum(axis=1).mean())


def all_metrics(scores, truths, ddi: "DDIMatrix", delta: float = 0.5,
                ddi_mode: str = "standard", predictions: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Every metric for one set of visits; predictions default to scores >= delta"""
    scores = _as_2d("scores", scores)
    if predictions is None:
        predictions = (scores >= delta).astype(np.float64)
    return {
        "jaccard": jaccard_metric(predictions, truths),
        "ddi_rate": ddi_rate_metric(predictions, ddi, ddi_mode, truths),
        "f1": f1_metric(predictions, truths),
        "prauc": prauc_metric(scores, truths),
        "avg_med": avg_med_metric(predictions),
    }
