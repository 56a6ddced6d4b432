"""
Formal training of the patient encoder and prediction head
"""

import copy
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
from loguru import logger
from tqdm import tqdm

from ..encoders import CrossModalEncoder
from ..evaluation.metrics import ddi_rate_metric, jaccard_metric
from ..molkit import MoleculeGraph
from ..objective import LossWeights, beta_controller, combined_loss
from ..utils.errors import NonFiniteLoss
from .ehr import DDIMatrix, PatientHistory, medication_matrix
from .patient_encoder import PatientEncoder

SELECTION_RULE = "best validation jaccard"


class ClinicalModel(nn.Module):
    """
    Patient encoder plus the source of medication embeddings

    With a cross-modal encoder the medication table is recomputed from the
    medication graphs on every call; without one the patient encoder must
    own a learnable table.
    """

    def __init__(self, patient_encoder: PatientEncoder, cross_modal: Optional[CrossModalEncoder] = None,
                 medication_graphs: Optional[Sequence[MoleculeGraph]] = None):
        super().__init__()
        if patient_encoder.medication_table is None and (cross_modal is None or not medication_graphs):
            raise ValueError("a cross-modal encoder and medication graphs are required without a learnable table")
        self.patient_encoder = patient_encoder
        self.cross_modal = cross_modal
        self.medication_graphs = list(medication_graphs or [])

    def medication_table(self) -> Optional[torch.Tensor]:
        if self.patient_encoder.medication_table is not None:
            return None
        return self.cross_modal(self.medication_graphs)

    def forward(self, histories: Sequence[PatientHistory]) -> List[torch.Tensor]:
        return self.patient_encoder(histories, self.medication_table())

    @torch.no_grad()
    def predict(self, histories: Sequence[PatientHistory]) -> List[np.ndarray]:
        was_training = self.training
        self.eval()
        scores = [s.cpu().double().numpy() for s in self(histories)]
        self.train(was_training)
        return scores


@dataclass
class TrainConfig:
    epochs: int = 25
    lr: float = 5e-4
    weight_decay: float = 0.05
    batch_patients: int = 16
    finetune_cross_modal: bool = True
    delta: float = 0.5
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)

    @classmethod
    def from_config(cls, config) -> 'TrainConfig':
        return cls(
            epochs=config.get("train.epochs"),
            lr=config.get("train.lr"),
            weight_decay=config.get("train.weight_decay"),
            batch_patients=config.get("train.batch_patients"),
            finetune_cross_modal=config.get("train.finetune_cross_modal"),
            delta=config.get("loss.delta"),
            seed=config.get("seed"),
            weights=LossWeights.from_config(config),
        )


@dataclass
class TrainResult:
    log: List[Dict[str, float]]
    best_epoch: int
    best_val_jaccard: float
    parameter_counts: Dict[str, int]
    selection_rule: str = SELECTION_RULE


def _parameters(model: ClinicalModel, finetune: bool) -> List[nn.Parameter]:
    params = list(model.patient_encoder.parameters())
    if model.cross_modal is not None:
        model.cross_modal.requires_grad_(finetune)
        if finetune:
            params += list(model.cross_modal.parameters())
    return params


def _val_jaccard(model: ClinicalModel, patients: Sequence[PatientHistory], n_meds: int, delta: float) -> float:
    if not patients:
        return float("nan")
    scores = np.concatenate(model.predict(patients))
    return jaccard_metric(scores >= delta, medication_matrix(patients, n_meds))


def train_clinical(model: ClinicalModel, train: Sequence[PatientHistory], val: Sequence[PatientHistory],
                   ddi: DDIMatrix, config: TrainConfig) -> TrainResult:
    """
    Train with the combined loss, keeping the parameters of the epoch with the
    best validation jaccard

    Returns:
        TrainResult with one log row per epoch (loss, training DDI rate, beta,
        validation jaccard, wall time)

    Raises:
        NonFiniteLoss: the loss diverged
    """
    torch.manual_seed(config.seed)
    params = _parameters(model, config.finetune_cross_modal)
    optimizer = torch.optim.Adam(params, lr=config.lr, weight_decay=config.weight_decay)
    dtype = model.patient_encoder.disease_table.dtype
    ddi_tensor = torch.as_tensor(ddi.matrix, dtype=dtype)
    n_meds = ddi.size
    counts = {"patient_encoder": sum(p.numel() for p in model.patient_encoder.parameters())}
    if model.cross_modal is not None and config.finetune_cross_modal:
        counts["cross_modal"] = sum(p.numel() for p in model.cross_modal.parameters())
    logger.info(f"Trainable parameters: {counts}")

    beta = config.weights.beta
    best_state = copy.deepcopy(model.state_dict())
    best_epoch, best_jaccard = 0, -1.0
    log: List[Dict[str, float]] = []

    for epoch in tqdm(range(config.epochs), desc="Training", disable=config.epochs == 0):
        start = time.perf_counter()
        model.train()
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train))
        losses, predicted = [], []
        for b in range(0, len(order), config.batch_patients):
            batch = [train[i] for i in order[b:b + config.batch_patients]]
            scores = torch.cat(model(batch))
            truth = torch.as_tensor(medication_matrix(batch, n_meds), dtype=dtype)
            loss = combined_loss(scores, truth, ddi_tensor, config.weights, beta=beta).mean()
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"non-finite training loss at epoch {epoch}, batch {b // config.batch_patients}")
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
            predicted.append((scores.detach().cpu().numpy() >= config.delta).astype(np.float64))

        train_rate = ddi_rate_metric(np.concatenate(predicted), ddi) if predicted else 0.0
        val_jaccard = _val_jaccard(model, val, n_meds, config.delta)
        row = {
            "epoch": epoch + 1,
            "loss": float(np.mean(losses)) if losses else float("nan"),
            "train_ddi_rate": train_rate,
            "beta": beta,
            "val_jaccard": val_jaccard,
            "seconds": time.perf_counter() - start,
        }
        log.append(row)
        logger.info(f"Epoch {epoch + 1}/{config.epochs}: loss {row['loss']:.4f}, train DDI {train_rate:.4f}, "
                    f"beta {beta:.3f}, val jaccard {val_jaccard:.4f} ({row['seconds']:.1f}s)")

        if not np.isnan(val_jaccard) and val_jaccard > best_jaccard:
            best_jaccard, best_epoch = val_jaccard, epoch + 1
            best_state = copy.deepcopy(model.state_dict())
        beta = beta_controller(train_rate, config.weights)

    model.load_state_dict(best_state)
    model.eval()
    logger.info(f"Selected epoch {best_epoch} ({SELECTION_RULE} = {max(best_jaccard, 0.0):.4f})")
    return TrainResult(log=log, best_epoch=best_epoch, best_val_jaccard=max(best_jaccard, 0.0),
                       parameter_counts=counts)
