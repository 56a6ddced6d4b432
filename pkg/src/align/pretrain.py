"""
Contrastive pre-training of the cross-modal encoder against the modality encoders
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch
from loguru import logger
from tqdm import tqdm

from ..encoders import EncoderSuite
from ..utils.config_loader import MODALITIES
from ..utils.errors import NonFiniteLoss
from .contrastive import TemperatureParam, contrastive_loss
from .records import MultimodalRecord
from .schedule import intersection_schedule, rotating_schedule


@dataclass
class PretrainConfig:
    epochs: int = 20
    lr: float = 1e-6
    batch_size: int = 32
    modalities: Sequence[str] = MODALITIES
    mode: str = "rotating"
    seed: int = 0
    modality_encoders: str = "active"
    init_log_temperature: float = 2.659

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 2:
            raise ValueError("contrastive batches need batch_size >= 2")
        if self.mode not in ("rotating", "intersection"):
            raise ValueError(f"unknown pretraining mode {self.mode!r}")
        if self.modality_encoders not in ("active", "frozen"):
            raise ValueError(f"modality_encoders must be 'active' or 'frozen', got {self.modality_encoders!r}")
        unknown = [m for m in self.modalities if m not in MODALITIES]
        if unknown or not self.modalities:
            raise ValueError(f"bad modality subset {list(self.modalities)}")

    @classmethod
    def from_config(cls, config) -> 'PretrainConfig':
        return cls(
            epochs=config.get("pretrain.epochs"),
            lr=config.get("pretrain.lr"),
            batch_size=config.get("pretrain.batch_size"),
            modalities=tuple(config.get("pretrain.modalities")),
            mode=config.get("pretrain.mode"),
            seed=config.get("seed"),
            modality_encoders=config.get("pretrain.modality_encoders"),
            init_log_temperature=config.get("pretrain.init_log_temperature"),
        )


@dataclass
class PretrainResult:
    loss_curve: List[float]
    temperature: TemperatureParam
    steps: int = 0
    epoch_seconds: List[float] = field(default_factory=list)


def _run(records: Sequence[MultimodalRecord], suite: EncoderSuite, config: PretrainConfig,
         schedule: Callable, temperature: Optional[TemperatureParam]) -> PretrainResult:
    torch.manual_seed(config.seed)
    if temperature is None:
        temperature = TemperatureParam(config.init_log_temperature)

    params = list(suite.cross_modal.parameters()) + list(temperature.parameters())
    if config.modality_encoders == "active":
        for modality in config.modalities:
            params += [p for p in suite.modality[modality].parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=config.lr)

    suite.train()
    curve: List[float] = []
    seconds: List[float] = []
    total_steps = 0
    for epoch in tqdm(range(config.epochs), desc=f"Pretraining ({config.mode})", disable=config.epochs == 0):
        start = time.perf_counter()
        steps = schedule(records, config.modalities, config.batch_size, config.seed, epoch)
        losses = []
        for step, (modality, batch) in enumerate(steps):
            e_c = suite.encode_molecules(batch)
            if config.modality_encoders == "active":
                e_o = suite.encode_modality(modality, batch)
            else:
                with torch.no_grad():
                    e_o = suite.encode_modality(modality, batch)
            loss = contrastive_loss(e_c, e_o, temperature.tau)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite contrastive loss at epoch {epoch}, step {step}, modality {modality!r}, "
                    f"tau {float(temperature.tau):.4f}, molecules {[r.mol_id for r in batch][:8]}"
                )
            # inactive encoders keep grad None, so Adam leaves them untouched
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
            logger.debug(f"epoch {epoch} step {step} [{modality}] loss {losses[-1]:.4f}")
        total_steps += len(steps)
        curve.append(float(np.mean(losses)) if losses else float("nan"))
        seconds.append(time.perf_counter() - start)
        logger.info(f"Pretrain epoch {epoch + 1}/{config.epochs}: mean loss {curve[-1]:.4f} "
                    f"over {len(steps)} steps, tau {float(temperature.tau):.3f}")
    suite.eval()
    return PretrainResult(loss_curve=curve, temperature=temperature, steps=total_steps, epoch_seconds=seconds)


def pretrain(records: Sequence[MultimodalRecord], suite: EncoderSuite, config: PretrainConfig,
             temperature: Optional[TemperatureParam] = None) -> PretrainResult:
    """
    Rotating pairwise alignment

    Each step pairs e_C of a batch with one modality's embeddings; the
    cross-modal encoder, the active modality encoder and tau are updated.

    Raises:
        ModalityUnderfilled: a configured modality has fewer records than the batch size
        NonFiniteLoss: the loss diverged
    """
    return _run(records, suite, config, rotating_schedule, temperature)


def intersection_pretrain(records: Sequence[MultimodalRecord], suite: EncoderSuite, config: PretrainConfig,
                          temperature: Optional[TemperatureParam] = None) -> PretrainResult:
    """
    Alignment restricted to records that carry every configured modality

    Raises:
        EmptyIntersection: fewer than two such records
        NonFiniteLoss: the loss diverged
    """
    return _run(records, suite, config, intersection_schedule, temperature)


def run_pretraining(records, suite, config: PretrainConfig,
                    temperature: Optional[TemperatureParam] = None) -> PretrainResult:
    runner = pretrain if config.mode == "rotating" else intersection_pretrain
    return runner(records, suite, config, temperature)


@torch.no_grad()
def retrieval_eval(records: Sequence[MultimodalRecord], suite: EncoderSuite, modality: str, k: int = 1,
                   candidates: str = "modality") -> float:
    """
    Top-k accuracy of retrieving a record's e_C from its modality embedding

    Queries are the records carrying the modality. With candidates="modality"
    (the default, used for every reported number) the candidate e_C are those
    same records, so chance level is k / pool size. candidates="all" ranks
    against the e_C of every record, chance level k / len(records).
    """
    if candidates not in ("modality", "all"):
        raise ValueError(f"candidates must be 'modality' or 'all', got {candidates!r}")
    pool = [r for r in records if r.has(modality)]
    if len(pool) < 2:
        raise ValueError(f"retrieval needs >= 2 records with {modality!r}, got {len(pool)}")
    gallery = pool if candidates == "modality" else list(records)
    was_training = suite.training
    suite.eval()
    e_c = torch.nn.functional.normalize(suite.encode_molecules(gallery), dim=-1)
    e_o = torch.nn.functional.normalize(suite.encode_modality(modality, pool), dim=-1)
    suite.train(was_training)

    position = {id(r): i for i, r in enumerate(gallery)}
    target = torch.tensor([position[id(r)] for r in pool])
    sims = e_o @ e_c.T                                        # (query, candidate)
    true = sims.gather(1, target.unsqueeze(1))
    rank = (sims > true).sum(dim=1) + 1
    return float((rank <= k).double().mean())


def chance_level(pool_size: int, k: int) -> float:
    return min(1.0, k / pool_size)
