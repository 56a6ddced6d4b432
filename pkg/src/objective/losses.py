"""
Training losses for multi-label medication prediction

All losses accept scores and labels of shape (..., |M|) and reduce over the
last axis only, so a (V, |M|) batch yields one loss per visit.
"""

from dataclasses import dataclass

import torch

from ..utils.errors import ShapeMismatch

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    beta: float = 0.95
    gamma: float = 0.95
    ddi_target: float = 0.06
    controller: bool = False
    kappa: float = 0.05

    def __post_init__(self):
        for name in ("beta", "gamma", "ddi_target"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")

    @classmethod
    def from_config(cls, config) -> 'LossWeights':
        return cls(
            beta=config.get("loss.beta"),
            gamma=config.get("loss.gamma"),
            ddi_target=config.get("loss.ddi_target"),
            controller=config.get("loss.controller"),
            kappa=config.get("loss.kappa"),
        )


def _check(scores: torch.Tensor, other: torch.Tensor, what: str):
    if scores.shape[-1] != other.shape[-1]:
        raise ShapeMismatch(f"scores have {scores.shape[-1]} medications, {what} has {other.shape[-1]}")


def bce_loss(scores: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    """Summed binary cross-entropy with scores clamped 1e-7 from 0 and 1"""
    _check(scores, truth, "truth")
    s = scores.clamp(PROB_EPS, 1.0 - PROB_EPS)
    truth = truth.to(s.dtype)
    return -(truth * torch.log(s) + (1.0 - truth) * torch.log(1.0 - s)).sum(dim=-1)


def hinge_loss(scores: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    """Sum over (positive i, negative j) of max(0, 1 - (s_i - s_j)), divided by |M|"""
    _check(scores, truth, "truth")
    truth = truth.to(scores.dtype)
    margins = torch.relu(1.0 - (scores.unsqueeze(-1) - scores.unsqueeze(-2)))    # [..., i, j]
    pair_mask = truth.unsqueeze(-1) * (1.0 - truth).unsqueeze(-2)
    return (margins * pair_mask).sum(dim=(-1, -2)) / scores.shape[-1]


def ddi_loss(scores: torch.Tensor, ddi: torch.Tensor) -> torch.Tensor:
    """sum_i sum_j M_ij s_i s_j over ordered pairs"""
    if ddi.dim() != 2 or ddi.shape[0] != ddi.shape[1] or ddi.shape[0] != scores.shape[-1]:
        raise ShapeMismatch(f"DDI matrix {tuple(ddi.shape)} does not match {scores.shape[-1]} medications")
    return torch.einsum("...i,ij,...j->...", scores, ddi.to(scores.dtype), scores)


def combined_loss(scores: torch.Tensor, truth: torch.Tensor, ddi: torch.Tensor,
                  weights: LossWeights, beta: float = None) -> torch.Tensor:
    """
    beta (gamma L_bce + (1 - gamma) L_hinge) + (1 - beta) L_ddi

    Args:
        beta: Overrides weights.beta (the controller's current value)
    """
    beta = weights.beta if beta is None else beta
    gamma = weights.gamma
    return beta * (gamma * bce_loss(scores, truth) + (1.0 - gamma) * hinge_loss(scores, truth)) \
        + (1.0 - beta) * ddi_loss(scores, ddi)
