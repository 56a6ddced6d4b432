"""
Symmetric contrastive alignment loss, learnable temperature and dispersion
"""

import math
from typing import Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.spatial.distance import pdist

from ..utils.errors import ZeroNormRow

ZERO_NORM = 1e-12
MAX_TAU = 100.0


class TemperatureParam(nn.Module):
    """Learnable log-temperature; tau = exp(log_temperature) clamped to <= 100"""

    def __init__(self, init: float = math.log(1 / 0.07)):
        super().__init__()
        self.log_temperature = nn.Parameter(torch.tensor(float(init)))

    @property
    def tau(self) -> torch.Tensor:
        return self.log_temperature.clamp(max=math.log(MAX_TAU)).exp()


def _normalize_rows(e: torch.Tensor, name: str) -> torch.Tensor:
    norms = e.norm(dim=-1, keepdim=True)
    if bool((norms < ZERO_NORM).any()):
        raise ZeroNormRow(f"{name} has a row with norm < {ZERO_NORM}")
    return e / norms


def contrastive_loss(e_c: torch.Tensor, e_o: torch.Tensor,
                     tau: Union[float, torch.Tensor] = 1.0) -> torch.Tensor:
    """
    Bidirectional InfoNCE over cosine similarities

    Row i of e_c and row i of e_o describe the same molecule. Returns the mean
    of the two directional cross-entropies at the diagonal of tau * S.
    """
    if e_c.shape != e_o.shape:
        raise ValueError(f"paired matrices differ in shape: {tuple(e_c.shape)} vs {tuple(e_o.shape)}")
    s = _normalize_rows(e_c, "E_C") @ _normalize_rows(e_o, "E_O").T
    logits = tau * s
    labels = torch.arange(s.shape[0], device=s.device)
    return 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.T, labels))


def dispersion(embeddings) -> float:
    """Mean pairwise cosine distance over all unordered pairs"""
    if isinstance(embeddings, torch.Tensor):
        embeddings = embeddings.detach().cpu().double().numpy()
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[0] < 2:
        raise ValueError("dispersion needs at least two embeddings")
    if (np.linalg.norm(embeddings, axis=1) < ZERO_NORM).any():
        raise ZeroNormRow("embedding row with norm < 1e-12")
    return float(pdist(embeddings, metric="cosine").mean())
