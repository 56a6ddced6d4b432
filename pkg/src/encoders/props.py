"""
Chemical-property modality encoder: corpus z-score then a linear layer
"""

from typing import Sequence, Union

import numpy as np
import torch
import torch.nn as nn
from loguru import logger

from ..molkit import PROPERTY_NAMES, PropertyVector


class PropertyEncoder(nn.Module):
    """
    z-score per channel with fixed corpus statistics, then Linear(5 -> dim)

    Channels whose corpus stdev is zero are dropped (their z-score is fixed
    at 0), so they never reach the linear layer.
    """

    def __init__(self, mean: Sequence[float], std: Sequence[float], dim: int = 64):
        super().__init__()
        mean = torch.as_tensor(np.asarray(mean, dtype=np.float64), dtype=torch.float32)
        std = torch.as_tensor(np.asarray(std, dtype=np.float64), dtype=torch.float32)
        keep = std > 0
        self.register_buffer("mean", mean)
        self.register_buffer("std", torch.where(keep, std, torch.ones_like(std)))
        self.register_buffer("keep", keep)
        self.linear = nn.Linear(len(mean), dim)

    @classmethod
    def fit(cls, vectors: Sequence[PropertyVector], dim: int = 64) -> 'PropertyEncoder':
        """Fit normalisation statistics on a training corpus"""
        values = np.stack([v.to_array() for v in vectors])
        mean, std = values.mean(axis=0), values.std(axis=0)
        for name, s in zip(PROPERTY_NAMES, std):
            if s == 0:
                logger.warning(f"property channel {name!r} has zero variance on the corpus; dropped")
        return cls(mean, std, dim)

    def normalize(self, values: torch.Tensor) -> torch.Tensor:
        z = (values - self.mean.to(values.dtype)) / self.std.to(values.dtype)
        return z * self.keep.to(values.dtype)

    def forward(self, props: Union[torch.Tensor, Sequence[PropertyVector]]) -> torch.Tensor:
        if not isinstance(props, torch.Tensor):
            props = torch.as_tensor(np.stack([p.to_array() for p in props]),
                                    dtype=self.linear.weight.dtype)
        return self.linear(self.normalize(props))


def prop_encode(v: PropertyVector, encoder: PropertyEncoder) -> torch.Tensor:
    return encoder([v])[0]
