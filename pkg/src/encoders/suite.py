"""
The full set of encoders used in alignment: f plus one g per modality
"""

from typing import Any, Dict, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from ..molkit import PROPERTY_NAMES
from ..utils.config_loader import MODALITIES
from ..utils.errors import UnknownEntity
from .gin import CrossModalEncoder
from .gvp import GVPEncoder
from .props import PropertyEncoder
from .text import TextEncoder
from .transe import KGAdapter, KGEmbedding
from .vit import ViTEncoder


class EncoderSuite(nn.Module):
    """
    Cross-modal encoder and modality encoders, keyed by modality name

    The TransE table is held frozen; the trainable KG tower is the adapter on
    top of it.
    """

    def __init__(self, model: Dict[str, Any], prop_mean: Sequence[float], prop_std: Sequence[float],
                 kg: Optional[KGEmbedding] = None):
        super().__init__()
        dim = model["dim"]
        self.dim = dim
        self.cross_modal = CrossModalEncoder(dim=dim, layers=model["gin_layers"])
        self.kg_table = kg
        if kg is not None:
            kg.requires_grad_(False)
        self.modality = nn.ModuleDict({
            "image": ViTEncoder(image_size=model["image_size"], patch_size=model["vit_patch"],
                                dim=dim, depth=model["vit_layers"], heads=model["vit_heads"]),
            "text": TextEncoder(dim=dim, depth=model["text_layers"], heads=model["text_heads"]),
            "structure": GVPEncoder(node_s=model["gvp_node_scalar"], node_v=model["gvp_node_vector"],
                                    edge_s=model["gvp_edge_scalar"], edge_v=model["gvp_edge_vector"],
                                    rbf=model["gvp_rbf"], layers=model["gvp_layers"], out_dim=dim),
            "props": PropertyEncoder(prop_mean, prop_std, dim=dim),
            "kg": KGAdapter(kg.dim if kg is not None else dim, dim),
        })

    @classmethod
    def from_config(cls, config, prop_mean=None, prop_std=None, kg: Optional[KGEmbedding] = None,
                    seed: Optional[int] = None) -> 'EncoderSuite':
        if seed is not None:
            torch.manual_seed(seed)
        n = len(PROPERTY_NAMES)
        prop_mean = np.zeros(n) if prop_mean is None else prop_mean
        prop_std = np.ones(n) if prop_std is None else prop_std
        return cls(config.get("model"), prop_mean, prop_std, kg)

    def encode_molecules(self, records) -> torch.Tensor:
        """e_C for records (anything with a .graph) or bare graphs"""
        graphs = [getattr(r, "graph", r) for r in records]
        return self.cross_modal(graphs)

    def kg_rows(self, records) -> torch.Tensor:
        if self.kg_table is None:
            raise UnknownEntity("no KG embedding attached")
        return torch.stack([self.kg_table.lookup(r.kg_id) for r in records])

    def encode_modality(self, modality: str, records) -> torch.Tensor:
        """Modality embedding E_O for records that all possess the modality"""
        if modality not in MODALITIES:
            raise KeyError(f"unknown modality {modality!r}")
        encoder = self.modality[modality]
        if modality == "image":
            return encoder([r.image for r in records])
        if modality == "text":
            return encoder([r.text for r in records])
        if modality == "structure":
            return encoder([r.conformer for r in records])
        if modality == "props":
            return encoder([r.props for r in records])
        return encoder(self.kg_rows(records).to(encoder.proj.weight.dtype))

    def parameter_counts(self) -> Dict[str, int]:
        """Trainable parameter counts per component"""
        counts = {"cross_modal": sum(p.numel() for p in self.cross_modal.parameters() if p.requires_grad)}
        for name, module in self.modality.items():
            counts[name] = sum(p.numel() for p in module.parameters() if p.requires_grad)
        return counts
