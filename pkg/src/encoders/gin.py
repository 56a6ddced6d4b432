"""
Cross-modal molecular encoder

A molecule-level GIN and an independent substructure-level GIN feed a masked
attention fusion: the molecule embedding queries its substructure embeddings
and the attended sum is added back before layer normalisation.
"""

import math
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..molkit import EDGE_FEATURE_DIM, NODE_FEATURE_DIM, MoleculeGraph, decompose
from ..utils.errors import AllMasked, DimensionMismatch
from .featurize import GraphBatch, collate_graphs, scatter_sum

MASK_VALUE = -1e9


def mlp(in_dim: int, hidden: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.SiLU(), nn.Linear(hidden, out_dim))


class GINLayer(nn.Module):
    """a_v = sum_u mlp_edge(h_u ++ e_uv);  h_v <- mlp_combine((1 + eps) h_v + a_v)"""

    def __init__(self, hidden: int, edge_dim: int):
        super().__init__()
        self.mlp_edge = mlp(hidden + edge_dim, hidden, hidden)
        self.mlp_combine = mlp(hidden, hidden, hidden)
        self.eps = nn.Parameter(torch.zeros(1))

    def forward(self, h: torch.Tensor, edge_index: torch.Tensor, edge_attr: torch.Tensor) -> torch.Tensor:
        src, dst = edge_index
        messages = self.mlp_edge(torch.cat([h[src], edge_attr], dim=-1))
        aggregated = scatter_sum(messages, dst, h.shape[0])
        return self.mlp_combine((1.0 + self.eps) * h + aggregated)


class GIN(nn.Module):
    """
    Graph isomorphism network with edge features and sum readout

    Args:
        hidden: Node state width
        out_dim: Embedding width after the readout projection
        layers: Message-passing rounds
    """

    def __init__(self, hidden: int = 64, out_dim: int = 64, layers: int = 2,
                 node_dim: int = NODE_FEATURE_DIM, edge_dim: int = EDGE_FEATURE_DIM):
        super().__init__()
        self.node_dim = node_dim
        self.edge_dim = edge_dim
        self.input_proj = nn.Linear(node_dim, hidden)
        self.layers = nn.ModuleList([GINLayer(hidden, edge_dim) for _ in range(layers)])
        self.readout = nn.Linear(hidden, out_dim)

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        if batch.x.shape[-1] != self.node_dim or batch.edge_attr.shape[-1] != self.edge_dim:
            raise DimensionMismatch(
                f"GIN expects node/edge widths {self.node_dim}/{self.edge_dim}, "
                f"got {batch.x.shape[-1]}/{batch.edge_attr.shape[-1]}"
            )
        h = self.input_proj(batch.x)
        for layer in self.layers:
            h = F.silu(layer(h, batch.edge_index, batch.edge_attr))
        pooled = scatter_sum(h, batch.batch, batch.num_graphs)
        return self.readout(pooled)

    def encode(self, graphs: Sequence[MoleculeGraph]) -> torch.Tensor:
        return self(collate_graphs(graphs, dtype=self.readout.weight.dtype))


def gin_encode(g: MoleculeGraph, gin: GIN) -> torch.Tensor:
    """Embedding of a single molecule, shape (out_dim,)"""
    return gin.encode([g])[0]


class SubstructureFusion(nn.Module):
    """Masked single-head attention of the molecule embedding over substructure rows"""

    def __init__(self, dim: int = 64):
        super().__init__()
        self.dim = dim
        self.query = nn.Linear(dim, dim, bias=False)
        self.key = nn.Linear(dim, dim, bias=False)
        self.value = nn.Linear(dim, dim, bias=False)
        self.norm = nn.LayerNorm(dim)

    def forward(self, mol_emb: torch.Tensor, sub_embs: torch.Tensor,
                mask: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            mol_emb: (B, d) molecule embeddings
            sub_embs: (B, K, d) substructure embeddings, padded along K
            mask: (B, K) bool, True for real rows

        Returns:
            (fused (B, d), attention weights (B, K))
        """
        if mask is None:
            mask = torch.ones(sub_embs.shape[:2], dtype=torch.bool, device=sub_embs.device)
        if not bool(mask.any(dim=-1).all()):
            raise AllMasked("every substructure row is padding")

        q = self.query(mol_emb).unsqueeze(1)                      # (B, 1, d)
        k = self.key(sub_embs)                                    # (B, K, d)
        logits = (q * k).sum(-1) / math.sqrt(self.dim)            # (B, K)
        logits = logits.masked_fill(~mask, MASK_VALUE)
        weights = torch.softmax(logits, dim=-1)
        attended = torch.einsum("bk,bkd->bd", weights, self.value(sub_embs))
        return self.norm(mol_emb + attended), weights


def substructure_fuse(mol_emb: torch.Tensor, sub_embs: torch.Tensor, fusion: SubstructureFusion,
                      mask: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """Unbatched fusion: mol_emb (d,), sub_embs (K, d), mask (K,)"""
    if mol_emb.shape[-1] != fusion.dim or sub_embs.shape[-1] != fusion.dim:
        raise DimensionMismatch(f"fusion width is {fusion.dim}")
    fused, weights = fusion(mol_emb.unsqueeze(0), sub_embs.unsqueeze(0),
                            None if mask is None else mask.unsqueeze(0))
    return fused[0], weights[0]


@lru_cache(maxsize=8192)
def substructure_graphs(g: MoleculeGraph) -> Tuple[MoleculeGraph, ...]:
    return tuple(s.graph for s in decompose(g))


class CrossModalEncoder(nn.Module):
    """f: molecule graph -> e_C"""

    def __init__(self, dim: int = 64, layers: int = 2):
        super().__init__()
        self.mol_gin = GIN(hidden=dim, out_dim=dim, layers=layers)
        self.sub_gin = GIN(hidden=dim, out_dim=dim, layers=layers)
        self.fusion = SubstructureFusion(dim)

    def forward(self, graphs: Sequence[MoleculeGraph]) -> torch.Tensor:
        fused, _ = self.encode_with_weights(graphs)
        return fused

    def encode_with_weights(self, graphs: Sequence[MoleculeGraph]) -> Tuple[torch.Tensor, torch.Tensor]:
        mol = self.mol_gin.encode(graphs)

        subs: List[Tuple[MoleculeGraph, ...]] = [substructure_graphs(g) for g in graphs]
        flat = [s for group in subs for s in group]
        sub_flat = self.sub_gin.encode(flat)

        k_max = max(len(group) for group in subs)
        padded = sub_flat.new_zeros((len(graphs), k_max, sub_flat.shape[-1]))
        mask = torch.zeros((len(graphs), k_max), dtype=torch.bool, device=sub_flat.device)
        row = 0
        for i, group in enumerate(subs):
            padded[i, :len(group)] = sub_flat[row:row + len(group)]
            mask[i, :len(group)] = True
            row += len(group)
        return self.fusion(mol, padded, mask)


def cross_modal_encode(g: MoleculeGraph, encoder: CrossModalEncoder) -> torch.Tensor:
    """e_C for a single molecule, shape (dim,)"""
    return encoder([g])[0]
