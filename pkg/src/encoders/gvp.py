"""
Structure modality encoder: geometric vector perceptron message passing

Node state is a pair (s, V): scalars of width node_s and node_v vector
channels of 3-vectors. Channel mixing acts on the channel axis only, so every
vector output is rotation-covariant and every scalar output is invariant.
"""

from typing import Sequence, Tuple, Union

import torch
import torch.nn as nn

from ..molkit import NODE_FEATURE_DIM, Conformer
from ..utils.errors import DegenerateEdge
from .featurize import ConformerBatch, collate_conformers, scatter_mean, scatter_sum

NORM_EPS = 1e-8
MIN_EDGE_LENGTH = 1e-6


def safe_norm(v: torch.Tensor, dim: int = -1, keepdim: bool = False) -> torch.Tensor:
    return torch.sqrt(torch.clamp(torch.sum(v * v, dim=dim, keepdim=keepdim), min=NORM_EPS))


class RBF(nn.Module):
    """Gaussian radial basis expansion of distances"""

    def __init__(self, count: int = 16, d_min: float = 0.0, d_max: float = 4.0):
        super().__init__()
        self.register_buffer("centers", torch.linspace(d_min, d_max, count))
        self.width = (d_max - d_min) / (count - 1)

    def forward(self, d: torch.Tensor) -> torch.Tensor:
        return torch.exp(-((d.unsqueeze(-1) - self.centers.to(d.dtype)) / self.width) ** 2)


class GVP(nn.Module):
    """
    f_sv = concat(||W_h V||, s);  s' = MLP_1(f_sv);  f_v = W_mu W_h V;
    V' = sigmoid(||f_v||) * f_v
    """

    def __init__(self, in_dims: Tuple[int, int], out_dims: Tuple[int, int], h_dim: int = None):
        super().__init__()
        si, vi = in_dims
        so, vo = out_dims
        h_dim = h_dim or max(vi, vo)
        self.w_h = nn.Linear(vi, h_dim, bias=False)
        self.w_mu = nn.Linear(h_dim, vo, bias=False)
        self.mlp = nn.Sequential(nn.Linear(si + h_dim, so), nn.SiLU(), nn.Linear(so, so))

    def forward(self, s: torch.Tensor, v: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """s: (..., si), v: (..., vi, 3)"""
        vh = self.w_h(v.transpose(-1, -2)).transpose(-1, -2)         # (..., h, 3)
        f_sv = torch.cat([safe_norm(vh, dim=-1), s], dim=-1)
        s_out = self.mlp(f_sv)
        f_v = self.w_mu(vh.transpose(-1, -2)).transpose(-1, -2)      # (..., vo, 3)
        gate = torch.sigmoid(safe_norm(f_v, dim=-1, keepdim=True))
        return s_out, gate * f_v


class GVPConv(nn.Module):
    """One round: GVP on (neighbour state ++ edge state), summed into the receiver"""

    def __init__(self, node_dims: Tuple[int, int], edge_dims: Tuple[int, int]):
        super().__init__()
        ns, nv = node_dims
        es, ev = edge_dims
        self.message = GVP((ns + es, nv + ev), (ns, nv))
        self.norm = nn.LayerNorm(ns)

    def forward(self, s, v, edge_index, edge_s, edge_v):
        src, dst = edge_index
        m_s, m_v = self.message(
            torch.cat([s[src], edge_s], dim=-1),
            torch.cat([v[src], edge_v], dim=-2),
        )
        n = s.shape[0]
        s = self.norm(s + scatter_sum(m_s, dst, n))
        v = v + scatter_sum(m_v, dst, n)
        return s, v


class GVPEncoder(nn.Module):
    """
    Conformer -> e_S

    Args:
        node_s / node_v: scalar width and vector channels of node states
        edge_s / edge_v: scalar width and vector channels of edge states
        rbf: number of Gaussian distance bases (centres over 0-4 units)
        layers: message-passing rounds
        out_dim: output embedding width
    """

    def __init__(self, node_s: int = 128, node_v: int = 64, edge_s: int = 32, edge_v: int = 1,
                 rbf: int = 16, layers: int = 3, out_dim: int = 64, node_in: int = NODE_FEATURE_DIM):
        super().__init__()
        if edge_v != 1:
            raise ValueError("edges carry exactly one vector channel (the bond direction)")
        self.node_v = node_v
        self.node_in = nn.Linear(node_in, node_s)
        self.rbf = RBF(rbf)
        self.edge_in = nn.Linear(rbf, edge_s)
        self.layers = nn.ModuleList([GVPConv((node_s, node_v), (edge_s, edge_v)) for _ in range(layers)])
        self.readout = nn.Linear(node_s, out_dim)

    def node_states(self, batch: ConformerBatch) -> Tuple[torch.Tensor, torch.Tensor]:
        src, dst = batch.edge_index
        rel = batch.pos[src] - batch.pos[dst]
        dist = rel.norm(dim=-1)
        if dist.numel() and bool((dist < MIN_EDGE_LENGTH).any()):
            raise DegenerateEdge("two bonded atoms coincide")
        unit = (rel / dist.clamp(min=MIN_EDGE_LENGTH).unsqueeze(-1)).unsqueeze(-2)   # (E, 1, 3)
        edge_s = self.edge_in(self.rbf(dist))

        s = self.node_in(batch.x)
        v = s.new_zeros((s.shape[0], self.node_v, 3))
        for layer in self.layers:
            s, v = layer(s, v, batch.edge_index, edge_s, unit)
        return s, v

    def forward(self, conformers: Union[ConformerBatch, Sequence[Conformer]]) -> torch.Tensor:
        if not isinstance(conformers, ConformerBatch):
            conformers = collate_conformers(conformers, dtype=self.readout.weight.dtype)
        s, _ = self.node_states(conformers)
        return self.readout(scatter_mean(s, conformers.batch, conformers.num_graphs))


def gvp_encode(c: Conformer, encoder: GVPEncoder) -> torch.Tensor:
    return encoder([c])[0]
