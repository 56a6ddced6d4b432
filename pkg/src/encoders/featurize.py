"""
Graph and conformer tensors, collated PyG-style into one disjoint batch
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..molkit import Conformer, MoleculeGraph, edge_features, node_features


@dataclass
class GraphBatch:
    """Disjoint union of molecule graphs"""
    x: torch.Tensor            # (N, 9) node features
    edge_index: torch.Tensor   # (2, 2E) directed edges src -> dst, both directions
    edge_attr: torch.Tensor    # (2E, 8)
    batch: torch.Tensor        # (N,) graph index of every node
    num_graphs: int


@dataclass
class ConformerBatch:
    """Disjoint union of conformers; node features plus coordinates"""
    x: torch.Tensor            # (N, 9)
    pos: torch.Tensor          # (N, 3)
    edge_index: torch.Tensor   # (2, 2E)
    batch: torch.Tensor
    num_graphs: int


def _directed_edges(g: MoleculeGraph) -> np.ndarray:
    if g.num_bonds == 0:
        return np.zeros((2, 0), dtype=np.int64)
    keys = np.array([b.key for b in g.bonds], dtype=np.int64).T
    return np.concatenate([keys, keys[::-1]], axis=1)


def collate_graphs(graphs: Sequence[MoleculeGraph], dtype: torch.dtype = torch.float32) -> GraphBatch:
    xs, edges, attrs, batch = [], [], [], []
    offset = 0
    for i, g in enumerate(graphs):
        xs.append(node_features(g))
        edges.append(_directed_edges(g) + offset)
        ef = edge_features(g)
        attrs.append(np.concatenate([ef, ef], axis=0))
        batch.append(np.full(g.num_atoms, i, dtype=np.int64))
        offset += g.num_atoms
    return GraphBatch(
        x=torch.as_tensor(np.concatenate(xs), dtype=dtype),
        edge_index=torch.as_tensor(np.concatenate(edges, axis=1), dtype=torch.long),
        edge_attr=torch.as_tensor(np.concatenate(attrs), dtype=dtype),
        batch=torch.as_tensor(np.concatenate(batch), dtype=torch.long),
        num_graphs=len(graphs),
    )


def collate_conformers(conformers: Sequence[Conformer], dtype: torch.dtype = torch.float32) -> ConformerBatch:
    xs, pos, edges, batch = [], [], [], []
    offset = 0
    for i, c in enumerate(conformers):
        g = c.parent
        xs.append(node_features(g))
        pos.append(np.asarray(c.coordinates, dtype=np.float64))
        edges.append(_directed_edges(g) + offset)
        batch.append(np.full(g.num_atoms, i, dtype=np.int64))
        offset += g.num_atoms
    return ConformerBatch(
        x=torch.as_tensor(np.concatenate(xs), dtype=dtype),
        pos=torch.as_tensor(np.concatenate(pos), dtype=dtype),
        edge_index=torch.as_tensor(np.concatenate(edges, axis=1), dtype=torch.long),
        batch=torch.as_tensor(np.concatenate(batch), dtype=torch.long),
        num_graphs=len(conformers),
    )


def scatter_sum(src: torch.Tensor, index: torch.Tensor, size: int) -> torch.Tensor:
    """Sum rows of src into `size` buckets given by index"""
    out = src.new_zeros((size,) + tuple(src.shape[1:]))
    return out.index_add(0, index, src)


def scatter_mean(src: torch.Tensor, index: torch.Tensor, size: int) -> torch.Tensor:
    total = scatter_sum(src, index, size)
    counts = torch.bincount(index, minlength=size).clamp(min=1).to(src.dtype)
    return total / counts.view(-1, *([1] * (src.dim() - 1)))
