"""
TransE knowledge-graph embedding and the KG modality adapter
"""

import math
from typing import Dict, List, Optional, Sequence

import torch
import torch.nn as nn
from loguru import logger

from ..molkit import KGTriple
from ..utils.errors import EmptyKG, UnknownEntity


class KGEmbedding(nn.Module):
    """Entity and relation tables with name -> row indices"""

    def __init__(self, entities: Sequence[str], relations: Sequence[str], dim: int = 64):
        super().__init__()
        self.entities: List[str] = list(entities)
        self.relations: List[str] = list(relations)
        self.entity_index: Dict[str, int] = {e: i for i, e in enumerate(self.entities)}
        self.relation_index: Dict[str, int] = {r: i for i, r in enumerate(self.relations)}
        self.entity = nn.Embedding(len(self.entities), dim)
        self.relation = nn.Embedding(len(self.relations), dim)

    @property
    def dim(self) -> int:
        return self.entity.embedding_dim

    def clamp_entity_norms(self):
        """Project entity rows back into the unit ball"""
        with torch.no_grad():
            w = self.entity.weight
            w.div_(w.norm(dim=1, keepdim=True).clamp(min=1.0))

    def distance(self, h: torch.Tensor, r: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """||h + r - t||_2 for index tensors"""
        return (self.entity(h) + self.relation(r) - self.entity(t)).norm(dim=-1)

    def score(self, head: str, relation: str, tail: str) -> float:
        idx = self._indices([KGTriple(head, relation, tail)])
        with torch.no_grad():
            return float(self.distance(*idx)[0])

    def _indices(self, triples: Sequence[KGTriple]):
        try:
            h = torch.tensor([self.entity_index[t.head] for t in triples], dtype=torch.long)
            r = torch.tensor([self.relation_index[t.relation] for t in triples], dtype=torch.long)
            t = torch.tensor([self.entity_index[t.tail] for t in triples], dtype=torch.long)
        except KeyError as exc:
            raise UnknownEntity(str(exc)) from exc
        return h, r, t

    def lookup(self, entity_id: str) -> torch.Tensor:
        if entity_id not in self.entity_index:
            raise UnknownEntity(f"{entity_id!r} is not a KG entity")
        return self.entity.weight[self.entity_index[entity_id]]


def transe_train(triples: Sequence[KGTriple], dim: int = 64, epochs: int = 100, seed: int = 0,
                 lr: float = 0.01, margin: float = 1.0,
                 extra_entities: Optional[Sequence[str]] = None) -> KGEmbedding:
    """
    Train TransE with a margin ranking loss

    One negative per positive per epoch, corrupting head or tail uniformly with
    a uniformly drawn entity. Entity norms are clamped to <= 1 after every step.

    Args:
        triples: Training triples
        dim: Embedding width
        epochs: Full-batch epochs
        seed: Seed for initialisation and negative sampling
        lr: Adam learning rate
        margin: Ranking margin
        extra_entities: Entities to register even if no triple mentions them

    Returns:
        Trained KGEmbedding

    Raises:
        EmptyKG: no triples
    """
    if not triples:
        raise EmptyKG("TransE needs at least one triple")

    entities = sorted({t.head for t in triples} | {t.tail for t in triples} | set(extra_entities or ()))
    relations = sorted({t.relation for t in triples})

    generator = torch.Generator().manual_seed(seed)
    kg = KGEmbedding(entities, relations, dim)
    bound = 6.0 / math.sqrt(dim)
    with torch.no_grad():
        kg.entity.weight.uniform_(-bound, bound, generator=generator)
        kg.relation.weight.uniform_(-bound, bound, generator=generator)
        kg.relation.weight.div_(kg.relation.weight.norm(dim=1, keepdim=True))
    kg.clamp_entity_norms()

    h, r, t = kg._indices(triples)
    optimizer = torch.optim.Adam(kg.parameters(), lr=lr)
    n_entities = len(entities)

    for epoch in range(epochs):
        corrupt_head = torch.rand(len(triples), generator=generator) < 0.5
        random_entity = torch.randint(n_entities, (len(triples),), generator=generator)
        h_neg = torch.where(corrupt_head, random_entity, h)
        t_neg = torch.where(corrupt_head, t, random_entity)

        loss = torch.relu(margin + kg.distance(h, r, t) - kg.distance(h_neg, r, t_neg)).mean()
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        kg.clamp_entity_norms()

        if (epoch + 1) % 25 == 0:
            logger.debug(f"TransE epoch {epoch + 1}/{epochs}: loss {loss.item():.4f}")

    kg.requires_grad_(False)
    logger.info(f"TransE trained: {n_entities} entities, {len(relations)} relations, {len(triples)} triples")
    return kg


def kg_lookup(mol_id: str, kg: KGEmbedding) -> torch.Tensor:
    """Entity row for a molecule (the KG modality observation)"""
    return kg.lookup(mol_id)


class KGAdapter(nn.Module):
    """Trainable linear map applied on top of the frozen TransE rows"""

    def __init__(self, in_dim: int = 64, dim: int = 64):
        super().__init__()
        self.proj = nn.Linear(in_dim, dim)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        return self.proj(rows)
