"""
Batch schedules for alignment

Rotating mode draws every modality's batches from the records that have that
modality. Intersection mode draws every modality's batches from the records
that have all configured modalities.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..utils.config_loader import MODALITIES
from ..utils.errors import EmptyIntersection, ModalityUnderfilled
from .records import MultimodalRecord

Step = Tuple[str, List[MultimodalRecord]]


def _ordered(modalities: Sequence[str]) -> List[str]:
    return [m for m in MODALITIES if m in modalities]


def _batches(pool: Sequence[MultimodalRecord], batch_size: int,
             rng: np.random.Generator) -> List[List[MultimodalRecord]]:
    """Shuffle without replacement; keep a final partial batch with >= 2 rows"""
    order = rng.permutation(len(pool))
    batches = [[pool[i] for i in order[start:start + batch_size]]
               for start in range(0, len(pool), batch_size)]
    return [b for b in batches if len(b) >= 2]


def _round_robin(per_modality: Dict[str, List[List[MultimodalRecord]]]) -> List[Step]:
    steps: List[Step] = []
    cursor = {m: 0 for m in per_modality}
    while any(cursor[m] < len(per_modality[m]) for m in per_modality):
        for modality, batches in per_modality.items():
            if cursor[modality] < len(batches):
                steps.append((modality, batches[cursor[modality]]))
                cursor[modality] += 1
    return steps


def rotating_schedule(records: Sequence[MultimodalRecord], modalities: Sequence[str],
                      batch_size: int, seed: int, epoch: int = 0) -> List[Step]:
    """
    One epoch of (modality, batch) steps cycling image -> text -> structure -> props -> kg

    Raises:
        ModalityUnderfilled: a modality has fewer records than batch_size
    """
    per_modality = {}
    for m_idx, modality in enumerate(_ordered(modalities)):
        pool = [r for r in records if r.has(modality)]
        if len(pool) < batch_size:
            raise ModalityUnderfilled(
                f"modality {modality!r} has {len(pool)} records, fewer than batch size {batch_size}"
            )
        rng = np.random.default_rng([seed, epoch, m_idx])
        per_modality[modality] = _batches(pool, batch_size, rng)
    return _round_robin(per_modality)


def intersection_pool(records: Sequence[MultimodalRecord], modalities: Sequence[str]) -> List[MultimodalRecord]:
    return [r for r in records if all(r.has(m) for m in modalities)]


def intersection_schedule(records: Sequence[MultimodalRecord], modalities: Sequence[str],
                          batch_size: int, seed: int, epoch: int = 0) -> List[Step]:
    """
    Same rotation, candidate pool restricted to records with every modality

    The batch size shrinks to the pool size when the pool is smaller.

    Raises:
        EmptyIntersection: fewer than two records have every modality
    """
    pool = intersection_pool(records, modalities)
    if len(pool) < 2:
        raise EmptyIntersection(
            f"{len(pool)} of {len(records)} records carry all of {list(modalities)}"
        )
    effective = min(batch_size, len(pool))
    per_modality = {}
    for m_idx, modality in enumerate(_ordered(modalities)):
        rng = np.random.default_rng([seed, epoch, m_idx])
        per_modality[modality] = _batches(pool, effective, rng)
    return _round_robin(per_modality)
