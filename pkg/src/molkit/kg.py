"""
Synthetic knowledge-graph triples (the KG modality source)

Each molecule is linked to 1-3 class/target/indication entities chosen by a
seeded hash of its binned descriptors, so molecules with similar descriptors
share tail entities.
"""

import hashlib
from dataclasses import dataclass
from typing import List, Mapping, Tuple

from .descriptors import PropertyVector

RELATIONS = ("class-of", "binds", "treats")

N_CLASSES = 12
N_TARGETS = 24
N_INDICATIONS = 16


@dataclass(frozen=True)
class KGTriple:
    head: str
    relation: str
    tail: str


def _hash(seed: int, *parts) -> int:
    payload = "|".join(str(p) for p in (seed, *parts)).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _bins(p: PropertyVector) -> Tuple[int, int, int, int, int]:
    return (
        int(p.molecular_weight // 50),
        min(p.hba, 5),
        min(p.hbd, 3),
        int(p.psa // 20),
        min(p.aromatic_rings, 3),
    )


def synth_kg(properties: Mapping[str, PropertyVector], seed: int = 0) -> List[KGTriple]:
    """
    Generate triples for the given molecules

    Args:
        properties: Molecule id -> descriptor vector
        seed: Hash seed

    Returns:
        Triples ordered by molecule id, then relation
    """
    if not properties:
        raise ValueError("synth_kg needs at least one molecule")

    triples: List[KGTriple] = []
    for mol_id in sorted(properties):
        mw, hba, hbd, psa, arom = _bins(properties[mol_id])
        n_links = 1 + _hash(seed, "count", mw, hba, hbd, psa, arom) % 3
        tails = (
            f"class:{_hash(seed, 'class', mw, arom) % N_CLASSES}",
            f"target:{_hash(seed, 'target', hba, psa) % N_TARGETS}",
            f"indication:{_hash(seed, 'indication', hbd, mw) % N_INDICATIONS}",
        )
        for relation, tail in list(zip(RELATIONS, tails))[:n_links]:
            triples.append(KGTriple(mol_id, relation, tail))
    return triples


def entity_vocabulary(triples: List[KGTriple]) -> Tuple[List[str], List[str]]:
    """Sorted entity and relation name lists"""
    entities = sorted({t.head for t in triples} | {t.tail for t in triples})
    relations = sorted({t.relation for t in triples})
    return entities, relations
