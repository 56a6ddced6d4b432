"""
Multimodal molecule records
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from ..molkit import Conformer, MoleculeGraph, MoleculeImage, PropertyVector, TextDescription
from ..utils.config_loader import MODALITIES

MODALITY_FIELDS = {
    "image": "image",
    "text": "text",
    "structure": "conformer",
    "props": "props",
    "kg": "kg_id",
}


@dataclass(eq=False)
class MultimodalRecord:
    """
    One molecule with its optional modality observations

    The graph is always present; absent modalities are None. At least one
    modality must be present.
    """
    mol_id: str
    smiles: str
    graph: MoleculeGraph
    image: Optional[MoleculeImage] = None
    text: Optional[TextDescription] = None
    conformer: Optional[Conformer] = None
    props: Optional[PropertyVector] = None
    kg_id: Optional[str] = None

    def __post_init__(self):
        if not self.modalities:
            raise ValueError(f"record {self.mol_id!r} carries no modality")

    def has(self, modality: str) -> bool:
        return getattr(self, MODALITY_FIELDS[modality]) is not None

    @property
    def modalities(self) -> Tuple[str, ...]:
        return tuple(m for m in MODALITIES if self.has(m))


@dataclass
class CoverageProfile:
    """Independent per-modality presence probabilities"""
    probabilities: Dict[str, float] = field(default_factory=lambda: {m: 0.4 for m in MODALITIES})
    seed: int = 0

    def __post_init__(self):
        for modality, p in self.probabilities.items():
            if modality not in MODALITIES:
                raise ValueError(f"unknown modality {modality!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"coverage for {modality} must be in [0, 1], got {p}")
        if not any(p > 0 for p in self.probabilities.values()):
            raise ValueError("at least one modality needs a positive coverage probability")

    @classmethod
    def uniform(cls, p: float, seed: int = 0) -> 'CoverageProfile':
        return cls({m: p for m in MODALITIES}, seed)
