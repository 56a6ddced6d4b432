"""
Deterministic synthetic data: molecules, modality coverage, DDI matrix and EHR
"""

from .generators import (
    ehr_vocab, gen_ddi, gen_ehr, gen_modalities, gen_molecules, gen_rules, kg_triples, rule_union, sample_smiles,
)
from .spec import SynthSpec

__all__ = [
    "SynthSpec", "gen_molecules", "gen_modalities", "gen_ddi", "gen_ehr", "gen_rules",
    "rule_union", "sample_smiles", "kg_triples", "ehr_vocab",
]
