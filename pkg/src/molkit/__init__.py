"""
Molecule toolkit: SMILES parsing and per-modality observations
"""

from .conformer import Conformer, generate_conformer
from .decompose import Substructure, decompose
from .descriptors import PROPERTY_NAMES, PropertyVector, descriptors
from .features import EDGE_FEATURE_DIM, NODE_FEATURE_DIM, edge_features, node_features
from .graph import AtomRecord, BondRecord, MoleculeGraph
from .kg import KGTriple, entity_vocabulary, synth_kg
from .raster import MoleculeImage, rasterize
from .smiles import parse_smiles, unparse
from .text import VOCAB, TextDescription, describe

__all__ = [
    "AtomRecord", "BondRecord", "MoleculeGraph", "parse_smiles", "unparse",
    "node_features", "edge_features", "NODE_FEATURE_DIM", "EDGE_FEATURE_DIM",
    "Substructure", "decompose", "Conformer", "generate_conformer",
    "MoleculeImage", "rasterize", "PropertyVector", "PROPERTY_NAMES", "descriptors",
    "TextDescription", "VOCAB", "describe", "KGTriple", "synth_kg", "entity_vocabulary",
]
