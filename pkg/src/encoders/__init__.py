"""
Trainable encoders: the cross-modal encoder and the five modality encoders
"""

from .featurize import ConformerBatch, GraphBatch, collate_conformers, collate_graphs
from .gin import GIN, CrossModalEncoder, SubstructureFusion, cross_modal_encode, gin_encode, substructure_fuse
from .gvp import GVP, GVPEncoder, gvp_encode
from .props import PropertyEncoder, prop_encode
from .suite import EncoderSuite
from .text import TextEncoder, text_encode
from .transe import KGAdapter, KGEmbedding, kg_lookup, transe_train
from .vit import ViTEncoder, vit_encode

__all__ = [
    "GraphBatch", "ConformerBatch", "collate_graphs", "collate_conformers",
    "GIN", "gin_encode", "SubstructureFusion", "substructure_fuse",
    "CrossModalEncoder", "cross_modal_encode",
    "ViTEncoder", "vit_encode", "TextEncoder", "text_encode",
    "KGEmbedding", "KGAdapter", "transe_train", "kg_lookup",
    "PropertyEncoder", "prop_encode", "GVP", "GVPEncoder", "gvp_encode",
    "EncoderSuite",
]
