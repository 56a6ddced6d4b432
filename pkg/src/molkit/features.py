"""
Atom and bond feature vectors

Node channels (9, fixed order):
    0 element-class index (position in ELEMENTS)
    1 degree (heavy-atom neighbours)
    2 formal charge
    3 chirality flag (always 0 in the supported grammar; reserved)
    4 implicit-H count
    5 hybridization class (0 sp3, 1 sp2, 2 sp) derived from bond orders
    6 aromatic flag
    7 in-ring flag
    8 atomic mass / 100

Edge channels (8): one-hot bond order [single, double, triple, aromatic],
one-hot stereo class [none, cis, trans], conjugation flag.
"""

import numpy as np

from .graph import (
    AROMATIC, ATOMIC_MASS, BOND_ORDERS, DOUBLE, ELEMENTS, STEREO_CLASSES, TRIPLE,
    MoleculeGraph,
)

NODE_FEATURE_DIM = 9
EDGE_FEATURE_DIM = len(BOND_ORDERS) + len(STEREO_CLASSES) + 1


def hybridization(g: MoleculeGraph, atom: int) -> int:
    """0 sp3, 1 sp2, 2 sp"""
    orders = [g.bonds[b].order for _, b in g.neighbors(atom)]
    if TRIPLE in orders or orders.count(DOUBLE) >= 2:
        return 2
    if DOUBLE in orders or AROMATIC in orders or g.atoms[atom].aromatic:
        return 1
    return 0


def node_features(g: MoleculeGraph) -> np.ndarray:
    """Per-atom feature matrix, shape (num_atoms, 9), float64"""
    feats = np.zeros((g.num_atoms, NODE_FEATURE_DIM), dtype=np.float64)
    for i, atom in enumerate(g.atoms):
        feats[i] = (
            ELEMENTS.index(atom.element),
            g.degree(i),
            atom.charge,
            0.0,
            atom.implicit_h,
            hybridization(g, i),
            float(atom.aromatic),
            float(atom.in_ring),
            ATOMIC_MASS[atom.element] / 100.0,
        )
    return feats


def edge_features(g: MoleculeGraph) -> np.ndarray:
    """Per-bond feature matrix, shape (num_bonds, 8), float64"""
    feats = np.zeros((g.num_bonds, EDGE_FEATURE_DIM), dtype=np.float64)
    for k, bond in enumerate(g.bonds):
        feats[k, BOND_ORDERS.index(bond.order)] = 1.0
        feats[k, len(BOND_ORDERS) + STEREO_CLASSES.index(bond.stereo)] = 1.0
        feats[k, -1] = float(bond.conjugated)
    return feats
