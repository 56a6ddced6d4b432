"""
Chemical property descriptors
"""

from dataclasses import astuple, dataclass

import networkx as nx
import numpy as np

from .graph import ATOMIC_MASS, MoleculeGraph

# Additive polar surface area table, per heteroatom
PSA_TABLE = {"O": 20.0, "N": 12.0}

PROPERTY_NAMES = ("molecular_weight", "hba", "hbd", "psa", "aromatic_rings")


@dataclass(frozen=True)
class PropertyVector:
    molecular_weight: float
    hba: int
    hbd: int
    psa: float
    aromatic_rings: int

    def to_array(self) -> np.ndarray:
        return np.asarray(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> 'PropertyVector':
        mw, hba, hbd, psa, arom = (float(v) for v in values)
        return cls(mw, int(round(hba)), int(round(hbd)), psa, int(round(arom)))


def aromatic_ring_count(g: MoleculeGraph) -> int:
    """Rings of a minimum cycle basis whose atoms are all aromatic"""
    if g.num_bonds < 3:
        return 0
    cycles = nx.minimum_cycle_basis(g.to_networkx())
    return sum(1 for cycle in cycles if all(g.atoms[i].aromatic for i in cycle))


def descriptors(g: MoleculeGraph) -> PropertyVector:
    """
    Compute the property vector

    MW counts heavy atoms plus 1.008 per implicit hydrogen; HBA counts N and O;
    HBD counts N and O carrying at least one hydrogen; PSA sums PSA_TABLE.
    """
    mw = sum(ATOMIC_MASS[a.element] for a in g.atoms) + ATOMIC_MASS["H"] * sum(a.implicit_h for a in g.atoms)
    hba = sum(1 for a in g.atoms if a.element in ("N", "O"))
    hbd = sum(1 for a in g.atoms if a.element in ("N", "O") and a.implicit_h >= 1)
    psa = sum(PSA_TABLE.get(a.element, 0.0) for a in g.atoms)
    return PropertyVector(
        molecular_weight=round(mw, 6),
        hba=hba,
        hbd=hbd,
        psa=psa,
        aromatic_rings=aromatic_ring_count(g),
    )
