"""
Molecular graph data model shared by every modality
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

# Bond orders; AROMATIC is its own class rather than 1.5
SINGLE, DOUBLE, TRIPLE, AROMATIC = 1, 2, 3, 4
BOND_ORDERS = (SINGLE, DOUBLE, TRIPLE, AROMATIC)
BOND_SYMBOLS = {SINGLE: "-", DOUBLE: "=", TRIPLE: "#", AROMATIC: ":"}

STEREO_CLASSES = ("none", "cis", "trans")

ELEMENTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ELEMENTS = ("B", "C", "N", "O", "P", "S")

ATOMIC_MASS = {
    "H": 1.008,
    "B": 10.81,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "P": 30.974,
    "S": 32.06,
    "F": 18.998,
    "Cl": 35.45,
    "Br": 79.904,
    "I": 126.904,
}


@dataclass(frozen=True)
class AtomRecord:
    """One heavy atom"""
    element: str
    charge: int = 0
    aromatic: bool = False
    implicit_h: int = 0
    in_ring: bool = False


@dataclass(frozen=True)
class BondRecord:
    """Undirected bond, stored with begin < end"""
    begin: int
    end: int
    order: int = SINGLE
    conjugated: bool = False
    stereo: str = "none"

    @property
    def key(self) -> Tuple[int, int]:
        return (self.begin, self.end)


@dataclass(frozen=True)
class MoleculeGraph:
    """
    Heavy-atom molecular graph

    Invariants (checked in __post_init__): valid bond endpoints, no self bonds,
    no duplicate bonds, connected.
    """
    atoms: Tuple[AtomRecord, ...]
    bonds: Tuple[BondRecord, ...]
    _adjacency: Dict[int, List[Tuple[int, int]]] = field(default=None, init=False, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.atoms)
        if n == 0:
            raise ValueError("molecule has no atoms")
        seen = set()
        adjacency: Dict[int, List[Tuple[int, int]]] = {i: [] for i in range(n)}
        for b_idx, bond in enumerate(self.bonds):
            if not (0 <= bond.begin < n and 0 <= bond.end < n):
                raise ValueError(f"bond {bond.key} references a missing atom")
            if bond.begin == bond.end:
                raise ValueError(f"self bond on atom {bond.begin}")
            if bond.begin > bond.end:
                raise ValueError(f"bond {bond.key} not stored with begin < end")
            if bond.key in seen:
                raise ValueError(f"duplicate bond {bond.key}")
            seen.add(bond.key)
            adjacency[bond.begin].append((bond.end, b_idx))
            adjacency[bond.end].append((bond.begin, b_idx))
        object.__setattr__(self, "_adjacency", adjacency)
        if n > 1 and not nx.is_connected(self.to_networkx()):
            raise ValueError("molecule graph is not connected")

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def neighbors(self, atom: int) -> List[Tuple[int, int]]:
        """(neighbor atom, bond index) pairs"""
        return self._adjacency[atom]

    def degree(self, atom: int) -> int:
        return len(self._adjacency[atom])

    def bond_between(self, a: int, b: int) -> Optional[BondRecord]:
        for other, b_idx in self._adjacency[a]:
            if other == b:
                return self.bonds[b_idx]
        return None

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for i, atom in enumerate(self.atoms):
            g.add_node(i, element=atom.element, charge=atom.charge, aromatic=atom.aromatic,
                       label=f"{atom.element}{'a' if atom.aromatic else ''}{atom.charge:+d}")
        for bond in self.bonds:
            g.add_edge(bond.begin, bond.end, order=bond.order, label=str(bond.order))
        return g

    @cached_property
    def canonical_id(self) -> str:
        """Permutation-invariant Weisfeiler-Lehman hash of the labelled graph"""
        g = self.to_networkx()
        return nx.weisfeiler_lehman_graph_hash(g, node_attr="label", edge_attr="label", iterations=4)

    def induced(self, atom_indices: Sequence[int]) -> 'MoleculeGraph':
        """Induced subgraph on the given atoms, reindexed in ascending order"""
        keep = sorted(set(atom_indices))
        remap = {old: new for new, old in enumerate(keep)}
        atoms = tuple(self.atoms[i] for i in keep)
        bonds = tuple(
            BondRecord(remap[b.begin], remap[b.end], b.order, b.conjugated, b.stereo)
            for b in self.bonds if b.begin in remap and b.end in remap
        )
        return MoleculeGraph(atoms=atoms, bonds=bonds)

    def permuted(self, perm: Sequence[int]) -> 'MoleculeGraph':
        """Reindex atoms: new atom i is old atom perm[i]"""
        inverse = {old: new for new, old in enumerate(perm)}
        atoms = tuple(self.atoms[old] for old in perm)
        bonds = []
        for b in self.bonds:
            u, v = inverse[b.begin], inverse[b.end]
            bonds.append(BondRecord(min(u, v), max(u, v), b.order, b.conjugated, b.stereo))
        bonds.sort(key=lambda b: b.key)
        return MoleculeGraph(atoms=atoms, bonds=tuple(bonds))
