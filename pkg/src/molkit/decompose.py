"""
Simplified BRICS-style decomposition into substructures

Two cut rules, applied to acyclic (bridge) single non-aromatic bonds only:
  1. exactly one endpoint is a ring atom (ring / chain boundary)
  2. either endpoint also carries a double or triple bond (conjugation boundary)
Connected components of the remaining graph are the substructures. When no
bond is cuttable the whole molecule is the single substructure.
"""

from dataclasses import dataclass
from typing import List, Set, Tuple

import networkx as nx

from .graph import DOUBLE, SINGLE, TRIPLE, MoleculeGraph


@dataclass(frozen=True)
class Substructure:
    """Connected fragment of a parent molecule"""
    atom_indices: Tuple[int, ...]
    graph: MoleculeGraph


def cuttable_bonds(g: MoleculeGraph) -> Set[Tuple[int, int]]:
    """Bond keys selected by the two cut rules"""
    if g.num_bonds == 0:
        return set()
    nxg = g.to_networkx()
    bridges = {tuple(sorted(e)) for e in nx.bridges(nxg)}

    unsaturated = [False] * g.num_atoms
    for bond in g.bonds:
        if bond.order in (DOUBLE, TRIPLE):
            unsaturated[bond.begin] = unsaturated[bond.end] = True

    cuts = set()
    for bond in g.bonds:
        if bond.key not in bridges or bond.order != SINGLE:
            continue
        a, b = g.atoms[bond.begin], g.atoms[bond.end]
        if a.aromatic and b.aromatic:
            continue
        ring_boundary = a.in_ring != b.in_ring
        conjugation_boundary = unsaturated[bond.begin] or unsaturated[bond.end]
        if ring_boundary or conjugation_boundary:
            cuts.add(bond.key)
    return cuts


def decompose(g: MoleculeGraph) -> List[Substructure]:
    """
    Decompose a molecule into substructures

    Substructures are ordered by their smallest atom index, so the output is
    deterministic for a given atom ordering.
    """
    cuts = cuttable_bonds(g)
    if not cuts:
        return [Substructure(tuple(range(g.num_atoms)), g)]

    nxg = g.to_networkx()
    nxg.remove_edges_from(cuts)
    components = sorted((sorted(c) for c in nx.connected_components(nxg)), key=lambda c: c[0])
    return [Substructure(tuple(c), g.induced(c)) for c in components]
