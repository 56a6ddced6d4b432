"""
SMILES parsing and writing for the supported organic subset

Grammar: organic-subset atoms B C N O P S F Cl Br I, aromatic b c n o p s,
bond symbols - = # :, branches, single-digit ring closures and bracket atoms
carrying an element, optional H count and optional charge. Isotopes, chirality,
multi-digit ring labels, wildcards and disconnected components are rejected.
"""

import enum
from typing import Dict, Iterator, List, Optional, Tuple

import networkx as nx

from .graph import (
    AROMATIC, AROMATIC_ELEMENTS, BOND_SYMBOLS, DOUBLE, ELEMENTS, SINGLE, TRIPLE,
    AtomRecord, BondRecord, MoleculeGraph,
)
from ..utils.errors import (
    EmptyInput, UnbalancedBranch, UnbalancedRing, UnsupportedToken,
)

# Allowed valences for implicit-hydrogen assignment, smallest first
VALENCES: Dict[str, Tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
BOND_TOKENS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC}
DIGITS = "0123456789"


@enum.unique
class TokenType(enum.Enum):
    """Possible SMILES token types"""
    ATOM = 1
    BOND = 2
    BRANCH_START = 3
    BRANCH_END = 4
    RING_NUM = 5


def _tokenize(smiles: str) -> Iterator[Tuple[TokenType, str, int]]:
    """Yield (type, text, position) tokens"""
    i = 0
    n = len(smiles)
    while i < n:
        char = smiles[i]
        if char == "[":
            close = smiles.find("]", i)
            if close < 0:
                raise UnsupportedToken(f"unterminated bracket atom at position {i}")
            yield TokenType.ATOM, smiles[i:close + 1], i
            i = close + 1
        elif smiles.startswith(("Cl", "Br"), i):
            yield TokenType.ATOM, smiles[i:i + 2], i
            i += 2
        elif char in "BCNOPSFI" or char in AROMATIC_ORGANIC:
            yield TokenType.ATOM, char, i
            i += 1
        elif char in BOND_TOKENS:
            yield TokenType.BOND, char, i
            i += 1
        elif char == "(":
            yield TokenType.BRANCH_START, char, i
            i += 1
        elif char == ")":
            yield TokenType.BRANCH_END, char, i
            i += 1
        elif char in DIGITS:
            yield TokenType.RING_NUM, char, i
            i += 1
        else:
            raise UnsupportedToken(f"unsupported token {char!r} at position {i}")


def _parse_atom(token: str, pos: int) -> Tuple[str, bool, int, Optional[int]]:
    """Returns (element, aromatic, charge, explicit H count or None)"""
    if not token.startswith("["):
        if token in AROMATIC_ORGANIC:
            return token.upper(), True, 0, None
        return token, False, 0, None

    body = token[1:-1]
    if not body:
        raise UnsupportedToken(f"empty bracket atom at position {pos}")
    if body[0] in DIGITS:
        raise UnsupportedToken(f"isotope labels are not supported ({token} at position {pos})")
    if "@" in body:
        raise UnsupportedToken(f"chirality is not supported ({token} at position {pos})")

    # element symbol
    if body[:2] in ("Cl", "Br"):
        symbol, rest = body[:2], body[2:]
    else:
        symbol, rest = body[:1], body[1:]
    aromatic = symbol in AROMATIC_ORGANIC
    element = symbol.upper() if aromatic else symbol
    if element not in ELEMENTS or (aromatic and element not in AROMATIC_ELEMENTS):
        raise UnsupportedToken(f"unsupported element {symbol!r} at position {pos}")

    h_count = 0
    if rest.startswith("H"):
        rest = rest[1:]
        digits = ""
        while rest and rest[0] in DIGITS:
            digits, rest = digits + rest[0], rest[1:]
        h_count = int(digits) if digits else 1

    charge = 0
    if rest:
        sign = 1 if rest[0] == "+" else -1 if rest[0] == "-" else 0
        if sign == 0:
            raise UnsupportedToken(f"unsupported bracket content {token!r} at position {pos}")
        tail = rest[1:]
        if tail and all(c in DIGITS for c in tail):
            charge = sign * int(tail)
        elif tail and set(tail) == {rest[0]}:
            charge = sign * (len(tail) + 1)
        elif not tail:
            charge = sign
        else:
            raise UnsupportedToken(f"unsupported charge {rest!r} at position {pos}")
    return element, aromatic, charge, h_count


def _implicit_h(element: str, aromatic: bool, charge: int, bond_sum: int) -> int:
    """Smallest allowed valence that accommodates the bonds (charge-adjusted)"""
    used = bond_sum + (1 if aromatic else 0)
    for valence in VALENCES[element]:
        # cations of N/O/P/S gain a bond, anions lose one; B and halogens mirror it
        target = valence + (charge if element in ("N", "O", "P", "S") else -charge)
        if target >= used:
            return target - used
    return 0


def parse_smiles(s: str) -> MoleculeGraph:
    """
    Parse a SMILES string of the supported subset into a MoleculeGraph

    Args:
        s: SMILES string

    Returns:
        Connected MoleculeGraph with implicit hydrogens, ring flags and conjugation

    Raises:
        EmptyInput, UnsupportedToken, UnbalancedRing, UnbalancedBranch
    """
    if s is None or not s.strip():
        raise EmptyInput("empty SMILES string")
    s = s.strip()

    atoms: List[Tuple[str, bool, int, Optional[int]]] = []
    bonds: Dict[Tuple[int, int], int] = {}
    branch_stack: List[int] = []
    open_rings: Dict[str, Tuple[int, Optional[int], int]] = {}
    prev: Optional[int] = None
    pending_bond: Optional[int] = None

    def default_order(a: int, b: int) -> int:
        return AROMATIC if atoms[a][1] and atoms[b][1] else SINGLE

    def add_bond(a: int, b: int, order: Optional[int], pos: int):
        key = (min(a, b), max(a, b))
        if a == b or key in bonds:
            raise UnbalancedRing(f"ring closure at position {pos} duplicates an existing bond")
        bonds[key] = order if order is not None else default_order(a, b)

    for kind, text, pos in _tokenize(s):
        if kind is TokenType.ATOM:
            atoms.append(_parse_atom(text, pos))
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending_bond, pos)
            elif pending_bond is not None:
                raise UnsupportedToken(f"bond symbol without a preceding atom at position {pos}")
            prev, pending_bond = idx, None
        elif kind is TokenType.BOND:
            if prev is None or pending_bond is not None:
                raise UnsupportedToken(f"misplaced bond symbol {text!r} at position {pos}")
            pending_bond = BOND_TOKENS[text]
        elif kind is TokenType.BRANCH_START:
            if prev is None or pending_bond is not None:
                raise UnbalancedBranch(f"branch opened without an anchor atom at position {pos}")
            branch_stack.append(prev)
        elif kind is TokenType.BRANCH_END:
            if not branch_stack:
                raise UnbalancedBranch(f"unmatched ')' at position {pos}")
            if pending_bond is not None:
                raise UnsupportedToken(f"dangling bond before ')' at position {pos}")
            prev = branch_stack.pop()
        elif kind is TokenType.RING_NUM:
            if prev is None:
                raise UnbalancedRing(f"ring digit {text} without an atom at position {pos}")
            if text in open_rings:
                partner, order, _ = open_rings.pop(text)
                if order is not None and pending_bond is not None and order != pending_bond:
                    raise UnbalancedRing(f"conflicting bond orders on ring {text}")
                add_bond(partner, prev, pending_bond if pending_bond is not None else order, pos)
            else:
                open_rings[text] = (prev, pending_bond, pos)
            pending_bond = None

    if pending_bond is not None:
        raise UnsupportedToken("SMILES ends with a bond symbol")
    if branch_stack:
        raise UnbalancedBranch(f"{len(branch_stack)} unclosed branch(es)")
    if open_rings:
        digits = ", ".join(sorted(open_rings))
        raise UnbalancedRing(f"unpaired ring closure digit(s): {digits}")
    if not atoms:
        raise EmptyInput("no atoms in SMILES string")

    return assemble(atoms, bonds)


def assemble(atoms: List[Tuple[str, bool, int, Optional[int]]], bonds: Dict[Tuple[int, int], int]) -> MoleculeGraph:
    """Derive implicit H, ring membership and conjugation, then build the graph"""
    n = len(atoms)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(bonds)
    if n > 1 and not nx.is_connected(g):
        raise UnsupportedToken("disconnected structures are not supported")

    bridges = set(tuple(sorted(e)) for e in nx.bridges(g)) if n > 1 else set()
    ring_bonds = {key for key in bonds if key not in bridges}
    in_ring = [False] * n
    for a, b in ring_bonds:
        in_ring[a] = in_ring[b] = True

    bond_sum = [0] * n
    unsaturated = [False] * n
    for (a, b), order in bonds.items():
        contribution = 1 if order == AROMATIC else order
        bond_sum[a] += contribution
        bond_sum[b] += contribution
        if order != SINGLE:
            unsaturated[a] = unsaturated[b] = True

    records = []
    for i, (element, aromatic, charge, explicit_h) in enumerate(atoms):
        h = explicit_h if explicit_h is not None else _implicit_h(element, aromatic, charge, bond_sum[i])
        records.append(AtomRecord(element=element, charge=charge, aromatic=aromatic,
                                  implicit_h=h, in_ring=in_ring[i]))

    bond_records = []
    for (a, b), order in sorted(bonds.items()):
        conjugated = order != SINGLE or (unsaturated[a] and unsaturated[b])
        bond_records.append(BondRecord(a, b, order, conjugated, "none"))

    return MoleculeGraph(atoms=tuple(records), bonds=tuple(bond_records))


def _bracket(atom: AtomRecord, symbol: str) -> str:
    h = "" if atom.implicit_h == 0 else "H" if atom.implicit_h == 1 else f"H{atom.implicit_h}"
    if atom.charge == 0:
        charge = ""
    elif abs(atom.charge) == 1:
        charge = "+" if atom.charge > 0 else "-"
    else:
        charge = f"{'+' if atom.charge > 0 else '-'}{abs(atom.charge)}"
    return f"[{symbol}{h}{charge}]"


def unparse(g: MoleculeGraph) -> str:
    """
    Write a MoleculeGraph back to SMILES

    Charged atoms and atoms whose hydrogen count differs from the valence
    default become bracket atoms with an explicit H count, so the result parses
    back to an isomorphic graph. Bond symbols are written only where the order
    differs from the default implied by the two endpoints.
    """
    n = g.num_atoms
    visited = [False] * n
    parent = [-1] * n
    dfs_order: List[int] = []
    tree_edges = set()

    stack = [0]
    while stack:
        atom = stack.pop()
        if visited[atom]:
            continue
        visited[atom] = True
        dfs_order.append(atom)
        if parent[atom] >= 0:
            tree_edges.add((min(atom, parent[atom]), max(atom, parent[atom])))
        for nb, _ in sorted(g.neighbors(atom), reverse=True):
            if not visited[nb]:
                parent[nb] = atom
                stack.append(nb)

    rank = {a: i for i, a in enumerate(dfs_order)}
    children: Dict[int, List[int]] = {i: [] for i in range(n)}
    for atom in dfs_order:
        if parent[atom] >= 0:
            children[parent[atom]].append(atom)
    # ring-closure bonds, opened at the atom written first
    closures = sorted(
        (tuple(sorted(b.key, key=lambda a: rank[a])) for b in g.bonds if b.key not in tree_edges),
        key=lambda c: (rank[c[0]], rank[c[1]])
    )

    def bond_symbol(a: int, b: int) -> str:
        bond = g.bond_between(a, b)
        default = AROMATIC if g.atoms[a].aromatic and g.atoms[b].aromatic else SINGLE
        return "" if bond.order == default else BOND_SYMBOLS[bond.order]

    def atom_text(i: int) -> str:
        atom = g.atoms[i]
        symbol = atom.element.lower() if atom.aromatic else atom.element
        bond_sum = sum(1 if g.bonds[b].order == AROMATIC else g.bonds[b].order for _, b in g.neighbors(i))
        if atom.charge == 0 and _implicit_h(atom.element, atom.aromatic, 0, bond_sum) == atom.implicit_h:
            return symbol
        return _bracket(atom, symbol)

    free_digits = [str(d) for d in range(1, 10)] + ["0"]
    open_digits: Dict[Tuple[int, int], str] = {}
    out: List[str] = []

    def emit(atom: int):
        out.append(atom_text(atom))
        for first, second in closures:
            if atom == second and (first, second) in open_digits:
                digit = open_digits.pop((first, second))
                out.append(bond_symbol(first, second) + digit)
                free_digits.insert(0, digit)
        for first, second in closures:
            if atom == first:
                if not free_digits:
                    raise UnsupportedToken("more than ten simultaneous ring closures")
                digit = free_digits.pop(0)
                open_digits[(first, second)] = digit
                out.append(bond_symbol(first, second) + digit)
        kids = children[atom]
        for k, child in enumerate(kids):
            branch = k < len(kids) - 1
            if branch:
                out.append("(")
            out.append(bond_symbol(atom, child))
            emit(child)
            if branch:
                out.append(")")

    emit(0)
    return "".join(out)
