"""
Template text descriptions (the text modality)

A description is a short list of segments, each a templated phrase over
descriptor values. Numbers are spelled digit by digit so the vocabulary stays
fixed and small.
"""

from dataclasses import dataclass
from typing import List, Tuple

import networkx as nx
import numpy as np

from .decompose import decompose
from .descriptors import descriptors
from .graph import MoleculeGraph

MAX_TOKENS = 64

WORDS = (
    "molecule", "with", "heavy", "atom", "atoms", "ring", "rings",
    "weight", "mass", "acceptors", "donors", "surface", "polar", "area",
    "substructure", "substructures", "aromatic", "and", "has",
)
DIGITS = tuple(str(d) for d in range(10))
SPECIALS = ("<pad>",)

VOCAB: Tuple[str, ...] = SPECIALS + DIGITS + WORDS
TOKEN_INDEX = {tok: i for i, tok in enumerate(VOCAB)}
PAD_ID = TOKEN_INDEX["<pad>"]


@dataclass(frozen=True)
class TextDescription:
    token_ids: Tuple[int, ...]
    segments: Tuple[Tuple[int, int], ...]   # half-open [start, end) ranges

    @property
    def tokens(self) -> List[str]:
        return [VOCAB[i] for i in self.token_ids]


def _number(value: float) -> List[str]:
    return list(str(int(round(value))))


def _plural(n: int, singular: str, plural: str) -> str:
    return singular if n == 1 else plural


def ring_count(g: MoleculeGraph) -> int:
    return len(nx.cycle_basis(g.to_networkx()))


def _segments(g: MoleculeGraph, rng: np.random.Generator) -> List[List[str]]:
    props = descriptors(g)
    n_rings = ring_count(g)
    n_sub = len(decompose(g))

    first = ["molecule", "with", *_number(g.num_atoms), "heavy", _plural(g.num_atoms, "atom", "atoms"),
             *_number(n_rings), _plural(n_rings, "ring", "rings")]
    mass_word = str(rng.choice(["weight", "mass"]))
    second = [mass_word, *_number(props.molecular_weight),
              "acceptors", *_number(props.hba), "donors", *_number(props.hbd)]
    third = ["polar", "surface", "area", *_number(props.psa)]
    fourth = ["has", *_number(n_sub), _plural(n_sub, "substructure", "substructures"),
              "and", *_number(props.aromatic_rings), "aromatic", _plural(props.aromatic_rings, "ring", "rings")]
    return [first, second, third, fourth]


def describe(g: MoleculeGraph, seed: int = 0) -> TextDescription:
    """
    Build the templated description of a molecule

    The seed only picks between synonymous mass words; the facts stated are a
    function of the graph. Output is truncated to MAX_TOKENS tokens.
    """
    rng = np.random.default_rng(seed)
    token_ids: List[int] = []
    segments: List[Tuple[int, int]] = []
    for words in _segments(g, rng):
        start = len(token_ids)
        if start >= MAX_TOKENS:
            break
        ids = [TOKEN_INDEX[w] for w in words][:MAX_TOKENS - start]
        token_ids.extend(ids)
        segments.append((start, len(token_ids)))
    return TextDescription(tuple(token_ids), tuple(segments))
