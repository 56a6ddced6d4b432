"""
Synthetic 3-D conformer generation

Breadth-first layered placement at the target bond length, seeded jitter, then
a short L-BFGS relaxation of a spring + soft-repulsion energy.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..utils.errors import RelaxationFailure
from .graph import MoleculeGraph

BOND_LENGTH = 1.5
JITTER = 0.2
MIN_BOND, MAX_BOND = 0.8, 2.0
REPULSION_RADIUS = 2.0
MAX_STEPS = 200

BOND_WEIGHT = 10.0
REPULSION_WEIGHT = 1.0


@dataclass(frozen=True, eq=False)
class Conformer:
    coordinates: np.ndarray   # (num_atoms, 3)
    parent: MoleculeGraph
    seed: int

    def bond_lengths(self) -> np.ndarray:
        if self.parent.num_bonds == 0:
            return np.zeros(0)
        idx = np.array([b.key for b in self.parent.bonds])
        return np.linalg.norm(self.coordinates[idx[:, 0]] - self.coordinates[idx[:, 1]], axis=1)


def _unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)


def _layered_placement(g: MoleculeGraph, rng: np.random.Generator) -> np.ndarray:
    coords = np.zeros((g.num_atoms, 3))
    directions = _unit_vectors(rng, g.num_atoms)
    placed = [False] * g.num_atoms
    placed[0] = True
    queue = deque([0])
    while queue:
        atom = queue.popleft()
        for nb, _ in g.neighbors(atom):
            if placed[nb]:
                continue
            coords[nb] = coords[atom] + BOND_LENGTH * directions[nb]
            placed[nb] = True
            queue.append(nb)
    return coords


def _energy_and_grad(flat, bond_i, bond_j, pair_i, pair_j):
    x = flat.reshape(-1, 3)
    grad = np.zeros_like(x)
    energy = 0.0

    if len(bond_i):
        diff = x[bond_i] - x[bond_j]
        dist = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
        stretch = dist - BOND_LENGTH
        energy += BOND_WEIGHT * np.sum(stretch ** 2)
        g = (2.0 * BOND_WEIGHT * stretch / dist)[:, None] * diff
        np.add.at(grad, bond_i, g)
        np.add.at(grad, bond_j, -g)

    if len(pair_i):
        diff = x[pair_i] - x[pair_j]
        dist = np.maximum(np.linalg.norm(diff, axis=1), 1e-9)
        overlap = np.maximum(REPULSION_RADIUS - dist, 0.0)
        energy += REPULSION_WEIGHT * np.sum(overlap ** 2)
        g = (-2.0 * REPULSION_WEIGHT * overlap / dist)[:, None] * diff
        np.add.at(grad, pair_i, g)
        np.add.at(grad, pair_j, -g)

    return energy, grad.ravel()


def generate_conformer(g: MoleculeGraph, seed: int) -> Conformer:
    """
    Generate a conformer deterministic in (g, seed)

    Args:
        g: Molecule graph
        seed: Seed for placement directions and jitter

    Returns:
        Conformer centred at the origin

    Raises:
        RelaxationFailure: some bond length is outside [0.8, 2.0] after relaxation
    """
    rng = np.random.default_rng(seed)
    coords = _layered_placement(g, rng)
    jitter = _unit_vectors(rng, g.num_atoms) * rng.uniform(0.0, JITTER, size=(g.num_atoms, 1))
    coords = coords + jitter

    if g.num_atoms > 1:
        bonded = {b.key for b in g.bonds}
        bond_i = np.array([b.begin for b in g.bonds], dtype=int)
        bond_j = np.array([b.end for b in g.bonds], dtype=int)
        iu, ju = np.triu_indices(g.num_atoms, k=1)
        keep = np.array([(int(a), int(b)) not in bonded for a, b in zip(iu, ju)], dtype=bool)
        pair_i, pair_j = iu[keep], ju[keep]

        result = minimize(
            _energy_and_grad, coords.ravel(), args=(bond_i, bond_j, pair_i, pair_j),
            jac=True, method="L-BFGS-B", options={"maxiter": MAX_STEPS},
        )
        coords = result.x.reshape(-1, 3)

    coords = coords - coords.mean(axis=0, keepdims=True)
    conformer = Conformer(coordinates=coords, parent=g, seed=seed)

    if not np.all(np.isfinite(coords)):
        raise RelaxationFailure(f"non-finite coordinates for seed {seed}")
    lengths = conformer.bond_lengths()
    if lengths.size and (lengths.min() < MIN_BOND or lengths.max() > MAX_BOND):
        raise RelaxationFailure(
            f"bond lengths in [{lengths.min():.3f}, {lengths.max():.3f}] after {MAX_STEPS} steps (seed {seed})"
        )
    return conformer
