"""
Seeded generators for the molecule corpus, modality observations, DDI matrix and EHR
"""

import math
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from ..align.records import MODALITY_FIELDS, CoverageProfile, MultimodalRecord
from ..clinical.ehr import DDIMatrix, EHRVocab, PatientHistory, Visit
from ..molkit import (
    KGTriple, MoleculeGraph, descriptors, describe, generate_conformer, parse_smiles, rasterize, synth_kg,
)
from ..utils.config_loader import MODALITIES
from ..utils.errors import ExhaustedAttempts, RelaxationFailure
from .spec import SynthSpec

Rules = Dict[str, Dict[int, List[int]]]

MAX_CHAIN = 8
ATTEMPTS_PER_MOLECULE = 50
CONFORMER_RETRIES = 3

# Element weights for the first chain atom, and for the rest of the chain
HEAD_ATOMS = (("C", 0.55), ("N", 0.12), ("O", 0.12), ("S", 0.05), ("F", 0.08), ("Cl", 0.08))
CHAIN_ATOMS = (("C", 0.65), ("N", 0.15), ("O", 0.15), ("S", 0.05))
RINGS = ("c1ccccc1", "c1ccncc1", "C1CCCCC1", "C1CCCC1", "C1CCOC1")
RING_PROBABILITY = 0.4
DOUBLE_PROBABILITY = 0.15
TRIPLE_PROBABILITY = 0.05
HALOGENS = ("F", "Cl")

# Stream tags for SeedSequence-derived generators
_MOLECULES, _COVERAGE, _OBSERVATION, _DDI, _RULES, _PATIENT = range(6)


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(list(key))


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def _pick(rng: np.random.Generator, table) -> str:
    symbols, weights = zip(*table)
    return symbols[rng.choice(len(symbols), p=np.array(weights) / sum(weights))]


def sample_smiles(rng: np.random.Generator) -> str:
    """
    One string from the generator grammar: a chain of 1-8 atoms with optional
    heteroatoms and at most one multiple bond per atom, optionally ending in a ring
    """
    length = int(rng.integers(1, MAX_CHAIN + 1))
    with_ring = rng.random() < RING_PROBABILITY
    atoms = [_pick(rng, HEAD_ATOMS)] + [_pick(rng, CHAIN_ATOMS) for _ in range(length - 1)]
    multiple = [False] * length

    parts = [atoms[0]]
    for i in range(1, length):
        bond = ""
        prev, cur = atoms[i - 1], atoms[i]
        free = not multiple[i - 1] and prev not in HALOGENS
        terminal_carbonyl = cur == "O" and i == length - 1 and not with_ring
        if free and prev == "C" and (cur == "C" or terminal_carbonyl):
            draw = rng.random()
            if cur == "C" and draw < TRIPLE_PROBABILITY:
                bond = "#"
            elif draw < TRIPLE_PROBABILITY + DOUBLE_PROBABILITY:
                bond = "="
        if bond:
            multiple[i - 1] = multiple[i] = True
        parts.append(bond + cur)
    if with_ring:
        parts.append(RINGS[int(rng.integers(len(RINGS)))])
    return "".join(parts)


def gen_molecules(spec: SynthSpec) -> List[Tuple[str, str]]:
    """
    Unique molecules as (id, SMILES), ids mol0000, mol0001, ...

    Raises:
        ExhaustedAttempts: de-duplication could not reach n_molecules
    """
    rng = _rng(spec.seed, _MOLECULES)
    seen = set()
    corpus: List[Tuple[str, str]] = []
    budget = ATTEMPTS_PER_MOLECULE * spec.n_molecules
    attempts = 0
    while len(corpus) < spec.n_molecules:
        if attempts >= budget:
            raise ExhaustedAttempts(
                f"only {len(corpus)} unique molecules after {attempts} attempts (wanted {spec.n_molecules})"
            )
        attempts += 1
        smiles = sample_smiles(rng)
        key = parse_smiles(smiles).canonical_id
        if key in seen:
            continue
        seen.add(key)
        corpus.append((f"mol{len(corpus):04d}", smiles))
    logger.info(f"Generated {len(corpus)} unique molecules in {attempts} attempts")
    return corpus


def _conformer(g: MoleculeGraph, seed: int, index: int):
    for attempt in range(CONFORMER_RETRIES):
        try:
            return generate_conformer(g, _derived_seed(seed, _OBSERVATION, index, 2, attempt))
        except RelaxationFailure as e:
            logger.debug(f"conformer attempt {attempt} failed: {e}")
    return None


def gen_modalities(molecules: Sequence[Tuple[str, str]], coverage: CoverageProfile, seed: int,
                   image_size: int = 32) -> List[MultimodalRecord]:
    """
    Attach each modality independently with its coverage probability

    A molecule whose draw comes up empty gets one modality, picked with weights
    proportional to coverage. A molecule whose conformer cannot be relaxed loses
    the structure modality and, if that leaves it bare, falls back to the best
    covered modality other than structure.

    Raises:
        RelaxationFailure: structure is the only covered modality and a conformer failed
    """
    rng = _rng(seed, _COVERAGE)
    weights = np.array([coverage.probabilities.get(m, 0.0) for m in MODALITIES])
    present = rng.random((len(molecules), len(MODALITIES))) < weights
    empty = ~present.any(axis=1)
    if empty.any():
        forced = rng.choice(len(MODALITIES), size=int(empty.sum()), p=weights / weights.sum())
        present[np.flatnonzero(empty), forced] = True
    fallback = [m for m in sorted(MODALITIES, key=lambda m: -coverage.probabilities.get(m, 0.0))
                if m != "structure" and coverage.probabilities.get(m, 0.0) > 0]

    records: List[MultimodalRecord] = []
    dropped = 0
    for i, (mol_id, smiles) in enumerate(tqdm(molecules, desc="Modalities", leave=False)):
        g = parse_smiles(smiles)
        chosen = [m for j, m in enumerate(MODALITIES) if present[i, j]]
        fields = {}
        for modality in chosen:
            fields[modality] = _observe(modality, g, mol_id, seed, i, image_size)
        if "structure" in chosen and fields["structure"] is None:
            dropped += 1
            del fields["structure"]
            if not fields:
                if not fallback:
                    raise RelaxationFailure(f"{mol_id}: no conformer and no other covered modality")
                fields[fallback[0]] = _observe(fallback[0], g, mol_id, seed, i, image_size)
        records.append(MultimodalRecord(mol_id=mol_id, smiles=smiles, graph=g,
                                        **{MODALITY_FIELDS[m]: v for m, v in fields.items()}))
    if dropped:
        logger.warning(f"{dropped} molecules lost the structure modality (relaxation failed)")
    return records


def _observe(modality: str, g: MoleculeGraph, mol_id: str, seed: int, index: int, image_size: int):
    if modality == "image":
        return rasterize(g, size=image_size, seed=_derived_seed(seed, _OBSERVATION, index, 0))
    if modality == "text":
        return describe(g, seed=_derived_seed(seed, _OBSERVATION, index, 1))
    if modality == "structure":
        return _conformer(g, seed, index)
    if modality == "props":
        return descriptors(g)
    return mol_id


def kg_triples(records: Sequence[MultimodalRecord], seed: int) -> List[KGTriple]:
    """KG triples for the records that carry the KG modality"""
    properties = {r.kg_id: descriptors(r.graph) for r in records if r.kg_id is not None}
    if not properties:
        return []
    return synth_kg(properties, seed)


def gen_ddi(spec: SynthSpec) -> DDIMatrix:
    """Symmetric Bernoulli(ddi_density) interactions with a zero diagonal"""
    rng = _rng(spec.seed, _DDI)
    n = spec.n_medications
    upper = np.triu((rng.random((n, n)) < spec.ddi_density).astype(np.float64), k=1)
    return DDIMatrix(upper + upper.T)


def _similarity_key(g: MoleculeGraph) -> Tuple[int, int]:
    return min(g.num_atoms // 3, 4), min(descriptors(g).aromatic_rings, 1)


def _rule_medications(rng: np.random.Generator, size: int, groups: Dict[Tuple[int, int], List[int]],
                      keys: Sequence[Tuple[int, int]], ddi: DDIMatrix) -> List[int]:
    """Anchor plus look-alike medications, never two that interact"""
    if size == 0:
        return []
    n = len(keys)
    anchor = int(rng.integers(n))
    similar = [int(m) for m in rng.permutation(groups[keys[anchor]]) if m != anchor]
    taken = set(similar)
    others = [int(m) for m in rng.permutation(n) if m != anchor and m not in taken]
    chosen = [anchor]
    for m in similar + others:
        if len(chosen) == size:
            break
        if not any(ddi.interacts(m, c) for c in chosen):
            chosen.append(m)
    return sorted(chosen)


def gen_rules(spec: SynthSpec, molecules: Sequence[Tuple[str, str]], ddi: DDIMatrix) -> Rules:
    """
    Hidden rule table: every disease maps to 1-3 medications, every procedure to 0-2

    Medication j is molecule j of the corpus. A rule's medications share a
    structural profile with its anchor, so molecular similarity predicts
    co-prescription.
    """
    keys = [_similarity_key(parse_smiles(smiles)) for _, smiles in molecules[:spec.n_medications]]
    groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for m, key in enumerate(keys):
        groups[key].append(m)

    rng = _rng(spec.seed, _RULES)
    disease = {d: _rule_medications(rng, 1 + int(rng.integers(3)), groups, keys, ddi)
               for d in range(spec.n_diseases)}
    procedure = {p: _rule_medications(rng, int(rng.integers(3)), groups, keys, ddi)
                 for p in range(spec.n_procedures)}
    return {"disease": disease, "procedure": procedure}


def rule_union(rules: Rules, diseases: Sequence[int], procedures: Sequence[int]) -> List[int]:
    meds = set()
    for d in diseases:
        meds.update(rules["disease"].get(d, []))
    for p in procedures:
        meds.update(rules["procedure"].get(p, []))
    return sorted(meds)


def _patient(spec: SynthSpec, rules: Rules, index: int) -> PatientHistory:
    rng = _rng(spec.seed, _PATIENT, index)
    n_visits = 1 + int(rng.poisson(spec.visits_mean - 1))
    visits = []
    previous: List[int] = []
    for _ in range(n_visits):
        target = int(rng.integers(1, 6))
        carried = [int(d) for d in rng.choice(previous, size=math.ceil(len(previous) / 2), replace=False)] \
            if previous else []
        pool = np.setdiff1d(np.arange(spec.n_diseases), carried)
        n_new = min(max(0, target - len(carried)), len(pool))
        diseases = sorted(set(carried) | {int(d) for d in rng.choice(pool, size=n_new, replace=False)})
        n_proc = min(int(rng.integers(0, 4)), spec.n_procedures)
        procedures = sorted(int(p) for p in rng.choice(spec.n_procedures, size=n_proc, replace=False))

        meds = set(rule_union(rules, diseases, procedures))
        flip, flipped = rng.random() < spec.rule_noise, int(rng.integers(spec.n_medications))
        if flip:
            meds ^= {flipped}
        visits.append(Visit(tuple(diseases), tuple(procedures), tuple(sorted(meds))))
        previous = diseases
    return PatientHistory(f"patient{index:05d}", tuple(visits))


def gen_ehr(spec: SynthSpec, molecules: Sequence[Tuple[str, str]],
            ddi: DDIMatrix) -> Tuple[List[PatientHistory], Rules]:
    """
    Synthetic patients whose prescriptions follow the hidden rules

    Each visit samples 1-5 diseases (half of the previous visit's diseases
    carried over) and 0-3 procedures; medications are the rule union, with one
    random entry flipped with probability rule_noise.

    Returns:
        (patients, rule table)
    """
    if ddi.size != spec.n_medications:
        raise ValueError(f"DDI matrix covers {ddi.size} medications, spec {spec.n_medications}")
    rules = gen_rules(spec, molecules, ddi)
    patients = [_patient(spec, rules, i) for i in range(spec.n_patients)]
    n_visits = sum(len(p) for p in patients)
    logger.info(f"Generated {len(patients)} patients with {n_visits} visits "
                f"(mean {n_visits / len(patients):.2f})")
    return patients, rules


def ehr_vocab(spec: SynthSpec) -> EHRVocab:
    return EHRVocab(spec.n_diseases, spec.n_procedures, spec.n_medications)
