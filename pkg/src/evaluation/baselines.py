"""
Reference predictors bracketing a trained model: per-disease frequency and the rule oracle
"""

from typing import Dict, List, Sequence

import numpy as np

from ..clinical.ehr import EHRVocab, PatientHistory


class FrequencyBaseline:
    """Score of m for a visit = max over its diseases of P(m | disease) on the training set"""

    def __init__(self, conditional: np.ndarray, prior: np.ndarray):
        self.conditional = conditional     # (|D|, |M|)
        self.prior = prior                 # (|M|,)

    @classmethod
    def fit(cls, histories: Sequence[PatientHistory], vocab: EHRVocab) -> 'FrequencyBaseline':
        co = np.zeros((vocab.n_diseases, vocab.n_medications))
        seen = np.zeros(vocab.n_diseases)
        prior = np.zeros(vocab.n_medications)
        visits = 0
        for h in histories:
            for v in h.visits:
                meds = list(v.medications)
                prior[meds] += 1
                visits += 1
                for d in v.diseases:
                    seen[d] += 1
                    co[d, meds] += 1
        conditional = co / np.maximum(seen, 1)[:, None]
        return cls(conditional, prior / max(visits, 1))

    def predict(self, histories: Sequence[PatientHistory]) -> List[np.ndarray]:
        out = []
        for h in histories:
            rows = []
            for v in h.visits:
                rows.append(self.conditional[list(v.diseases)].max(axis=0) if v.diseases else self.prior)
            out.append(np.array(rows))
        return out

    __call__ = predict


class RuleOracle:
    """Scores 1 exactly on the union of the hidden rule outputs of a visit"""

    def __init__(self, rules: Dict[str, Dict[int, List[int]]], n_medications: int):
        self.disease_rules = {int(k): list(v) for k, v in rules["disease"].items()}
        self.procedure_rules = {int(k): list(v) for k, v in rules["procedure"].items()}
        self.n_medications = n_medications

    def visit_scores(self, diseases: Sequence[int], procedures: Sequence[int]) -> np.ndarray:
        row = np.zeros(self.n_medications)
        for d in diseases:
            row[self.disease_rules.get(d, [])] = 1.0
        for p in procedures:
            row[self.procedure_rules.get(p, [])] = 1.0
        return row

    def predict(self, histories: Sequence[PatientHistory]) -> List[np.ndarray]:
        return [np.array([self.visit_scores(v.diseases, v.procedures) for v in h.visits]) for h in histories]

    __call__ = predict
