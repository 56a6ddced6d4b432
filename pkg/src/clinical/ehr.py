"""
EHR data model and the DDI matrix
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import InvalidDDIMatrix, VocabMismatch


@dataclass(frozen=True)
class EHRVocab:
    n_diseases: int
    n_procedures: int
    n_medications: int

    def to_dict(self) -> Dict[str, int]:
        return {"n_diseases": self.n_diseases, "n_procedures": self.n_procedures,
                "n_medications": self.n_medications}


@dataclass(frozen=True)
class Visit:
    """One admission, stored as sorted index sets"""
    diseases: Tuple[int, ...]
    procedures: Tuple[int, ...] = ()
    medications: Tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("diseases", "procedures", "medications"):
            object.__setattr__(self, name, tuple(sorted(set(int(i) for i in getattr(self, name)))))
        if not self.diseases and not self.procedures:
            raise ValueError("a visit needs at least one disease or procedure")

    def multi_hot(self, vocab: EHRVocab) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        self.check(vocab)
        d = np.zeros(vocab.n_diseases)
        p = np.zeros(vocab.n_procedures)
        m = np.zeros(vocab.n_medications)
        d[list(self.diseases)] = 1.0
        p[list(self.procedures)] = 1.0
        m[list(self.medications)] = 1.0
        return d, p, m

    def check(self, vocab: EHRVocab):
        for name, ids, size in (("disease", self.diseases, vocab.n_diseases),
                                ("procedure", self.procedures, vocab.n_procedures),
                                ("medication", self.medications, vocab.n_medications)):
            if ids and (ids[0] < 0 or ids[-1] >= size):
                raise VocabMismatch(f"{name} index outside vocabulary of size {size}: {list(ids)}")

    def to_dict(self) -> Dict[str, List[int]]:
        return {"d": list(self.diseases), "p": list(self.procedures), "m": list(self.medications)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Visit':
        return cls(tuple(data.get("d", ())), tuple(data.get("p", ())), tuple(data.get("m", ())))


@dataclass(frozen=True)
class PatientHistory:
    patient_id: str
    visits: Tuple[Visit, ...]

    def __post_init__(self):
        object.__setattr__(self, "visits", tuple(self.visits))
        if not self.visits:
            raise ValueError(f"patient {self.patient_id} has no visits")

    def __len__(self) -> int:
        return len(self.visits)

    def check(self, vocab: EHRVocab):
        for v in self.visits:
            v.check(vocab)

    def to_dict(self) -> Dict:
        return {"patient_id": self.patient_id, "visits": [v.to_dict() for v in self.visits]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'PatientHistory':
        return cls(str(data["patient_id"]), tuple(Visit.from_dict(v) for v in data["visits"]))


def medication_matrix(histories: Iterable[PatientHistory], n_medications: int) -> np.ndarray:
    """Stack every visit's medication multi-hot, patient by patient, (V, |M|)"""
    rows = []
    for h in histories:
        for v in h.visits:
            row = np.zeros(n_medications)
            row[list(v.medications)] = 1.0
            rows.append(row)
    return np.array(rows).reshape(-1, n_medications)


class DDIMatrix:
    """Symmetric binary interaction matrix with zero diagonal"""

    def __init__(self, matrix: Union[np.ndarray, Sequence[Sequence[int]]]):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidDDIMatrix(f"DDI matrix must be square, got shape {m.shape}")
        if not np.isin(m, (0, 1)).all():
            raise InvalidDDIMatrix("DDI matrix entries must be 0 or 1")
        if not np.array_equal(m, m.T):
            raise InvalidDDIMatrix("DDI matrix is not symmetric")
        if np.any(np.diag(m)):
            raise InvalidDDIMatrix("DDI matrix has a nonzero diagonal")
        self.matrix = m.astype(np.float64)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def pairs(self) -> List[Tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.matrix, k=1))
        return [(int(a), int(b)) for a, b in zip(i, j)]

    def interacts(self, a: int, b: int) -> bool:
        return bool(self.matrix[a, b])

    @classmethod
    def from_pairs(cls, size: int, pairs: Iterable[Sequence[int]]) -> 'DDIMatrix':
        m = np.zeros((size, size), dtype=np.int64)
        for a, b in pairs:
            if a == b:
                raise InvalidDDIMatrix(f"self interaction ({a}, {b})")
            if not (0 <= a < size and 0 <= b < size):
                raise InvalidDDIMatrix(f"pair ({a}, {b}) outside matrix of size {size}")
            m[a, b] = m[b, a] = 1
        return cls(m)

    def to_dict(self) -> Dict:
        return {"size": self.size, "pairs": [list(p) for p in self.pairs()]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'DDIMatrix':
        return cls.from_pairs(int(data["size"]), data["pairs"])

    def save(self, path: Union[str, Path]):
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'DDIMatrix':
        with open(path, 'r') as f:
            try:
                return cls.from_dict(json.load(f))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise InvalidDDIMatrix(f"{path}: malformed DDI file: {e}") from e
