"""
Longitudinal patient encoder and prediction head

Three GRU streams (diseases, procedures, medications) run over a patient's
visits. The medication stream at visit t sees the medications of visits
1..t-1 only, with a zero vector in first position.
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from ..utils.errors import IndexOutOfRange, VocabMismatch
from .ehr import EHRVocab, PatientHistory, Visit

INIT_RANGE = 0.1


def _uniform_table(rows: int, dim: int) -> nn.Parameter:
    return nn.Parameter(torch.empty(rows, dim).uniform_(-INIT_RANGE, INIT_RANGE))


class PatientEncoder(nn.Module):
    """
    E_d, E_p, three GRUs and MLP_2

    Args:
        vocab: EHR vocabulary sizes
        dim: Code/medication embedding width
        hidden: GRU hidden width
        mlp_hidden: Hidden width of the prediction MLP
        medication_table: Learn an own medication table E_m instead of using the
            cross-modal encoder (the molecule-free ablation)
    """

    def __init__(self, vocab: EHRVocab, dim: int = 64, hidden: int = 64, mlp_hidden: int = 128,
                 medication_table: bool = False):
        super().__init__()
        self.vocab = vocab
        self.dim = dim
        self.hidden = hidden
        self.disease_table = _uniform_table(vocab.n_diseases, dim)
        self.procedure_table = _uniform_table(vocab.n_procedures, dim)
        self.medication_table = _uniform_table(vocab.n_medications, dim) if medication_table else None
        self.gru_d = nn.GRU(dim, hidden, batch_first=True)
        self.gru_p = nn.GRU(dim, hidden, batch_first=True)
        self.gru_m = nn.GRU(dim, hidden, batch_first=True)
        self.head = nn.Sequential(
            nn.Linear(3 * hidden, mlp_hidden),
            nn.SiLU(),
            nn.Linear(mlp_hidden, vocab.n_medications),
        )

    def _dtype(self) -> torch.dtype:
        return self.disease_table.dtype

    def _multi_hot(self, visits: Sequence[Visit]) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        arrays = [v.multi_hot(self.vocab) for v in visits]
        d, p, m = (torch.as_tensor(np.stack(x), dtype=self._dtype()) for x in zip(*arrays))
        return d, p, m

    def _check_table(self, med_table: Optional[torch.Tensor]) -> torch.Tensor:
        table = self.medication_table if self.medication_table is not None else med_table
        if table is None:
            raise VocabMismatch("no medication embedding table supplied")
        if table.shape != (self.vocab.n_medications, self.dim):
            raise VocabMismatch(
                f"medication table has shape {tuple(table.shape)}, expected ({self.vocab.n_medications}, {self.dim})"
            )
        return table

    @staticmethod
    def _set_mean(multi_hot: torch.Tensor, table: torch.Tensor) -> torch.Tensor:
        """Mean of the active rows; zero for an empty set"""
        counts = multi_hot.sum(dim=-1, keepdim=True).clamp(min=1.0)
        return (multi_hot @ table) / counts

    def visit_embeddings(self, visits: Sequence[Visit], med_table: Optional[torch.Tensor] = None):
        """(e_d, e_p, e_m) for each visit, each (T, dim)"""
        table = self._check_table(med_table)
        d, p, m = self._multi_hot(visits)
        return d @ self.disease_table, p @ self.procedure_table, self._set_mean(m, table)

    def stream_inputs(self, visits: Sequence[Visit], med_table: Optional[torch.Tensor] = None):
        """GRU inputs; the medication stream is shifted right by one visit"""
        e_d, e_p, e_m = self.visit_embeddings(visits, med_table)
        e_m_prev = torch.cat([torch.zeros_like(e_m[:1]), e_m[:-1]], dim=0)
        return e_d, e_p, e_m_prev

    def encode_visits(self, histories: Sequence[PatientHistory],
                      med_table: Optional[torch.Tensor] = None) -> List[torch.Tensor]:
        """e_i for every visit of every patient, one (T, 3 * hidden) tensor per patient"""
        streams = [self.stream_inputs(h.visits, med_table) for h in histories]
        lengths = [len(h) for h in histories]
        outputs = []
        for k, gru in enumerate((self.gru_d, self.gru_p, self.gru_m)):
            padded = nn.utils.rnn.pad_sequence([s[k] for s in streams], batch_first=True)
            out, _ = gru(padded)
            outputs.append(out)
        return [torch.cat([o[i, :n] for o in outputs], dim=-1) for i, n in enumerate(lengths)]

    def predict_scores(self, e_i: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.head(e_i))

    def forward(self, histories: Sequence[PatientHistory],
                med_table: Optional[torch.Tensor] = None) -> List[torch.Tensor]:
        """Per-patient (T, |M|) score tensors"""
        return [self.predict_scores(e) for e in self.encode_visits(histories, med_table)]


def embed_visit(v: Visit, encoder: PatientEncoder, med_table: Optional[torch.Tensor] = None):
    """(e_d, e_p, e_m) of a single visit"""
    e_d, e_p, e_m = encoder.visit_embeddings([v], med_table)
    return e_d[0], e_p[0], e_m[0]


def encode_history(h: PatientHistory, t: int, encoder: PatientEncoder,
                   med_table: Optional[torch.Tensor] = None) -> torch.Tensor:
    """e_i at visit t (1-based), using visits 1..t only"""
    if not 1 <= t <= len(h):
        raise IndexOutOfRange(f"visit index {t} outside 1..{len(h)}")
    prefix = PatientHistory(h.patient_id, h.visits[:t])
    return encoder.encode_visits([prefix], med_table)[0][t - 1]


def predict_scores(e_i: torch.Tensor, encoder: PatientEncoder) -> torch.Tensor:
    return encoder.predict_scores(e_i)


def threshold_select(scores: Union[np.ndarray, torch.Tensor], delta: float = 0.5) -> np.ndarray:
    """m_hat_i = 1 iff score_i >= delta"""
    if isinstance(scores, torch.Tensor):
        scores = scores.detach().cpu().numpy()
    return (np.asarray(scores) >= delta).astype(np.int64)
