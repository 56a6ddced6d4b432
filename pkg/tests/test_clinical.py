"""
EHR model, DDI matrix, patient encoder and formal training
"""

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck
from torch.func import functional_call

from src.clinical import (
    ClinicalModel, DDIMatrix, EHRVocab, PatientEncoder, PatientHistory, TrainConfig, Visit, embed_visit,
    encode_history, medication_matrix, predict_scores, threshold_select, train_clinical,
)
from src.encoders import CrossModalEncoder
from src.molkit import parse_smiles
from src.objective import LossWeights, bce_loss, combined_loss, ddi_loss, hinge_loss
from src.utils.errors import IndexOutOfRange, InvalidDDIMatrix, VocabMismatch

VOCAB = EHRVocab(n_diseases=5, n_procedures=3, n_medications=4)


def _history(pid: str = "p0") -> PatientHistory:
    return PatientHistory(pid, (
        Visit((0, 1), (2,), (0, 3)),
        Visit((1,), (), (1,)),
        Visit((4, 2), (0, 1), (2, 3)),
    ))


def _encoder(seed: int = 0, table: bool = True) -> PatientEncoder:
    torch.manual_seed(seed)
    return PatientEncoder(VOCAB, dim=8, hidden=6, mlp_hidden=10, medication_table=table).double().eval()


# data model

def test_visit_sorts_and_deduplicates():
    v = Visit((3, 1, 3), (2, 0), (1, 1))
    assert v.diseases == (1, 3) and v.procedures == (0, 2) and v.medications == (1,)
    assert Visit.from_dict(v.to_dict()) == v


def test_visit_needs_a_diagnosis_or_procedure():
    with pytest.raises(ValueError):
        Visit((), (), (1,))
    assert Visit((), (1,)).procedures == (1,)


def test_visit_multi_hot_and_vocab_check():
    d, p, m = Visit((0, 4), (1,), (2,)).multi_hot(VOCAB)
    assert d.tolist() == [1, 0, 0, 0, 1]
    assert p.tolist() == [0, 1, 0]
    assert m.tolist() == [0, 0, 1, 0]
    with pytest.raises(VocabMismatch):
        Visit((5,)).check(VOCAB)
    with pytest.raises(VocabMismatch):
        Visit((0,), (), (4,)).multi_hot(VOCAB)


def test_patient_needs_visits():
    with pytest.raises(ValueError):
        PatientHistory("empty", ())


def test_medication_matrix_stacks_visits():
    m = medication_matrix([_history(), _history("p1")], 4)
    assert m.shape == (6, 4)
    assert m[0].tolist() == [1, 0, 0, 1]
    assert m[2].tolist() == [0, 0, 1, 1]


def test_ddi_matrix_validation():
    with pytest.raises(InvalidDDIMatrix):
        DDIMatrix([[0, 1], [0, 0]])
    with pytest.raises(InvalidDDIMatrix):
        DDIMatrix([[1, 0], [0, 0]])
    with pytest.raises(InvalidDDIMatrix):
        DDIMatrix([[0, 2], [2, 0]])
    with pytest.raises(InvalidDDIMatrix):
        DDIMatrix(np.zeros((2, 3)))
    with pytest.raises(InvalidDDIMatrix):
        DDIMatrix.from_pairs(3, [(1, 1)])
    with pytest.raises(InvalidDDIMatrix):
        DDIMatrix.from_pairs(3, [(0, 3)])


def test_ddi_matrix_pairs(tmp_path):
    ddi = DDIMatrix.from_pairs(4, [(2, 0), (1, 3)])
    assert ddi.pairs() == [(0, 2), (1, 3)]
    assert ddi.interacts(0, 2) and ddi.interacts(2, 0) and not ddi.interacts(0, 1)
    ddi.save(tmp_path / "ddi.json")
    assert np.array_equal(DDIMatrix.load(tmp_path / "ddi.json").matrix, ddi.matrix)


# patient encoder

def test_scores_shape_and_range():
    encoder = _encoder()
    scores = encoder([_history(), PatientHistory("p1", (Visit((2,)),))])
    assert [s.shape for s in scores] == [(3, 4), (1, 4)]
    assert all(((s > 0) & (s < 1)).all() for s in scores)


def test_medication_stream_is_shifted_by_one_visit():
    encoder = _encoder()
    _, _, e_m_prev = encoder.stream_inputs(_history().visits)
    _, _, e_m = encoder.visit_embeddings(_history().visits)
    assert torch.equal(e_m_prev[0], torch.zeros(8, dtype=torch.float64))
    assert torch.equal(e_m_prev[1:], e_m[:-1])


def test_current_medications_do_not_leak_into_prediction():
    encoder = _encoder()
    h = _history()
    changed = PatientHistory("p0", h.visits[:2] + (Visit((4, 2), (0, 1), (0,)),))
    a, b = encoder([h])[0], encoder([changed])[0]
    assert torch.equal(a, b)

    # earlier medications do feed later visits
    earlier = PatientHistory("p0", (Visit((0, 1), (2,), (1, 2)),) + h.visits[1:])
    c = encoder([earlier])[0]
    assert torch.equal(c[0], a[0])
    assert not torch.allclose(c[1], a[1])


def test_encode_history_matches_the_batched_pass():
    encoder = _encoder()
    h = _history()
    full = encoder.encode_visits([h, PatientHistory("other", (Visit((3,)),))])[0]
    for t in range(1, 4):
        assert torch.allclose(encode_history(h, t, encoder), full[t - 1], atol=1e-12)
    with pytest.raises(IndexOutOfRange):
        encode_history(h, 0, encoder)
    with pytest.raises(IndexOutOfRange):
        encode_history(h, 4, encoder)


def test_embed_visit_averages_medications():
    encoder = _encoder()
    _, _, e_m = embed_visit(Visit((0,), (), (0, 3)), encoder)
    table = encoder.medication_table
    assert torch.allclose(e_m, (table[0] + table[3]) / 2)
    _, _, empty = embed_visit(Visit((0,)), encoder)
    assert torch.equal(empty, torch.zeros(8, dtype=torch.float64))


def test_medication_table_shape_is_checked():
    encoder = _encoder(table=False)
    with pytest.raises(VocabMismatch):
        encoder([_history()])
    with pytest.raises(VocabMismatch):
        encoder([_history()], torch.zeros(3, 8, dtype=torch.float64))
    assert encoder([_history()], torch.zeros(4, 8, dtype=torch.float64))[0].shape == (3, 4)


def test_scoring_path_gradcheck():
    encoder = _encoder(table=False)
    names = [name for name, _ in encoder.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_(True) for _, p in encoder.named_parameters())
    med_table = (torch.rand(4, 8, dtype=torch.float64) - 0.5).requires_grad_(True)
    histories = [_history(), PatientHistory("p1", (Visit((2,)),))]

    def scores(table, *weights):
        return torch.cat(functional_call(encoder, dict(zip(names, weights)), (histories, table)))

    assert gradcheck(scores, (med_table,) + params, eps=1e-5, rtol=1e-4, atol=1e-6)


_TRUTH = torch.tensor([[1, 0, 1, 0], [0, 1, 1, 1], [1, 0, 0, 0]], dtype=torch.float64)
_DDI = torch.tensor(DDIMatrix.from_pairs(4, [(0, 1), (1, 3)]).matrix)
LOSSES = {
    "bce": lambda s: bce_loss(s, _TRUTH),
    # sigmoid scores differ by less than 1, so every hinge term stays on its linear piece
    "hinge": lambda s: hinge_loss(s, _TRUTH),
    "ddi": lambda s: ddi_loss(s, _DDI),
    "combined": lambda s: combined_loss(s, _TRUTH, _DDI, LossWeights(beta=0.9, gamma=0.7)),
}


@pytest.mark.parametrize("loss", sorted(LOSSES))
@pytest.mark.parametrize("seed", range(3))
def test_losses_through_predict_scores_gradcheck(loss, seed):
    encoder = _encoder(seed)
    e_i = torch.randn(3, 3 * encoder.hidden, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda e: LOSSES[loss](predict_scores(e, encoder)), (e_i,), eps=1e-5, rtol=1e-4, atol=1e-6)


def test_threshold_select():
    assert threshold_select(np.array([0.2, 0.5, 0.7])).tolist() == [0, 1, 1]
    assert threshold_select(torch.tensor([0.2, 0.5, 0.7]), delta=0.6).tolist() == [0, 0, 1]


# clinical model and training

def _clinical_model() -> ClinicalModel:
    torch.manual_seed(0)
    graphs = [parse_smiles(s) for s in ("CCO", "c1ccccc1", "CC(=O)N", "CCN")]
    encoder = PatientEncoder(VOCAB, dim=8, hidden=6, mlp_hidden=10)
    return ClinicalModel(encoder, CrossModalEncoder(dim=8, layers=1), graphs)


def test_clinical_model_derives_the_medication_table():
    model = _clinical_model()
    assert model.medication_table().shape == (4, 8)
    predictions = model.predict([_history()])
    assert predictions[0].shape == (3, 4) and predictions[0].dtype == np.float64
    with pytest.raises(ValueError):
        ClinicalModel(PatientEncoder(VOCAB, dim=8))


def _cohort(n: int = 12):
    rng = np.random.default_rng(0)
    patients = []
    for i in range(n):
        visits = []
        for _ in range(1 + i % 3):
            d = tuple(rng.choice(5, size=2, replace=False).tolist())
            visits.append(Visit(d, (int(rng.integers(3)),), (d[0] % 4, d[1] % 4)))
        patients.append(PatientHistory(f"p{i}", tuple(visits)))
    return patients


def test_training_selects_best_validation_epoch():
    model = _clinical_model()
    cohort = _cohort()
    ddi = DDIMatrix.from_pairs(4, [(0, 1)])
    result = train_clinical(model, cohort[:8], cohort[8:], ddi,
                            TrainConfig(epochs=3, lr=1e-2, batch_patients=4, seed=1))
    assert [row["epoch"] for row in result.log] == [1, 2, 3]
    jaccards = [row["val_jaccard"] for row in result.log]
    assert result.best_val_jaccard == pytest.approx(max(jaccards))
    assert result.log[result.best_epoch - 1]["val_jaccard"] == pytest.approx(max(jaccards))
    assert all(np.isfinite(row["loss"]) for row in result.log)
    assert set(result.parameter_counts) == {"patient_encoder", "cross_modal"}
    assert result.selection_rule == "best validation jaccard"


def test_training_is_deterministic():
    cohort = _cohort()
    ddi = DDIMatrix.from_pairs(4, [(0, 1)])
    config = TrainConfig(epochs=2, lr=1e-2, batch_patients=4, seed=2)
    logs = []
    for _ in range(2):
        result = train_clinical(_clinical_model(), cohort[:8], cohort[8:], ddi, config)
        logs.append([(row["loss"], row["val_jaccard"]) for row in result.log])
    assert logs[0] == logs[1]


def test_frozen_cross_modal_encoder_is_not_updated():
    model = _clinical_model()
    before = {k: v.clone() for k, v in model.cross_modal.state_dict().items()}
    cohort = _cohort()
    result = train_clinical(model, cohort[:8], cohort[8:], DDIMatrix(np.zeros((4, 4))),
                            TrainConfig(epochs=1, lr=1e-2, batch_patients=4, finetune_cross_modal=False))
    for key, value in model.cross_modal.state_dict().items():
        assert torch.equal(value, before[key])
    assert "cross_modal" not in result.parameter_counts
