"""
Contrastive loss, batch schedules, coverage and pre-training
"""

import math

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck

from src.align import (
    MultimodalRecord, PretrainConfig, TemperatureParam, chance_level, contrastive_loss, coverage_stats,
    dispersion, intersection_schedule, retrieval_eval, rotating_schedule, run_pretraining,
)
from src.align.records import MODALITY_FIELDS
from src.molkit import MoleculeImage, PropertyVector, TextDescription, parse_smiles
from src.molkit.conformer import Conformer
from src.utils.config_loader import MODALITIES
from src.utils.errors import EmptyIntersection, ModalityUnderfilled, NonFiniteLoss, ZeroNormRow

_METHANE = parse_smiles("C")


def _record(i: int, modalities) -> MultimodalRecord:
    observed = {
        "image": MoleculeImage(np.zeros((16, 16, 3)), 0),
        "text": TextDescription((11,), ((0, 1),)),
        "conformer": Conformer(np.zeros((1, 3)), _METHANE, 0),
        "props": PropertyVector(16.0, 0, 0, 0.0, 0),
        "kg_id": f"m{i:03d}",
    }
    fields = {MODALITY_FIELDS[m]: observed[MODALITY_FIELDS[m]] for m in modalities}
    return MultimodalRecord(mol_id=f"m{i:03d}", smiles="C", graph=_METHANE, **fields)


def _corpus():
    """20 records with all modalities, 10 with props only, 6 with kg only"""
    return ([_record(i, MODALITIES) for i in range(20)]
            + [_record(100 + i, ("props",)) for i in range(10)]
            + [_record(200 + i, ("kg",)) for i in range(6)])


# contrastive loss

def test_loss_near_zero_for_aligned_pairs_at_high_temperature():
    e = torch.eye(4, dtype=torch.float64)
    assert contrastive_loss(e, e, 100.0).item() < 1e-10


def test_loss_is_log_batch_at_zero_temperature():
    e_c = torch.randn(5, 3, dtype=torch.float64)
    e_o = torch.randn(5, 3, dtype=torch.float64)
    assert contrastive_loss(e_c, e_o, 0.0).item() == pytest.approx(math.log(5))


def test_loss_worked_value_for_orthonormal_pairs():
    e = torch.zeros(4, 64, dtype=torch.float64)
    e[:, :4] = torch.eye(4, dtype=torch.float64)
    expected = -math.log(math.e / (math.e + 3))
    assert expected == pytest.approx(0.7438, abs=2e-4)
    assert contrastive_loss(e, e, 1.0).item() == pytest.approx(expected, abs=1e-12)
    assert contrastive_loss(e, 3.0 * e, 1.0).item() == pytest.approx(expected, abs=1e-12)


def test_loss_is_symmetric_and_matches_cross_entropy():
    torch.manual_seed(0)
    e_c, e_o = torch.randn(6, 4, dtype=torch.float64), torch.randn(6, 4, dtype=torch.float64)
    loss = contrastive_loss(e_c, e_o, 3.0)
    assert loss.item() == pytest.approx(contrastive_loss(e_o, e_c, 3.0).item())

    s = torch.nn.functional.normalize(e_c, dim=-1) @ torch.nn.functional.normalize(e_o, dim=-1).T
    labels = torch.arange(6)
    expected = 0.5 * (torch.nn.functional.cross_entropy(3.0 * s, labels)
                      + torch.nn.functional.cross_entropy(3.0 * s.T, labels))
    assert loss.item() == pytest.approx(expected.item())


def test_loss_gradcheck():
    torch.manual_seed(1)
    e_c = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    e_o = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    tau = torch.tensor(2.0, dtype=torch.float64, requires_grad=True)
    assert gradcheck(contrastive_loss, (e_c, e_o, tau), eps=1e-5, rtol=1e-4, atol=1e-6)


def test_loss_errors():
    with pytest.raises(ZeroNormRow):
        contrastive_loss(torch.zeros(2, 3), torch.ones(2, 3))
    with pytest.raises(ValueError):
        contrastive_loss(torch.ones(2, 3), torch.ones(3, 3))


def test_temperature_is_clamped():
    assert TemperatureParam(10.0).tau.item() == pytest.approx(100.0)
    assert TemperatureParam(0.0).tau.item() == pytest.approx(1.0)


def test_dispersion():
    assert dispersion(np.eye(2)) == pytest.approx(1.0)
    assert dispersion(np.ones((3, 4))) == pytest.approx(0.0)
    assert dispersion(torch.tensor([[1.0, 0.0], [-1.0, 0.0]])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        dispersion(np.ones((1, 4)))
    with pytest.raises(ZeroNormRow):
        dispersion(np.array([[1.0, 0.0], [0.0, 0.0]]))


# schedules

def test_rotating_schedule_draws_each_modality_from_its_own_pool():
    records = _corpus()
    steps = rotating_schedule(records, ("props", "kg"), batch_size=4, seed=0)
    for modality, batch in steps:
        assert all(r.has(modality) for r in batch)
        assert len(batch) >= 2
    props_ids = [r.mol_id for m, b in steps if m == "props" for r in b]
    kg_ids = [r.mol_id for m, b in steps if m == "kg" for r in b]
    assert len(props_ids) == len(set(props_ids)) == 30
    # 26 kg records in batches of 4: the trailing pair is kept
    assert len(kg_ids) == len(set(kg_ids)) == 26
    # round robin while both modalities have batches left
    assert [m for m, _ in steps[:4]] == ["props", "kg", "props", "kg"]


def test_rotating_schedule_follows_the_fixed_modality_order():
    steps = rotating_schedule(_corpus(), ("kg", "image"), batch_size=5, seed=1)
    assert steps[0][0] == "image" and steps[1][0] == "kg"


def test_rotating_schedule_drops_single_row_batches():
    records = [_record(i, ("props",)) for i in range(5)]
    steps = rotating_schedule(records, ("props",), batch_size=2, seed=0)
    assert [len(b) for _, b in steps] == [2, 2]


def test_schedules_are_seeded_per_epoch():
    records = _corpus()
    ids = lambda steps: [[r.mol_id for r in b] for _, b in steps]  # noqa: E731
    first = ids(rotating_schedule(records, ("props",), 4, seed=3, epoch=0))
    assert first == ids(rotating_schedule(records, ("props",), 4, seed=3, epoch=0))
    assert first != ids(rotating_schedule(records, ("props",), 4, seed=3, epoch=1))


def test_rotating_schedule_underfilled_modality():
    with pytest.raises(ModalityUnderfilled):
        rotating_schedule(_corpus(), ("image",), batch_size=21, seed=0)


def test_intersection_schedule_uses_full_records_only():
    steps = intersection_schedule(_corpus(), ("props", "kg"), batch_size=4, seed=0)
    for _, batch in steps:
        assert all(r.has("props") and r.has("kg") for r in batch)
    assert sum(len(b) for m, b in steps if m == "props") == 20


def test_intersection_schedule_shrinks_batch_to_pool():
    records = [_record(i, MODALITIES) for i in range(3)] + [_record(10 + i, ("props",)) for i in range(10)]
    steps = intersection_schedule(records, ("props", "kg"), batch_size=8, seed=0)
    assert [len(b) for _, b in steps] == [3, 3]


def test_intersection_schedule_empty():
    records = [_record(i, ("props",)) for i in range(5)] + [_record(10, ("props", "kg"))]
    with pytest.raises(EmptyIntersection):
        intersection_schedule(records, ("props", "kg"), batch_size=2, seed=0)


def test_record_needs_a_modality():
    with pytest.raises(ValueError, match="no modality"):
        MultimodalRecord(mol_id="m000", smiles="C", graph=_METHANE)
    assert _record(0, ("text",)).modalities == ("text",)


def test_coverage_stats():
    report = coverage_stats(_corpus(), MODALITIES)
    assert report.total == 36
    assert report.counts["props"] == 30 and report.counts["kg"] == 26 and report.counts["image"] == 20
    assert report.pairwise[("props", "kg")] == 20
    assert report.full_intersection == 20
    assert report.full_ratio == pytest.approx(20 / 36)
    assert report.to_dict()["pairwise"]["props+kg"] == 20


def test_chance_level():
    assert chance_level(10, 1) == pytest.approx(0.1)
    assert chance_level(3, 5) == 1.0


# pre-training on the generated corpus

def _suite(config, dataset, seed=0):
    from src.core.pipeline import MKMedPipeline
    return MKMedPipeline(config, dataset, seed).build_suite()


def _pretrain_config(**overrides):
    values = dict(epochs=1, lr=1e-3, batch_size=4, modalities=("props", "kg"), seed=0)
    values.update(overrides)
    return PretrainConfig(**values)


def test_pretrain_config_validation():
    with pytest.raises(ValueError):
        _pretrain_config(batch_size=1)
    with pytest.raises(ValueError):
        _pretrain_config(mode="both")
    with pytest.raises(ValueError):
        _pretrain_config(modalities=("smell",))
    with pytest.raises(ValueError):
        _pretrain_config(modality_encoders="sometimes")


def test_pretraining_is_deterministic(tiny_config, tiny_dataset):
    curves = []
    for _ in range(2):
        result = run_pretraining(tiny_dataset.records, _suite(tiny_config, tiny_dataset), _pretrain_config())
        curves.append(result.loss_curve)
        assert result.steps > 0
        assert len(result.epoch_seconds) == 1
    assert curves[0] == curves[1]
    assert np.isfinite(curves[0]).all()


def test_frozen_modality_encoders_are_untouched(tiny_config, tiny_dataset):
    suite = _suite(tiny_config, tiny_dataset)
    props_before = {k: v.clone() for k, v in suite.modality["props"].state_dict().items()}
    cross_before = {k: v.clone() for k, v in suite.cross_modal.state_dict().items()}
    run_pretraining(tiny_dataset.records, suite, _pretrain_config(modality_encoders="frozen"))
    for key, value in suite.modality["props"].state_dict().items():
        assert torch.equal(value, props_before[key])
    assert any(not torch.equal(v, cross_before[k]) for k, v in suite.cross_modal.state_dict().items())


def test_active_modality_encoders_train_only_when_scheduled(tiny_config, tiny_dataset):
    suite = _suite(tiny_config, tiny_dataset)
    props_before = suite.modality["props"].linear.weight.clone()
    image_before = suite.modality["image"].patch_proj.weight.clone()
    run_pretraining(tiny_dataset.records, suite, _pretrain_config(modalities=("props",)))
    assert not torch.equal(suite.modality["props"].linear.weight, props_before)
    assert torch.equal(suite.modality["image"].patch_proj.weight, image_before)


def test_non_finite_loss_is_reported(tiny_config, tiny_dataset, monkeypatch):
    import importlib
    pretrain_module = importlib.import_module("src.align.pretrain")
    monkeypatch.setattr(pretrain_module, "contrastive_loss",
                        lambda e_c, e_o, tau: (e_c.sum() + e_o.sum()) * float("nan"))
    with pytest.raises(NonFiniteLoss):
        run_pretraining(tiny_dataset.records, _suite(tiny_config, tiny_dataset), _pretrain_config())


def test_retrieval_eval_is_an_accuracy(tiny_config, tiny_dataset):
    suite = _suite(tiny_config, tiny_dataset)
    for k in (1, 3):
        accuracy = retrieval_eval(tiny_dataset.records, suite, "props", k=k)
        assert 0.0 <= accuracy <= 1.0
    pool = sum(1 for r in tiny_dataset.records if r.has("props"))
    assert retrieval_eval(tiny_dataset.records, suite, "props", k=pool) == 1.0
    everything = len(tiny_dataset.records)
    assert 0.0 <= retrieval_eval(tiny_dataset.records, suite, "props", candidates="all") <= 1.0
    assert retrieval_eval(tiny_dataset.records, suite, "props", k=everything, candidates="all") == 1.0
    with pytest.raises(ValueError):
        retrieval_eval(tiny_dataset.records, suite, "props", candidates="some")


def test_suite_encodes_every_modality(tiny_config, tiny_dataset):
    suite = _suite(tiny_config, tiny_dataset)
    dim = tiny_config.get("model.dim")
    assert suite.encode_molecules(tiny_dataset.records[:3]).shape == (3, dim)
    for modality in MODALITIES:
        with_modality = [r for r in tiny_dataset.records if r.has(modality)][:3]
        assert suite.encode_modality(modality, with_modality).shape == (len(with_modality), dim)
    assert set(suite.parameter_counts()) == {"cross_modal", *MODALITIES}
