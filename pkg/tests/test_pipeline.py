"""
Pipeline variants, checkpoints, experiment drivers and the command line
"""

import json
import shutil

import numpy as np
import pandas as pd
import pytest
import torch
import yaml

from src.align.records import CoverageProfile
from src.core.pipeline import VARIANTS, MKMedPipeline
from src.evaluation.experiments import (
    ExperimentReport, param_sweep_configs, run_alignment_comparison, run_experiment, run_modality_sweep,
)
from src.evaluation.metrics import METRIC_NAMES
from src.main import main
from src.utils.checkpoint import Checkpoint
from src.utils.errors import ConfigError, UnknownVariant, VocabMismatch

from conftest import generate_into, tiny_spec_for


@pytest.mark.parametrize("variant", VARIANTS)
def test_every_variant_runs(tiny_config, tiny_dataset, variant):
    run = MKMedPipeline(tiny_config, tiny_dataset, seed=0).run_variant(variant, keep_models=True)
    assert set(run.report.mean) == set(METRIC_NAMES)
    assert len(run.report.samples) == tiny_config.get("eval.bootstrap")
    assert 0.0 <= run.report["jaccard"] <= 1.0
    assert run.report.header["variant"] == variant
    assert run.report.header["model_selection"] == "best validation jaccard"
    assert run.report.header["ddi_mode"] == "standard"
    assert (run.pretrain is not None) == (variant in ("full", "pm"))
    assert (run.suite is None) == (variant == "mol")


def test_variant_runs_are_reproducible(tiny_config, tiny_dataset):
    a = MKMedPipeline(tiny_config, tiny_dataset, seed=1).run_variant("pt")
    b = MKMedPipeline(tiny_config, tiny_dataset, seed=1).run_variant("pt")
    pd.testing.assert_frame_equal(a.report.samples, b.report.samples)


def test_unknown_variant(tiny_config, tiny_dataset):
    pipeline = MKMedPipeline(tiny_config, tiny_dataset)
    with pytest.raises(UnknownVariant):
        pipeline.run_variant("everything")
    with pytest.raises(UnknownVariant):
        pipeline.build_model("everything")


def test_pretrain_checkpoint_restores_the_suite(tiny_config, tiny_dataset):
    pipeline = MKMedPipeline(tiny_config, tiny_dataset, seed=0)
    suite = pipeline.build_suite()
    result = pipeline.pretrain(suite, ("props", "kg"))
    checkpoint = Checkpoint.from_bytes(pipeline.pretrain_checkpoint(suite, result.temperature).to_bytes())
    assert checkpoint.header["kind"] == "pretrain"
    restored = pipeline.suite_from_checkpoint(checkpoint)
    records = tiny_dataset.records[:5]
    with torch.no_grad():
        assert torch.equal(restored.encode_molecules(records), suite.encode_molecules(records))
        with_props = [r for r in tiny_dataset.records if r.has("props")][:5]
        assert torch.equal(restored.encode_modality("props", with_props), suite.encode_modality("props", with_props))


def test_clinical_checkpoint_restores_predictions(tiny_config, tiny_dataset):
    pipeline = MKMedPipeline(tiny_config, tiny_dataset, seed=0)
    run = pipeline.run_variant("pt", keep_models=True)
    checkpoint = Checkpoint.from_bytes(pipeline.clinical_checkpoint(run.model, "pt", run.train).to_bytes())
    restored = pipeline.model_from_checkpoint(checkpoint)
    patients = tiny_dataset.patients[:4]
    for a, b in zip(restored.predict(patients), run.model.predict(patients)):
        assert np.allclose(a, b, atol=1e-6)

    checkpoint.header["vocab"] = dict(checkpoint.header["vocab"], n_medications=99)
    with pytest.raises(VocabMismatch):
        pipeline.model_from_checkpoint(checkpoint)


# experiments

def test_unknown_experiment(tiny_config, tiny_dataset):
    with pytest.raises(ConfigError):
        run_experiment("everything", tiny_config, tiny_dataset)


def test_param_sweep_varies_one_key_at_a_time(tiny_config):
    tiny_config.set("experiment.dims", [8, 16])
    configs = param_sweep_configs(tiny_config)
    assert list(configs) == ["dim=8", "dim=16", "gin_layers=1"]
    assert configs["dim=8"].get("model.dim") == 8
    assert configs["dim=8"].get("model.gin_layers") == tiny_config.get("model.gin_layers")
    assert tiny_config.get("model.dim") == 16


def test_underfilled_sweep_point_is_null(tiny_config, tiny_dataset):
    tiny_config.set("pretrain.batch_size", len(tiny_dataset.records))
    points = run_modality_sweep(tiny_config, tiny_dataset, seed=0, ks=(0, 1))
    assert points[0].report is not None and points[0].dispersion is not None
    assert points[1].report is None and points[1].dispersion is None


def test_alignment_comparison_records_empty_intersection(tiny_config, workdir):
    coverage = CoverageProfile({"structure": 0.8, "text": 0.0, "image": 0.8, "props": 0.8, "kg": 0.8})
    from src.utils.data_io import load_dataset
    dataset = load_dataset(generate_into(tiny_spec_for(2, coverage=coverage), workdir / "no_text"))
    points = run_alignment_comparison(tiny_config, dataset, seed=0, ks=(2,))
    by_mode = {p.mode: p for p in points}
    assert by_mode["intersection"].pool_size == 0 and by_mode["intersection"].report is None
    assert by_mode["rotating"].report is None
    assert by_mode["rotating"].pool_size == 0


def test_experiment_report_frame():
    report = ExperimentReport("demo", "abc")
    report.add("k=1 rotating", "jaccard", 0, 0.5)
    report.add("k=1 rotating", "prauc", 0, None)
    frame = report.frame()
    assert list(frame.columns) == ["experiment", "configuration", "metric", "seed", "value", "config_hash"]
    assert frame["value"].isna().tolist() == [False, True]


@pytest.mark.slow
def test_ablation_table(tiny_config, tiny_dataset, tmp_path):
    report = run_experiment("ablation", tiny_config, tiny_dataset, seeds=[0])
    frame = report.frame()
    assert len(frame) == len(VARIANTS) * len(METRIC_NAMES)
    assert set(frame["configuration"]) == set(VARIANTS)
    report.to_csv(tmp_path / "ablation.csv")
    assert len(pd.read_csv(tmp_path / "ablation.csv")) == len(frame)


# command line

def _spec_file(tmp_path, **overrides) -> str:
    spec = tiny_spec_for(**overrides)
    path = tmp_path / "spec.yaml"
    path.write_text(yaml.safe_dump(spec.to_dict()))
    return str(path)


def test_cli_generate(tmp_path, tiny_config_path, capsys):
    out = tmp_path / "data"
    code = main(["generate", "--config", str(tiny_config_path), "--spec", _spec_file(tmp_path, n_patients=5),
                 "--out", str(out)])
    assert code == 0
    assert (out / "ehr.jsonl").read_text().count("\n") == 5
    assert "Coverage of 40 molecules" in capsys.readouterr().out


def test_cli_configuration_errors(tmp_path, tiny_config_path, tiny_data_dir):
    config = str(tiny_config_path)
    assert main(["experiment", "everything", "--config", config]) == 2
    assert main(["evaluate", "--config", config, "--data", str(tiny_data_dir),
                 "--checkpoint", str(tmp_path / "missing.ckpt"), "--out", str(tmp_path)]) == 2
    garbage = tmp_path / "garbage.ckpt"
    garbage.write_bytes(b"definitely not a checkpoint")
    assert main(["evaluate", "--config", config, "--data", str(tiny_data_dir),
                 "--checkpoint", str(garbage), "--out", str(tmp_path)]) == 2
    assert main(["evaluate", "--config", config, "--data", str(tiny_data_dir), "--checkpoint", str(garbage),
                 "--bootstrap", "0"]) == 2
    assert main(["pretrain", "--config", config, "--data", str(tmp_path / "nowhere")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("model:\n  dim: 16\n")
    assert main(["pretrain", "--config", str(bad), "--data", str(tiny_data_dir)]) == 2

    broken = tmp_path / "broken"
    shutil.copytree(tiny_data_dir, broken)
    (broken / "ddi.json").write_text('{"size": 12,')
    assert main(["train", "--config", config, "--data", str(broken), "--variant", "mol", "--out", str(tmp_path)]) == 2


def test_cli_empty_intersection(tmp_path, tiny_config_path):
    coverage = CoverageProfile({"image": 0.0, "text": 0.8, "structure": 0.8, "props": 0.8, "kg": 0.8})
    data = generate_into(tiny_spec_for(3, coverage=coverage), tmp_path / "data")
    assert main(["pretrain", "--config", str(tiny_config_path), "--data", str(data),
                 "--mode", "intersection", "--out", str(tmp_path / "out")]) == 4


def test_cli_non_finite_loss(tmp_path, tiny_config_path, tiny_data_dir, monkeypatch):
    import importlib
    pretrain_module = importlib.import_module("src.align.pretrain")
    monkeypatch.setattr(pretrain_module, "contrastive_loss",
                        lambda e_c, e_o, tau: (e_c.sum() + e_o.sum()) * float("nan"))
    assert main(["pretrain", "--config", str(tiny_config_path), "--data", str(tiny_data_dir),
                 "--out", str(tmp_path)]) == 3


def test_cli_vocabulary_mismatch(tmp_path, tiny_config_path, tiny_data_dir):
    config = str(tiny_config_path)
    out = tmp_path / "out"
    assert main(["train", "--config", config, "--data", str(tiny_data_dir), "--variant", "mol",
                 "--out", str(out)]) == 0
    other = generate_into(tiny_spec_for(4, n_medications=10), tmp_path / "other")
    assert main(["evaluate", "--config", config, "--data", str(other),
                 "--checkpoint", str(out / "clinical.ckpt"), "--out", str(out)]) == 5


@pytest.mark.slow
def test_cli_full_flow(tmp_path, tiny_config_path, tiny_data_dir):
    config, data, out = str(tiny_config_path), str(tiny_data_dir), tmp_path / "results"
    assert main(["pretrain", "--config", config, "--data", data, "--out", str(out)]) == 0
    loss = pd.read_csv(out / "pretrain_loss.csv")
    assert list(loss.columns) == ["epoch", "loss"] and len(loss) == 1

    assert main(["train", "--config", config, "--data", data, "--checkpoint", str(out / "pretrain.ckpt"),
                 "--out", str(out)]) == 0
    log = pd.read_csv(out / "train_log.csv")
    assert "seconds" not in log.columns and len(log) == 2
    assert list(pd.read_csv(out / "train_timing.csv").columns) == ["epoch", "seconds"]

    assert main(["evaluate", "--config", config, "--data", data, "--checkpoint", str(out / "clinical.ckpt"),
                 "--bootstrap", "4", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["report_version"] == 1 and report["variant"] == "full"
    assert report["bootstrap_samples"] == 4
    first = (out / "report.json").read_bytes()
    assert main(["evaluate", "--config", config, "--data", data, "--checkpoint", str(out / "clinical.ckpt"),
                 "--bootstrap", "4", "--out", str(out)]) == 0
    assert (out / "report.json").read_bytes() == first

    assert main(["experiment", "param-sweep", "--config", config, "--data", data, "--out", str(out)]) == 0
    table = pd.read_csv(out / "experiment_param-sweep.csv")
    assert set(table["configuration"]) == {"dim=16", "gin_layers=1"}
