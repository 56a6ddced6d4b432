"""
Shared fixtures: a desk-sized config, a tiny synthetic spec and the dataset it generates
"""

import os
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.align.records import CoverageProfile  # noqa: E402
from src.synthgen import (  # noqa: E402
    SynthSpec, ehr_vocab, gen_ddi, gen_ehr, gen_modalities, gen_molecules, kg_triples,
)
from src.utils.config_loader import Config  # noqa: E402
from src.utils.data_io import load_dataset, write_dataset  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402

IMAGE_SIZE = 16

TINY_CONFIG = {
    "seed": 0,
    "model": {
        "dim": 16, "gin_layers": 1, "vit_patch": 8, "vit_layers": 1, "vit_heads": 2,
        "text_layers": 1, "text_heads": 2, "image_size": IMAGE_SIZE,
        "gvp_layers": 1, "gvp_node_scalar": 16, "gvp_node_vector": 4, "gvp_edge_scalar": 8,
        "gvp_edge_vector": 1, "gvp_rbf": 8, "gru_hidden": 16, "mlp_hidden": 16,
    },
    "pretrain": {"epochs": 1, "lr": 1.0e-3, "batch_size": 4, "transe_epochs": 5},
    "train": {"epochs": 2, "batch_patients": 8},
    "loss": {"gamma": 0.95},
    "eval": {"bootstrap": 3},
    "experiment": {"seeds": [0], "dims": [16], "depths": [1]},
    "logging": {"level": "WARNING"},
}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end runs")


@pytest.fixture(scope="session", autouse=True)
def quiet_logs():
    setup_logger(level="WARNING", to_files=False)


def tiny_spec_for(seed: int = 0, **overrides) -> SynthSpec:
    values = dict(seed=seed, n_molecules=40, n_diseases=8, n_procedures=4, n_medications=12,
                  n_patients=30, visits_mean=2.0, rule_noise=0.05, ddi_density=0.1,
                  coverage=CoverageProfile.uniform(0.7, seed))
    values.update(overrides)
    return SynthSpec(**values)


def generate_into(spec: SynthSpec, out: Path) -> Path:
    molecules = gen_molecules(spec)
    records = gen_modalities(molecules, spec.coverage, spec.seed, image_size=IMAGE_SIZE)
    ddi = gen_ddi(spec)
    patients, rules = gen_ehr(spec, molecules, ddi)
    return write_dataset(out, molecules, records, kg_triples(records, spec.seed), patients, ddi, rules,
                         ehr_vocab(spec))


@pytest.fixture(scope="session")
def tiny_spec() -> SynthSpec:
    return tiny_spec_for()


@pytest.fixture(scope="session")
def workdir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("mkmed")


@pytest.fixture(scope="session")
def tiny_config_path(workdir) -> Path:
    tree = dict(TINY_CONFIG)
    tree["data_path"] = str(workdir / "data")
    tree["results_path"] = str(workdir / "results")
    tree["logs_path"] = str(workdir / "logs")
    path = workdir / "tiny_config.yaml"
    path.write_text(yaml.safe_dump(tree))
    return path


@pytest.fixture
def tiny_config(tiny_config_path) -> Config:
    """Fresh per test, since tests may set() keys"""
    return Config(str(tiny_config_path), apply_env=False)


@pytest.fixture(scope="session")
def tiny_data_dir(workdir, tiny_spec) -> Path:
    return generate_into(tiny_spec, workdir / "data")


@pytest.fixture(scope="session")
def tiny_dataset(tiny_data_dir):
    return load_dataset(tiny_data_dir)
