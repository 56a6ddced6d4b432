"""
MKMed pipeline: encoders, pre-training, formal training and evaluation

Every stage reseeds from the run seed, so a variant run is a pure function of
(config, seed, dataset) and the CLI commands reproduce experiment results.
"""

import dataclasses
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from loguru import logger

from ..align import PretrainConfig, PretrainResult, TemperatureParam, dispersion, run_pretraining
from ..clinical import ClinicalModel, PatientEncoder, PatientHistory, TrainConfig, TrainResult, train_clinical
from ..encoders import CrossModalEncoder, EncoderSuite, KGEmbedding, transe_train
from ..evaluation.bootstrap import MetricsReport, bootstrap_evaluate
from ..molkit import PROPERTY_NAMES
from ..utils.checkpoint import Checkpoint
from ..utils.config_loader import Config, thread_cap
from ..utils.data_io import Dataset, split_patients
from ..utils.errors import CorruptCheckpoint, UnknownVariant, VocabMismatch

VARIANTS = ("full", "mol", "pt", "pm")
PRETRAIN_VARIANTS = ("full", "pm")
PM_MODALITIES = ("structure",)
VERSION = "0.1.0"


@dataclass
class VariantRun:
    variant: str
    report: MetricsReport
    train: TrainResult
    pretrain: Optional[PretrainResult] = None
    suite: Optional[EncoderSuite] = None
    model: Optional[ClinicalModel] = None


class MKMedPipeline:
    """
    Orchestrates one seeded run over a loaded dataset

    Args:
        config: Validated configuration
        dataset: Generated dataset
        seed: Run seed (default: config seed)
    """

    def __init__(self, config: Config, dataset: Dataset, seed: Optional[int] = None):
        self.config = config
        self.dataset = dataset
        self.seed = config.get("seed") if seed is None else seed
        self.config_hash = config.config_hash()

    # encoders -------------------------------------------------------------

    def property_stats(self) -> Tuple[np.ndarray, np.ndarray]:
        vectors = [r.props.to_array() for r in self.dataset.records if r.props is not None]
        if not vectors:
            return np.zeros(len(PROPERTY_NAMES)), np.ones(len(PROPERTY_NAMES))
        values = np.stack(vectors)
        mean, std = values.mean(axis=0), values.std(axis=0)
        for name, s in zip(PROPERTY_NAMES, std):
            if s == 0:
                logger.warning(f"property channel {name!r} has zero variance on the corpus; dropped")
        return mean, std

    def train_kg(self) -> Optional[KGEmbedding]:
        if not self.dataset.triples:
            logger.warning("dataset has no KG triples; the KG modality is unavailable")
            return None
        return transe_train(self.dataset.triples, dim=self.config.get("model.dim"),
                            epochs=self.config.get("pretrain.transe_epochs"), seed=self.seed,
                            lr=self.config.get("pretrain.transe_lr"))

    def build_suite(self, kg: Optional[KGEmbedding] = None) -> EncoderSuite:
        """Freshly initialised encoders (TransE is trained here unless given)"""
        kg = self.train_kg() if kg is None else kg
        mean, std = self.property_stats()
        suite = EncoderSuite.from_config(self.config, mean, std, kg, seed=self.seed)
        logger.info(f"Encoder parameters: {suite.parameter_counts()}")
        return suite

    # stages ---------------------------------------------------------------

    def pretrain_config(self, modalities: Optional[Sequence[str]] = None,
                        mode: Optional[str] = None) -> PretrainConfig:
        base = PretrainConfig.from_config(self.config)
        return dataclasses.replace(
            base, seed=self.seed,
            modalities=tuple(modalities) if modalities is not None else base.modalities,
            mode=mode or base.mode,
        )

    def pretrain(self, suite: EncoderSuite, modalities: Optional[Sequence[str]] = None,
                 mode: Optional[str] = None) -> PretrainResult:
        """
        Raises:
            ModalityUnderfilled, EmptyIntersection, NonFiniteLoss
        """
        cfg = self.pretrain_config(modalities, mode)
        logger.info(f"Pre-training ({cfg.mode}) over {list(cfg.modalities)} for {cfg.epochs} epochs")
        return run_pretraining(self.dataset.records, suite, cfg)

    def build_model(self, variant: str, cross_modal: Optional[CrossModalEncoder] = None) -> ClinicalModel:
        if variant not in VARIANTS:
            raise UnknownVariant(f"unknown variant {variant!r}; expected one of {list(VARIANTS)}")
        torch.manual_seed(self.seed)
        encoder = PatientEncoder(
            self.dataset.vocab, dim=self.config.get("model.dim"), hidden=self.config.get("model.gru_hidden"),
            mlp_hidden=self.config.get("model.mlp_hidden"), medication_table=variant == "mol",
        )
        if variant == "mol":
            return ClinicalModel(encoder)
        if cross_modal is None:
            raise ValueError(f"variant {variant!r} needs a cross-modal encoder")
        graphs = [r.graph for r in self.dataset.medication_records()]
        return ClinicalModel(encoder, cross_modal, graphs)

    def split(self) -> Tuple[List[PatientHistory], List[PatientHistory], List[PatientHistory]]:
        return split_patients(self.dataset.patients, self.seed)

    def train(self, model: ClinicalModel, train: Sequence[PatientHistory],
              val: Sequence[PatientHistory]) -> TrainResult:
        cfg = dataclasses.replace(TrainConfig.from_config(self.config), seed=self.seed)
        return train_clinical(model, train, val, self.dataset.ddi, cfg)

    def evaluate(self, model: ClinicalModel, patients: Sequence[PatientHistory],
                 n_samples: Optional[int] = None, header: Optional[Dict[str, Any]] = None) -> MetricsReport:
        return bootstrap_evaluate(
            model.predict, patients, self.dataset.ddi,
            n_samples=n_samples or self.config.get("eval.bootstrap"), seed=self.seed,
            delta=self.config.get("loss.delta"), ddi_mode=self.config.get("eval.ddi_mode"),
            threads=thread_cap(), header=header,
        )

    def report_header(self, variant: str, result: TrainResult) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "variant": variant,
            "model_selection": result.selection_rule,
            "ddi_mode": self.config.get("eval.ddi_mode"),
            "best_epoch": result.best_epoch,
            "epochs_run": len(result.log),
            "parameter_counts": dict(result.parameter_counts),
        }

    def corpus_dispersion(self, suite: EncoderSuite) -> float:
        """Mean pairwise cosine distance of e_C over the whole corpus"""
        with torch.no_grad():
            return dispersion(suite.encode_molecules(self.dataset.records))

    def run_variant(self, variant: str, modalities: Optional[Sequence[str]] = None,
                    mode: Optional[str] = None, keep_models: bool = False) -> VariantRun:
        """
        One ablation variant end to end

        full pre-trains over the configured modalities, pm over structure only,
        pt skips pre-training, mol replaces the cross-modal encoder with a
        learnable medication table.

        Raises:
            UnknownVariant: variant outside full/mol/pt/pm
        """
        if variant not in VARIANTS:
            raise UnknownVariant(f"unknown variant {variant!r}; expected one of {list(VARIANTS)}")
        logger.info(f"Running variant {variant!r} (seed {self.seed})")
        suite, pretrained = None, None
        if variant != "mol":
            suite = self.build_suite()
            if variant in PRETRAIN_VARIANTS:
                pretrained = self.pretrain(suite, PM_MODALITIES if variant == "pm" else modalities, mode)
        model, result, report = self.finish(variant, suite)
        return VariantRun(variant, report, result, pretrained,
                          suite if keep_models else None, model if keep_models else None)

    def finish(self, variant: str, suite: Optional[EncoderSuite]) -> Tuple[ClinicalModel, TrainResult, MetricsReport]:
        """Build the clinical model on top of suite, train it and evaluate on the test split"""
        model = self.build_model(variant, suite.cross_modal if suite is not None else None)
        train, val, test = self.split()
        result = self.train(model, train, val)
        report = self.evaluate(model, test, header=self.report_header(variant, result))
        return model, result, report

    # persistence ----------------------------------------------------------

    def _header(self, kind: str, **extra) -> Dict[str, Any]:
        return {
            "kind": kind,
            "config": self.config.raw,
            "config_hash": self.config_hash,
            "vocab": self.dataset.vocab.to_dict(),
            "created": {"by": "mkmed", "version": VERSION, "seed": self.seed},
            **extra,
        }

    def pretrain_checkpoint(self, suite: EncoderSuite, temperature: Optional[TemperatureParam] = None,
                            mode: Optional[str] = None) -> Checkpoint:
        mean, std = self.property_stats()
        kg = suite.kg_table
        header = self._header(
            "pretrain",
            mode=mode or self.config.get("pretrain.mode"),
            prop_mean=mean.tolist(), prop_std=std.tolist(),
            kg=None if kg is None else {"entities": kg.entities, "relations": kg.relations, "dim": kg.dim},
        )
        modules = {"suite": suite}
        if temperature is not None:
            modules["temperature"] = temperature
        return Checkpoint.from_modules(modules, header)

    def suite_from_checkpoint(self, checkpoint: Checkpoint) -> EncoderSuite:
        header = checkpoint.header
        if header.get("kind") != "pretrain":
            raise CorruptCheckpoint(f"expected a pretrain checkpoint, got {header.get('kind')!r}")
        kg_info = header.get("kg")
        kg = None if kg_info is None else KGEmbedding(kg_info["entities"], kg_info["relations"], kg_info["dim"])
        suite = EncoderSuite.from_config(self.config, header["prop_mean"], header["prop_std"], kg)
        checkpoint.load_into(suite, "suite")
        return suite

    def clinical_checkpoint(self, model: ClinicalModel, variant: str, result: TrainResult) -> Checkpoint:
        modules = {"patient_encoder": model.patient_encoder}
        if model.cross_modal is not None:
            modules["cross_modal"] = model.cross_modal
        header = self._header("clinical", **self.report_header(variant, result))
        return Checkpoint.from_modules(modules, header)

    def check_vocab(self, checkpoint: Checkpoint):
        stored = checkpoint.header.get("vocab")
        if stored != self.dataset.vocab.to_dict():
            raise VocabMismatch(f"checkpoint vocabulary {stored} differs from dataset {self.dataset.vocab.to_dict()}")

    def model_from_checkpoint(self, checkpoint: Checkpoint) -> ClinicalModel:
        """
        Raises:
            VocabMismatch: the checkpoint was trained on another vocabulary
            CorruptCheckpoint: not a clinical checkpoint, or blocks do not fit
        """
        header = checkpoint.header
        if header.get("kind") != "clinical":
            raise CorruptCheckpoint(f"expected a clinical checkpoint, got {header.get('kind')!r}")
        self.check_vocab(checkpoint)
        variant = header.get("variant", "full")
        model_cfg = header["config"]["model"]
        cross_modal = None
        if variant != "mol":
            cross_modal = CrossModalEncoder(dim=model_cfg["dim"], layers=model_cfg["gin_layers"])
        encoder = PatientEncoder(self.dataset.vocab, dim=model_cfg["dim"], hidden=model_cfg["gru_hidden"],
                                 mlp_hidden=model_cfg["mlp_hidden"], medication_table=variant == "mol")
        checkpoint.load_into(encoder, "patient_encoder")
        if cross_modal is None:
            return ClinicalModel(encoder)
        checkpoint.load_into(cross_modal, "cross_modal")
        return ClinicalModel(encoder, cross_modal, [r.graph for r in self.dataset.medication_records()])
