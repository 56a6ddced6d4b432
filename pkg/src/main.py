"""
MKMed command-line entry point

    python -m src.main generate   --spec config/synth_spec.yaml --out data/synthetic
    python -m src.main pretrain   --config config/desk_config.yaml --data data/synthetic --mode rotating
    python -m src.main train      --config config/desk_config.yaml --checkpoint results/pretrain.ckpt
    python -m src.main evaluate   --checkpoint results/clinical.ckpt --bootstrap 10
    python -m src.main experiment ablation --config config/desk_config.yaml
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
import torch

from .align import coverage_stats
from .core.pipeline import VARIANTS, MKMedPipeline
from .evaluation.experiments import EXPERIMENTS, run_experiment
from .synthgen import SynthSpec, ehr_vocab, gen_ddi, gen_ehr, gen_modalities, gen_molecules, kg_triples
from .utils.checkpoint import Checkpoint
from .utils.config_loader import MODALITIES, Config, load_config, thread_cap
from .utils.data_io import load_dataset, load_records, write_dataset
from .utils.errors import ConfigError, MKMedError
from .utils.logger import get_logger, setup_logger

DEFAULT_SPEC = Path(__file__).parent.parent / "config" / "synth_spec.yaml"

logger = get_logger()


def _banner(title: str):
    print("\n" + "=" * 80)
    print(title)
    print("=" * 80)


def _out_dir(args, config: Config) -> Path:
    out = Path(args.out or config.get("results_path"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_dir(args, config: Config) -> Path:
    return Path(args.data or config.get("data_path"))


def cmd_generate(args, config: Config) -> int:
    """Generate the synthetic dataset and print its modality coverage"""
    spec = SynthSpec.load(args.spec or DEFAULT_SPEC)
    if args.seed is not None:
        spec.seed = args.seed
        spec.coverage.seed = args.seed
        spec.validate()
    out = Path(args.out or config.get("data_path"))

    molecules = gen_molecules(spec)
    records = gen_modalities(molecules, spec.coverage, spec.seed, image_size=config.get("model.image_size"))
    ddi = gen_ddi(spec)
    patients, rules = gen_ehr(spec, molecules, ddi)
    write_dataset(out, molecules, records, kg_triples(records, spec.seed), patients, ddi, rules, ehr_vocab(spec))

    # summary is recomputed from the written files
    coverage = coverage_stats(load_records(out), MODALITIES)
    _banner(f"Coverage of {coverage.total} molecules (seed {spec.seed})")
    for modality, count in coverage.counts.items():
        print(f"  {modality:<10} {count:>6}  ({count / coverage.total:.1%})")
    print(f"  {'all five':<10} {coverage.full_intersection:>6}  ({coverage.full_ratio:.1%})")
    print(f"\nPatients: {len(patients)}, medications: {spec.n_medications}, "
          f"DDI pairs: {len(ddi.pairs())}")
    print(f"Dataset written to {out}")
    return 0


def cmd_pretrain(args, config: Config) -> int:
    """Align the cross-modal encoder; write the checkpoint and the loss curve"""
    dataset = load_dataset(_data_dir(args, config))
    out = _out_dir(args, config)
    pipeline = MKMedPipeline(config, dataset)
    mode = args.mode or config.get("pretrain.mode")

    suite = pipeline.build_suite()
    result = pipeline.pretrain(suite, mode=mode)

    pipeline.pretrain_checkpoint(suite, result.temperature, mode).save(out / "pretrain.ckpt")
    epochs = range(1, len(result.loss_curve) + 1)
    pd.DataFrame({"epoch": epochs, "loss": result.loss_curve}, columns=["epoch", "loss"]) \
        .to_csv(out / "pretrain_loss.csv", index=False, float_format="%.10g")
    pd.DataFrame({"epoch": epochs, "seconds": result.epoch_seconds}, columns=["epoch", "seconds"]) \
        .to_csv(out / "pretrain_timing.csv", index=False)

    _banner(f"Pre-training ({mode}) finished: {len(result.loss_curve)} epochs, {result.steps} steps")
    if result.loss_curve:
        print(f"  loss {result.loss_curve[0]:.4f} -> {result.loss_curve[-1]:.4f}, "
              f"tau {float(result.temperature.tau):.3f}")
    print(f"Checkpoint written to {out / 'pretrain.ckpt'}")
    return 0


def cmd_train(args, config: Config) -> int:
    """Train the patient encoder and head; without a checkpoint this is the pt variant"""
    dataset = load_dataset(_data_dir(args, config))
    out = _out_dir(args, config)
    pipeline = MKMedPipeline(config, dataset)

    variant = args.variant or ("full" if args.checkpoint else "pt")
    if variant in ("full", "pm") and not args.checkpoint:
        raise ConfigError(f"variant {variant!r} needs a pre-trained --checkpoint")
    suite = None
    if variant != "mol":
        if args.checkpoint:
            checkpoint = Checkpoint.load(args.checkpoint)
            pipeline.check_vocab(checkpoint)
            suite = pipeline.suite_from_checkpoint(checkpoint)
        else:
            suite = pipeline.build_suite()

    model = pipeline.build_model(variant, suite.cross_modal if suite is not None else None)
    train, val, _ = pipeline.split()
    result = pipeline.train(model, train, val)

    pipeline.clinical_checkpoint(model, variant, result).save(out / "clinical.ckpt")
    log = pd.DataFrame(result.log)
    log.drop(columns=["seconds"], errors="ignore").to_csv(out / "train_log.csv", index=False, float_format="%.10g")
    log.reindex(columns=["epoch", "seconds"]).to_csv(out / "train_timing.csv", index=False)

    _banner(f"Training ({variant}) finished: best epoch {result.best_epoch}, "
            f"validation jaccard {result.best_val_jaccard:.4f}")
    print(f"  parameters: {result.parameter_counts}")
    print(f"Checkpoint written to {out / 'clinical.ckpt'}")
    return 0


def cmd_evaluate(args, config: Config) -> int:
    """Bootstrap-evaluate a clinical checkpoint on the test split"""
    if not args.checkpoint:
        raise ConfigError("evaluate needs --checkpoint")
    dataset = load_dataset(_data_dir(args, config))
    out = _out_dir(args, config)
    checkpoint = Checkpoint.load(args.checkpoint)
    seed = args.seed if args.seed is not None else checkpoint.header.get("created", {}).get("seed")
    pipeline = MKMedPipeline(config, dataset, seed)
    model = pipeline.model_from_checkpoint(checkpoint)

    _, _, test = pipeline.split()
    keys = ("config_hash", "seed", "variant", "model_selection", "best_epoch", "epochs_run", "parameter_counts")
    header = {k: checkpoint.header[k] for k in keys if k in checkpoint.header}
    report = pipeline.evaluate(model, test, n_samples=args.bootstrap, header=header)
    report.to_json(out / "report.json")
    report.to_csv(out / "report.csv")

    _banner(f"Evaluation over {len(test)} test patients, {len(report.samples)} bootstrap samples")
    print(report.summary().to_string(float_format=lambda v: f"{v:.4f}"))
    print(f"\nReport written to {out / 'report.json'} and {out / 'report.csv'}")
    return 0


def cmd_experiment(args, config: Config) -> int:
    """Run a named experiment and write its long-format CSV"""
    if args.name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {args.name!r}; expected one of {list(EXPERIMENTS)}")
    dataset = load_dataset(_data_dir(args, config))
    out = _out_dir(args, config)
    seeds = [args.seed] if args.seed is not None else None
    report = run_experiment(args.name, config, dataset, seeds)
    path = out / f"experiment_{args.name}.csv"
    report.to_csv(path)

    frame = report.frame()
    _banner(f"Experiment {args.name}: {len(frame)} rows")
    table = frame.groupby(["configuration", "metric"], sort=False)["value"].agg(["mean", "std"])
    print(table.to_string(float_format=lambda v: f"{v:.4f}"))
    print(f"\nResults written to {path}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkmed", description="MKMed - multimodal molecular knowledge for medication recommendation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument('--config', type=str, default=None, help="Path to config file")
        p.add_argument('--seed', type=int, default=None, help="Override the run seed")
        p.add_argument('--out', type=str, default=None, help="Output directory")

    p = sub.add_parser("generate", help="Generate the synthetic dataset")
    common(p)
    p.add_argument('--spec', type=str, default=None, help="Synthetic data spec (YAML)")

    for name, text in (("pretrain", "Cross-modal pre-training"), ("train", "Formal training"),
                       ("evaluate", "Bootstrap evaluation"), ("experiment", "Run an experiment")):
        p = sub.add_parser(name, help=text)
        if name == "experiment":
            p.add_argument('name', type=str, help=f"One of {', '.join(EXPERIMENTS)}")
        common(p)
        p.add_argument('--data', type=str, default=None, help="Dataset directory")
        if name == "pretrain":
            p.add_argument('--mode', type=str, choices=("rotating", "intersection"), default=None)
        if name in ("train", "evaluate"):
            p.add_argument('--checkpoint', type=str, default=None, help="Checkpoint to start from / evaluate")
        if name == "train":
            p.add_argument('--variant', type=str, choices=VARIANTS, default=None)
        if name == "evaluate":
            p.add_argument('--bootstrap', type=int, default=None, help="Bootstrap samples B")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.set("seed", args.seed)
        if getattr(args, "bootstrap", None) is not None and args.bootstrap < 1:
            raise ConfigError(f"--bootstrap must be >= 1, got {args.bootstrap}")

        setup_logger(log_dir=config.get('logs_path', './logs'), level=config.get('logging.level', 'INFO'),
                     command=args.command, seed=config.get('seed'))
        threads = thread_cap()
        if threads is not None:
            torch.set_num_threads(threads)

        return COMMANDS[args.command](args, config)
    except MKMedError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
