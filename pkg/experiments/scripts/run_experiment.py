#!/usr/bin/env python3
"""
Command-line entry point for QAG experiments.

Reads defaults from experiment_matrix.yaml, merges an optional run config,
applies CLI overrides, runs one subcommand and writes its artifacts plus a
manifest.json into the output directory.

Usage:
    # Generate the synthetic dataset
    python experiments/scripts/run_experiment.py data-gen --out results/data

    # Train MERA-up for 500 epochs (writes checkpoint.json + loss_history.csv)
    python experiments/scripts/run_experiment.py train --arch MERA-up --out results/train

    # Calibration change at epoch 280
    python experiments/scripts/run_experiment.py train \
        --noise calibration_before.json --noise-change 280:calibration_after.json

    # Repeat training 25 times, dropping the 2 best and 2 worst
    python experiments/scripts/run_experiment.py train --trials 25 --workers 8

    # Generate and evaluate 980 images from a checkpoint
    python experiments/scripts/run_experiment.py generate --checkpoint results/train/checkpoint.json
    python experiments/scripts/run_experiment.py evaluate --gen results/generate/generated.csv

    # Characteristic circuit numbers of all nine architectures
    python experiments/scripts/run_experiment.py circuit-report

    # Inference noise sweep
    python experiments/scripts/run_experiment.py noise-sweep --mode inference \
        --checkpoint results/train/checkpoint.json

    # Add a recorded device calibration as an extra sweep point
    python experiments/scripts/run_experiment.py noise-sweep --mode inference \
        --checkpoint results/train/checkpoint.json --noise-file device.json
"""

import argparse
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import yaml

from qag.circuit_metrics import full_report, ordering_checks
from qag.circuits import ARCHITECTURES, build_architecture, circuit_summary
from qag.codec import EncodingConfig, generate_images
from qag.config import (
    NOISE_DIR,
    config_hash,
    load_run_config,
    resolve_noise_path,
    section,
    set_path,
)
from qag.data import (
    ShowerDataset,
    SynthParams,
    analytic_moments,
    load_dataset,
    pixel_header,
    save_dataset,
    split,
    synth_generate,
)
from qag.errors import CheckpointError, ConfigError, QAGError
from qag.evaluation import evaluate
from qag.noise import NoiseModel, sweep_model
from qag.objectives import aggregate_histories
from qag.outputs import write_csv, write_json, write_manifest, write_matrix_csv
from qag.sweep import SweepConfig, inference_sweep, training_sweep
from qag.trainer import (
    TrainConfig,
    encoding_for,
    final_mse,
    load_checkpoint,
    parse_noise_change,
    repeat_trials,
    save_checkpoint,
    train,
)

logger = logging.getLogger("qag.cli")

SUBCOMMANDS = ("train", "generate", "evaluate", "circuit-report", "noise-sweep", "data-gen")
LOG_MARKER = "<!-- EXPERIMENT RUNS START -->"


# =============================================================================
# Helpers
# =============================================================================


def banner(title: str) -> None:
    print("=" * 70)
    print(title)
    print("=" * 70)


def parse_noise_arg(text: Optional[str], n_qubits: int) -> Optional[NoiseModel]:
    """``readout:P``, ``cnot:P``, ``combined:P``, ``none`` or a noise JSON file."""
    if text is None or text == "none":
        return None
    kind, sep, level = text.partition(":")
    if sep and kind in ("readout", "cnot", "combined"):
        try:
            return sweep_model(kind, float(level), n_qubits)
        except ValueError as exc:
            raise ConfigError(f"invalid noise level in '{text}'") from exc
    return NoiseModel.from_json(resolve_noise_path(text), n_qubits)


def parse_floats(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got '{text}'") from exc


def load_data(config: dict) -> Tuple[ShowerDataset, ShowerDataset]:
    """Train/test split of the configured CSV or of a synthetic dataset."""
    data = section(config, "data")
    n_pixels = int(data.get("n_pixels", 8))
    e_max = float(data.get("e_max", 0.6))
    if data.get("path"):
        dataset = load_dataset(data["path"], n_pixels=n_pixels, e_max=e_max)
    else:
        params = SynthParams.from_mapping(dict(section(data, "synthetic"), n_pixels=n_pixels, e_max=e_max))
        dataset = synth_generate(params, seed=int(data.get("seed", 0)))
    return split(
        dataset,
        int(data.get("train_size", 1000)),
        int(data.get("test_size", 980)),
        seed=int(data.get("split_seed", 0)),
    )


def encoding_from_config(config: dict, dataset: ShowerDataset) -> EncodingConfig:
    enc = section(config, "encoding")
    return EncodingConfig.for_dataset(
        dataset.pixel_std,
        global_factor_range=tuple(enc.get("global_factor_range", (-0.25, 0.25))),
        e_max=float(enc.get("e_max", 0.6)),
        theta_max=float(enc.get("theta_max", np.pi / 2)),
        shots=int(enc.get("shots", 512)),
        latent_scale=None if enc.get("latent_scale") is None else float(enc["latent_scale"]),
    )


def train_config_from(config: dict, n_qubits: int) -> TrainConfig:
    training = dict(section(config, "training"))
    training["seed"] = int(section(config, "experiment").get("seed", 0))
    return TrainConfig.from_mapping(training, n_qubits=n_qubits, base_dir=NOISE_DIR)


def generate_log_entry(subcommand: str, config: dict, out_dir: Path, command: str, status: str,
                       start_time: datetime, end_time: datetime) -> str:
    """Generate markdown log entry for one run."""
    date_str = start_time.strftime("%Y-%m-%d")
    return f"""
## Run: {date_str}-{subcommand}

**Subcommand:** {subcommand}
**Start:** {start_time.strftime("%Y-%m-%dT%H:%M:%SZ")}
**End:** {end_time.strftime("%Y-%m-%dT%H:%M:%SZ")}
**Status:** {status}

### Configuration
- Seed: {section(config, "experiment").get("seed")}
- Architecture: {section(config, "training").get("architecture")}
- Config hash: `{config_hash(config)[:12]}`

### Command
```bash
{command}
```

### Links
- Artifacts: [{out_dir}]({out_dir})

*Summarize with `analyze_results.py --input {out_dir}`*

---
"""


def append_to_log(log_path: Path, entry: str) -> None:
    """Append an entry after the run marker of the experiment log."""
    with open(log_path) as f:
        content = f.read()
    if LOG_MARKER in content:
        head, tail = content.split(LOG_MARKER, 1)
        content = head + LOG_MARKER + "\n" + entry + tail
    else:
        content = content + "\n" + entry
    with open(log_path, "w") as f:
        f.write(content)


# =============================================================================
# Subcommands
# =============================================================================


def cmd_data_gen(args, config: dict, out_dir: Path) -> dict:
    data = section(config, "data")
    synthetic = dict(section(data, "synthetic"), n_pixels=data.get("n_pixels", 8), e_max=data.get("e_max", 0.6))
    set_path(synthetic, "n_samples", args.n_samples)
    params = SynthParams.from_mapping(synthetic)
    seed = int(data.get("seed", 0)) if args.seed is None else args.seed
    dataset = synth_generate(params, seed=seed)
    save_dataset(dataset, out_dir / "dataset.csv")
    moments = analytic_moments(params)
    write_json(
        {"seed": seed, "params": params.to_dict(), "analytic": moments, "empirical": dataset.summary()},
        out_dir / "synth_params.json",
    )
    print(f"Samples: {dataset.n_samples} (clamped values: {dataset.n_clamped})")
    print(f"Energy sum: mu={moments['esum_mu']:.4f} sigma={moments['esum_sigma']:.4f}")
    return {"n_samples": dataset.n_samples}


def _write_history(history, path: Path) -> None:
    write_csv(
        history,
        path,
        ["epoch", "mmd_unweighted", "corr_unweighted", "w_mmd", "w_corr", "total",
         "lr", "batch_size", "noise_label", "skipped", "degenerate_pixels"],
    )


def cmd_train(args, config: dict, out_dir: Path) -> dict:
    training = section(config, "training")
    circuit = build_architecture(training.get("architecture", "MERA-up"), int(section(config, "data").get("n_pixels", 8)))
    train_set, test_set = load_data(config)
    cfg = train_config_from(config, circuit.n_qubits)
    if args.noise is not None:
        cfg = replace(cfg, noise=parse_noise_arg(args.noise, circuit.n_qubits))
    if args.noise_change:
        schedule = cfg.noise_schedule + tuple(
            parse_noise_change(text, circuit.n_qubits, NOISE_DIR) for text in args.noise_change
        )
        cfg = replace(cfg, noise_schedule=schedule)
    encoding = encoding_for(train_set, cfg, encoding_from_config(config, train_set))
    execution = section(config, "execution")
    progress = bool(execution.get("progress", True)) and not args.no_progress

    print(f"Architecture: {circuit.name} ({circuit.n_params} parameters)")
    print(f"Epochs: {cfg.epochs}  Shots: {cfg.shots}  Seed: {cfg.seed}")
    print(f"Noise: {cfg.noise.label if cfg.noise else 'noiseless'}")
    for epoch, model in cfg.noise_schedule:
        print(f"  epoch {epoch}: switch to '{model.label}'")

    trials = int(training.get("trials", 1))
    if trials > 1:
        drop = int(training.get("drop_extremes", 2))
        if trials <= 2 * drop:
            drop = 0
        summary = repeat_trials(
            circuit, train_set, test_set, cfg, trials, drop_extremes=drop, encoding=encoding,
            workers=int(execution.get("workers", 1)), progress=progress,
        )
        kept = set(summary.kept_seeds)
        write_csv(
            [{"trial": i, "seed": r.seed, "final_mse": r.final_mse, "kept": r.seed in kept}
             for i, r in enumerate(summary.results)],
            out_dir / "trials.csv",
        )
        write_csv(aggregate_histories([r.history for r in summary.results]), out_dir / "loss_history_mean.csv")
        write_json(
            {"architecture": circuit.name, "n_trials": trials, "drop_extremes": drop,
             "mse_mean": summary.mean, "mse_std": summary.std},
            out_dir / "trial_summary.json",
        )
        print(f"MSE over {len(summary.kept_seeds)} kept trials: {summary.mean:.3g} +/- {summary.std:.3g}")
        return {"mse_mean": summary.mean, "mse_std": summary.std}

    state = None
    checkpoint_path = out_dir / "checkpoint.json"
    if args.resume:
        checkpoint = load_checkpoint(args.resume, expected_hash=cfg.config_hash())
        if checkpoint.architecture != circuit.name:
            raise CheckpointError(f"checkpoint is for '{checkpoint.architecture}', not '{circuit.name}'")
        state = checkpoint.state
        print(f"Resuming from epoch {state.epoch}")
    state = train(
        circuit, train_set, cfg, encoding, state=state, progress=progress,
        checkpoint_path=checkpoint_path, checkpoint_every=int(training.get("checkpoint_every", 0)),
    )
    save_checkpoint(state, checkpoint_path, circuit, cfg, encoding)
    _write_history(state.history, out_dir / "loss_history.csv")
    mse = final_mse(state.params, circuit, test_set, cfg, encoding, cfg.noise_at(cfg.epochs))
    write_json({"architecture": circuit.name, "epochs": state.epoch, "final_mse": mse}, out_dir / "summary.json")
    print(f"Final shower-shape MSE: {mse:.3g}")
    return {"final_mse": mse}


def _checkpoint_circuit(path: Optional[str]):
    if not path:
        raise CheckpointError("a trained checkpoint is required (--checkpoint)")
    checkpoint = load_checkpoint(path)
    return checkpoint, build_architecture(checkpoint.architecture, checkpoint.n_qubits)


def cmd_generate(args, config: dict, out_dir: Path) -> dict:
    generation = section(config, "generation")
    checkpoint, circuit = _checkpoint_circuit(args.checkpoint or generation.get("checkpoint"))
    noise = parse_noise_arg(args.noise or generation.get("noise"), circuit.n_qubits)
    encoding = checkpoint.encoding
    if args.shots is not None:
        encoding = replace(encoding, shots=args.shots)
    n_images = args.n_images or int(generation.get("n_images", 980))
    seed = int(section(config, "experiment").get("seed", 0))
    images = generate_images(circuit, checkpoint.state.params, encoding, n_images, noise, seed=seed)
    save_dataset(images, out_dir / "generated.csv")
    write_json(
        {"architecture": circuit.name, "n_images": n_images, "seed": seed, "shots": encoding.shots,
         "noise": noise.to_dict() if noise else None,
         "noise_label": noise.label if noise else "noiseless"},
        out_dir / "generated.json",
    )
    print(f"Generated {n_images} images with {encoding.shots} shots ({noise.label if noise else 'noiseless'})")
    return {"n_images": n_images}


def cmd_evaluate(args, config: dict, out_dir: Path) -> dict:
    if not args.gen:
        raise ConfigError("evaluate needs --gen GENERATED.csv")
    data = section(config, "data")
    n_pixels, e_max = int(data.get("n_pixels", 8)), float(data.get("e_max", 0.6))
    gen = load_dataset(args.gen, n_pixels=n_pixels, e_max=e_max)
    ref = load_dataset(args.ref, n_pixels=n_pixels, e_max=e_max) if args.ref else load_data(config)[1]
    evaluation = section(config, "evaluation")
    seed = int(section(config, "experiment").get("seed", 0))
    report = evaluate(
        gen.samples, ref.samples, k=int(evaluation.get("k_clusters", 4)),
        bins=int(evaluation.get("bins", 25)), e_max=e_max, seed=seed,
    )
    write_json(report.to_dict(), out_dir / "eval_report.json")
    labels = pixel_header(n_pixels)
    write_csv(
        [{"pixel": labels[i], "mean_gen": float(report.pixel_mean_gen[i]), "mean_ref": float(report.pixel_mean_ref[i])}
         for i in range(n_pixels)],
        out_dir / "shape.csv",
    )
    write_matrix_csv(report.corr_matrix_gen, out_dir / "corr_gen.csv", labels)
    write_matrix_csv(report.corr_matrix_ref, out_dir / "corr_ref.csv", labels)
    edges = report.esum_bin_edges
    write_csv(
        [{"bin_low": float(edges[i]), "bin_high": float(edges[i + 1]),
          "count_gen": int(report.esum_counts_gen[i]), "count_ref": int(report.esum_counts_ref[i])}
         for i in range(len(edges) - 1)],
        out_dir / "esum_hist.csv",
    )
    rows = []
    for i, centroid in enumerate(report.cluster_centroids_gen):
        j = int(report.cluster_assignment[i])
        rows.append({"cluster": i, "source": "gen", "paired_with": j, "distance": float(report.cluster_distances[i]),
                     **dict(zip(labels, map(float, centroid)))})
        rows.append({"cluster": j, "source": "ref", "paired_with": i, "distance": float(report.cluster_distances[i]),
                     **dict(zip(labels, map(float, report.cluster_centroids_ref[j])))})
    write_csv(rows, out_dir / "clusters.csv")
    edges = report.pixel_bin_edges
    write_csv(
        [{"pixel": labels[p], "bin_low": float(edges[b]), "bin_high": float(edges[b + 1]),
          "count_gen": int(report.pixel_counts_gen[p, b]), "count_ref": int(report.pixel_counts_ref[p, b]),
          "overlap": float(report.pixel_overlap[p])}
         for p in range(n_pixels) for b in range(len(edges) - 1)],
        out_dir / "pixel_histograms.csv",
    )
    headline = report.headline()
    for key, value in headline.items():
        print(f"  {key:<22} {value:.6g}")
    return headline


def _circuit_entry(circuit) -> dict:
    return dict(circuit_summary(circuit), gates=circuit.to_dict()["gates"])


def cmd_circuit_report(args, config: dict, out_dir: Path) -> dict:
    report_cfg = section(config, "circuit_report")
    n_qubits = int(report_cfg.get("n_qubits", 8))
    names = args.arch or list(ARCHITECTURES)
    seed = int(section(config, "experiment").get("seed", 0))
    progress = bool(section(config, "execution").get("progress", True)) and not args.no_progress
    reports = full_report(
        n_qubits=n_qubits,
        n_pairs=args.pairs or int(report_cfg.get("n_pairs", 5000)),
        n_samples=args.samples or int(report_cfg.get("n_samples", 5000)),
        n_bins=int(report_cfg.get("n_bins", 75)),
        seed=seed,
        names=names,
        progress=progress,
    )
    train_trials = args.train_trials if args.train_trials is not None else int(report_cfg.get("train_trials", 0))
    if train_trials > 0:
        train_set, test_set = load_data(config)
        cfg = train_config_from(config, n_qubits)
        encoding = encoding_from_config(config, train_set)
        drop = 2 if train_trials > 4 else 0
        for report in reports:
            summary = repeat_trials(
                build_architecture(report.name, n_qubits), train_set, test_set, cfg, train_trials,
                drop_extremes=drop, encoding=encoding,
                workers=int(section(config, "execution").get("workers", 1)), progress=progress,
            )
            report.mse_mean, report.mse_std = summary.mean, summary.std

    checks = ordering_checks(reports)
    write_csv([r.to_dict() for r in reports], out_dir / "circuit_report.csv")
    write_json(
        {"reports": [r.to_dict() for r in reports],
         "circuits": [_circuit_entry(build_architecture(n, n_qubits)) for n in names],
         "ordering_checks": checks},
        out_dir / "circuit_report.json",
    )
    print(f"{'Circuit':<15} {'N_p':>4} {'expr':>8} {'ent':>7} {'pub. expr':>10} {'pub. ent':>9}")
    for r in reports:
        print(f"{r.name:<15} {r.n_params:>4} {r.expr_score:>8.4f} {r.ent_capability:>7.3f} "
              f"{r.published_expr or float('nan'):>10.4f} {r.published_ent or float('nan'):>9.3f}")
    for name, ok in checks.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}")
    return {"n_params": [r.n_params for r in reports]}


def cmd_noise_sweep(args, config: dict, out_dir: Path) -> dict:
    sweep_section = dict(section(config, "noise_sweep"))
    set_path(sweep_section, "mode", args.mode)
    set_path(sweep_section, "levels", parse_floats(args.levels))
    set_path(sweep_section, "configs", args.configs.split(",") if args.configs else None)
    set_path(sweep_section, "repeats", args.repeats)
    set_path(sweep_section, "files", args.noise_file)
    set_path(sweep_section, "trials", args.trials)
    sweep_section["seed"] = int(section(config, "experiment").get("seed", 0))
    sweep_section["workers"] = int(section(config, "execution").get("workers", 1))
    sweep_cfg = SweepConfig.from_mapping(sweep_section)
    progress = bool(section(config, "execution").get("progress", True)) and not args.no_progress
    train_set, test_set = load_data(config)

    if sweep_cfg.mode == "inference":
        checkpoint, circuit = _checkpoint_circuit(args.checkpoint or sweep_section.get("checkpoint"))
        points = inference_sweep(
            circuit, checkpoint.state.params, checkpoint.encoding, test_set, sweep_cfg,
            base_dir=NOISE_DIR, progress=progress,
        )
    else:
        circuit = build_architecture(section(config, "training").get("architecture", "MERA-up"), train_set.n_pixels)
        cfg = train_config_from(config, circuit.n_qubits)
        points = training_sweep(
            circuit, train_set, test_set, cfg, sweep_cfg,
            encoding=encoding_from_config(config, train_set), base_dir=NOISE_DIR, progress=progress,
        )

    write_csv([p.row() for p in points], out_dir / "sweep.csv")
    write_json([p for p in points], out_dir / "sweep.json")
    print(f"{'config':<10} {'label':<24} {'level':>7} {'x':>7} {'MSE mean':>10} {'MSE std':>10}")
    for p in points:
        print(f"{p.config:<10} {p.noise_label:<24} {p.level:>7.4f} {p.noise_level:>7.4f} {p.mse_mean:>10.3g} {p.mse_std:>10.3g}")
    return {"points": len(points)}


COMMANDS = {
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "circuit-report": cmd_circuit_report,
    "noise-sweep": cmd_noise_sweep,
    "data-gen": cmd_data_gen,
}


# =============================================================================
# Argument parsing
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Run QAG experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Experiment to run")
    parser.add_argument("--config", "-c", help="Run config (YAML or JSON) merged over experiment_matrix.yaml")
    parser.add_argument("--out", "-o", help="Output directory (default: experiments/results/<subcommand>/<date>)")
    parser.add_argument("--seed", "-s", type=int, help="Override experiment seed")
    parser.add_argument("--data", help="Dataset CSV (default: synthetic)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--no-log", action="store_true", help="Don't append to experiment log")
    parser.add_argument("--no-progress", action="store_true", help="Disable progress bars")
    parser.add_argument("--dry-run", action="store_true", help="Print the resolved config without running")
    parser.add_argument("--workers", "-w", type=int, help="Worker processes for trials and sweep points")

    training = parser.add_argument_group("train")
    training.add_argument("--epochs", "-e", type=int, help="Override number of epochs")
    training.add_argument("--shots", type=int, help="Override shots per circuit execution")
    training.add_argument("--arch", "-a", action="append", choices=ARCHITECTURES,
                          help="Architecture (repeat for circuit-report subsets)")
    training.add_argument("--noise", "-n", help="Noise model: JSON file, readout:P, cnot:P, combined:P or none")
    training.add_argument("--noise-change", action="append", default=[], metavar="EPOCH:FILE",
                          help="Switch noise model at an epoch (repeatable)")
    training.add_argument("--trials", "-t", type=int, help="Independent training trials")
    training.add_argument("--resume", help="Continue training from a checkpoint")

    generation = parser.add_argument_group("generate / evaluate")
    generation.add_argument("--checkpoint", help="Trained checkpoint")
    generation.add_argument("--n-images", type=int, help="Images to generate")
    generation.add_argument("--gen", help="Generated images CSV")
    generation.add_argument("--ref", help="Reference images CSV (default: test split)")

    report = parser.add_argument_group("circuit-report")
    report.add_argument("--pairs", type=int, help="Parameter pairs for expressibility")
    report.add_argument("--samples", type=int, help="Parameter samples for entanglement capability")
    report.add_argument("--train-trials", type=int, help="Training trials per architecture for the MSE column")

    sweep = parser.add_argument_group("noise-sweep / data-gen")
    sweep.add_argument("--mode", choices=["inference", "training"], help="Sweep mode")
    sweep.add_argument("--levels", help="Noise levels (comma-separated, e.g. 0,0.01,0.05)")
    sweep.add_argument("--configs", help="Noise configurations (comma-separated: readout,cnot,combined)")
    sweep.add_argument("--repeats", type=int, help="Inference repeats per point")
    sweep.add_argument("--noise-file", action="append", metavar="JSON",
                       help="Extra noise model file as a from-file sweep point (repeatable)")
    sweep.add_argument("--n-samples", type=int, help="Synthetic samples for data-gen")
    return parser


def resolve_config(args) -> dict:
    """Defaults, then --config, then CLI flags."""
    config = load_run_config(args.config)
    set_path(config, "experiment.seed", args.seed)
    set_path(config, "data.path", args.data)
    set_path(config, "execution.workers", args.workers)
    set_path(config, "training.epochs", args.epochs)
    set_path(config, "training.shots", args.shots)
    set_path(config, "encoding.shots", args.shots)
    set_path(config, "training.trials", args.trials if args.subcommand == "train" else None)
    if args.arch and args.subcommand != "circuit-report":
        set_path(config, "training.architecture", args.arch[-1])
    return config


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = resolve_config(args)
    except QAGError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1

    date_str = datetime.now().strftime("%Y-%m-%d")
    out_dir = (
        Path(args.out)
        if args.out
        else Path(section(config, "output").get("base_dir", "experiments/results")) / args.subcommand / date_str
    )

    banner(f"QAG Experiment: {args.subcommand}")
    print(f"Output: {out_dir}")
    print(f"Seed: {section(config, 'experiment').get('seed')}")
    print(f"Config hash: {config_hash(config)[:12]}")
    print()

    if args.dry_run:
        print("[DRY RUN] Resolved config:")
        print(yaml.safe_dump(config, sort_keys=False))
        return 0

    out_dir.mkdir(parents=True, exist_ok=True)
    start_time = datetime.now(timezone.utc)
    print("Starting experiment...")
    print("-" * 70)

    try:
        result = COMMANDS[args.subcommand](args, config, out_dir)
        status = "Complete"
    except (QAGError, OSError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        logger.debug("Run failed", exc_info=True)
        return 1
    except KeyboardInterrupt:
        print("\nExperiment interrupted", file=sys.stderr)
        return 130

    end_time = datetime.now(timezone.utc)
    write_manifest(
        out_dir, args.subcommand, config, int(section(config, "experiment").get("seed", 0)),
        result=result, argv=list(argv) if argv is not None else sys.argv[1:],
    )

    if not args.no_log:
        log_path = Path(section(config, "output").get("log_file", "experiments/reports/EXPERIMENT_LOG.md"))
        if log_path.exists():
            command = "run-experiment " + " ".join(argv if argv is not None else sys.argv[1:])
            append_to_log(log_path, generate_log_entry(
                args.subcommand, config, out_dir, command, status, start_time, end_time,
            ))
            print(f"Log entry added to {log_path}")

    duration = (end_time - start_time).total_seconds()
    print("-" * 70)
    print(f"Status: {status}")
    print(f"Duration: {duration:.1f} seconds ({duration / 60:.1f} minutes)")
    print(f"Results: {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
