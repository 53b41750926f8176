#!/usr/bin/env python3
"""
Analyze QAG experiment results and generate markdown tables.

Reads circuit_report.csv, sweep.csv, trials.csv and loss_history.csv from one
or more result directories and checks the qualitative acceptance criteria:
circuit parameter counts and orderings, inference-sweep stability,
training-noise agreement and the calibration-change spike.

Usage:
    # Analyze a single result directory
    python experiments/scripts/analyze_results.py \
        --input experiments/results/circuit-report/2026-10-18

    # Combine several runs into one tables.md
    python experiments/scripts/analyze_results.py \
        --input results/sweep-inference --input results/sweep-training \
        --input results/calibration --output experiments/reports

    # Exit non-zero if any check fails
    python experiments/scripts/analyze_results.py --input results/sweep --strict
"""

import argparse
import csv
import math
import sys
from collections import defaultdict
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from qag.circuit_metrics import PUBLISHED

# Published N_p of the nine architectures, in report order
EXPECTED_PARAMS = {name: row[0] for name, row in PUBLISHED.items()}

STABLE_FACTOR = 2.0
ALL_CONFIGS_STABLE_UP_TO = 0.015
READOUT_STABLE_UP_TO = 0.08
COMBINED_ABOVE_READOUT_FROM = 0.03
TRAINING_NOISE_LEVEL = 0.03
SPIKE_FACTOR = 2.0
SPIKE_WINDOW = 20
RECOVERY_WINDOW = 50
MERA_UP_TARGETS = {"ent_capability": (0.894, 0.05), "expr_score": (0.9377, 0.1)}

Check = Tuple[str, bool, str]


def _convert(value: str) -> Any:
    for cast in (int, float):
        try:
            return cast(value)
        except (ValueError, TypeError):
            pass
    if value in ("True", "False"):
        return value == "True"
    return value


def load_summary_csv(csv_path: Path) -> List[Dict[str, Any]]:
    """Load a result CSV into a list of dicts with numeric fields converted."""
    if not csv_path.exists():
        return []
    with open(csv_path) as f:
        return [{k: _convert(v) for k, v in row.items()} for row in csv.DictReader(f)]


def load_results(inputs: List[Path]) -> Dict[str, List[Dict[str, Any]]]:
    """Concatenate the known CSV files found in every input directory."""
    results = defaultdict(list)
    for directory in inputs:
        for name in ("circuit_report", "sweep", "trials", "loss_history"):
            rows = load_summary_csv(directory / f"{name}.csv")
            if rows:
                print(f"Loaded {len(rows)} rows from {directory / f'{name}.csv'}")
                results[name].extend(rows)
    return dict(results)


def _fmt(value: Optional[float], spec: str = ".4f") -> str:
    if value is None or value == "" or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return format(value, spec)


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# =============================================================================
# Circuit report
# =============================================================================


def circuit_checks(rows: List[Dict]) -> List[Check]:
    by_name = {r["name"]: r for r in rows}
    checks = []
    for name, expected in EXPECTED_PARAMS.items():
        if name in by_name:
            got = by_name[name]["n_params"]
            checks.append((f"N_p({name}) == {expected}", got == expected, str(got)))

    weak = [n for n in ("Linear", "TTN") if n in by_name]
    strong = [n for n in ("MERA_Rz", "MERA-up_d2_Rz") if n in by_name]
    if weak and strong:
        for metric in ("expr_score", "ent_capability"):
            top = max(by_name[n][metric] for n in weak)
            bottom = min(by_name[n][metric] for n in strong)
            checks.append((f"{metric}: Linear/TTN below MERA_Rz/MERA-up_d2_Rz", top < bottom,
                           f"{top:.4f} < {bottom:.4f}"))

    for name, row in by_name.items():
        base = name[: -len("_Rz")] if name.endswith("_Rz") else None
        if base not in by_name:
            continue
        for metric, err in (("expr_score", "expr_stderr"), ("ent_capability", "ent_stderr")):
            slack = 2 * (row[err] + by_name[base][err])
            ok = row[metric] + slack >= by_name[base][metric]
            checks.append((f"{metric}: {name} >= {base}", ok, f"{row[metric]:.4f} vs {by_name[base][metric]:.4f}"))

    if "MERA-up" in by_name:
        for metric, (target, tol) in MERA_UP_TARGETS.items():
            got = by_name["MERA-up"][metric]
            checks.append((f"MERA-up {metric} = {target} +/- {tol}", abs(got - target) <= tol, f"{got:.4f}"))
    return checks


def generate_circuit_table(rows: List[Dict]) -> str:
    """Characteristic circuit numbers next to the published values."""
    lines = [
        "## Circuit Characteristics",
        "",
        "| Circuit | N_p | Expr | Expr (pub.) | E | E (pub.) | MSE | MSE (pub.) |",
        "|---------|-----|------|-------------|---|----------|-----|------------|",
    ]
    for r in rows:
        mse = f"{_fmt(r.get('mse_mean'), '.2e')} +/- {_fmt(r.get('mse_std'), '.1e')}" if r.get("mse_mean") != "" else "-"
        pub_mse = f"{_fmt(r.get('published_mse'), '.2e')} +/- {_fmt(r.get('published_mse_std'), '.1e')}"
        lines.append(
            f"| {r['name']:<14} | {r['n_params']:>3} | {_fmt(r['expr_score'])} | {_fmt(r.get('published_expr'))} "
            f"| {_fmt(r['ent_capability'], '.3f')} | {_fmt(r.get('published_ent'), '.3f')} | {mse} | {pub_mse} |"
        )
    return "\n".join(lines)


# =============================================================================
# Noise sweeps
# =============================================================================


def _curves(rows: List[Dict], mode: str) -> Dict[str, Dict[float, Dict]]:
    curves = defaultdict(dict)
    for r in rows:
        if r["mode"] == mode and r["config"] != "from-file":
            curves[r["config"]][float(r["level"])] = r
    return dict(curves)


def _baseline(curves: Dict[str, Dict[float, Dict]]) -> Optional[Dict]:
    for curve in curves.values():
        if 0.0 in curve:
            return curve[0.0]
    return None


def inference_checks(rows: List[Dict]) -> List[Check]:
    curves = _curves(rows, "inference")
    base = _baseline(curves)
    if base is None:
        return []
    limit = STABLE_FACTOR * base["mse_mean"]
    checks = []
    for config, curve in sorted(curves.items()):
        bound = READOUT_STABLE_UP_TO if config == "readout" else ALL_CONFIGS_STABLE_UP_TO
        worst = max((r["mse_mean"] for lvl, r in curve.items() if lvl <= bound + 1e-12), default=None)
        if worst is not None:
            checks.append((f"inference {config}: within {STABLE_FACTOR:g}x up to {bound:.1%}", worst <= limit,
                           f"max {worst:.3g} vs {limit:.3g}"))
    if "combined" in curves and "readout" in curves:
        levels = sorted(lvl for lvl in curves["combined"] if lvl >= COMBINED_ABOVE_READOUT_FROM and lvl in curves["readout"])
        if levels:
            ok = all(curves["combined"][lvl]["mse_mean"] >= curves["readout"][lvl]["mse_mean"] for lvl in levels)
            checks.append((f"inference combined >= readout from {COMBINED_ABOVE_READOUT_FROM:.0%}", ok,
                           f"{len(levels)} levels"))
    return checks


def training_checks(rows: List[Dict]) -> List[Check]:
    curves = _curves(rows, "training")
    base = _baseline(curves)
    noisy = curves.get("combined", {}).get(TRAINING_NOISE_LEVEL)
    if base is None or noisy is None:
        return []
    pooled = math.sqrt((base["mse_std"] ** 2 + noisy["mse_std"] ** 2) / 2)
    diff = abs(noisy["mse_mean"] - base["mse_mean"])
    return [(f"training at {TRAINING_NOISE_LEVEL:.0%} combined within one pooled std", diff <= pooled,
             f"|diff| {diff:.3g} vs {pooled:.3g}")]


def generate_sweep_table(rows: List[Dict], mode: str) -> str:
    """MSE per noise level, one column per configuration."""
    curves = _curves(rows, mode)
    configs = sorted(curves)
    lines = [
        f"## Noise Sweep ({mode})",
        "",
        "| Level | " + " | ".join(configs) + " |",
        "|-------|" + "|".join("-" * (len(c) + 2) for c in configs) + "|",
    ]
    levels = sorted({lvl for curve in curves.values() for lvl in curve})
    for lvl in levels:
        cells = []
        for c in configs:
            r = curves[c].get(lvl)
            cells.append(f"{r['mse_mean']:.3e} +/- {r['mse_std']:.1e}" if r else "-")
        lines.append(f"| {lvl:.3f} | " + " | ".join(cells) + " |")
    files = [r for r in rows if r["mode"] == mode and r["config"] == "from-file"]
    if files:
        lines += ["", "| Snapshot | Level | MSE |", "|----------|-------|-----|"]
        for r in files:
            lines.append(f"| {r['noise_label']} | {r['noise_level']:.4f} | {r['mse_mean']:.3e} +/- {r['mse_std']:.1e} |")
    return "\n".join(lines)


# =============================================================================
# Calibration change
# =============================================================================


def find_switch_epoch(history: List[Dict]) -> Optional[int]:
    """First epoch whose noise label differs from the previous epoch."""
    for prev, row in zip(history, history[1:]):
        if row["noise_label"] != prev["noise_label"]:
            return int(row["epoch"])
    return None


def calibration_checks(history: List[Dict], event_epoch: Optional[int] = None) -> List[Check]:
    if not history:
        return []
    history = sorted(history, key=lambda r: r["epoch"])
    event = event_epoch if event_epoch is not None else find_switch_epoch(history)
    if event is None:
        return []
    epochs = np.array([r["epoch"] for r in history])
    total = np.array([float(r["total"]) for r in history])
    at = np.flatnonzero(epochs == event)
    if at.size == 0 or at[0] < SPIKE_WINDOW:
        return [("calibration spike", False, f"epoch {event} lacks {SPIKE_WINDOW} prior epochs")]
    i = int(at[0])
    trailing = float(total[i - SPIKE_WINDOW:i].mean())
    checks = [(f"loss spike at epoch {event} >= {SPIKE_FACTOR:g}x trailing mean", total[i] >= SPIKE_FACTOR * trailing,
               f"{total[i]:.3g} vs {trailing:.3g}")]
    ends = list(range(i + RECOVERY_WINDOW, len(total), RECOVERY_WINDOW))
    means = [float(total[e - RECOVERY_WINDOW + 1:e + 1].mean()) for e in ends]
    if len(means) >= 2:
        ok = all(b < a for a, b in zip(means, means[1:]))
        checks.append((f"{RECOVERY_WINDOW}-epoch trailing mean decreases after epoch {event}", ok,
                       ", ".join(f"{m:.3g}" for m in means)))
    return checks


# =============================================================================
# Report
# =============================================================================


def generate_checks_table(checks: List[Check]) -> str:
    lines = ["## Acceptance Checks", "", "| Check | Status | Detail |", "|-------|--------|--------|"]
    for name, ok, detail in checks:
        lines.append(f"| {name} | {_status(ok)} | {detail} |")
    return "\n".join(lines)


def generate_trials_summary(rows: List[Dict]) -> str:
    kept = [r["final_mse"] for r in rows if r.get("kept") is True]
    values = kept or [r["final_mse"] for r in rows]
    return "\n".join([
        "## Training Trials",
        "",
        f"- Trials: {len(rows)} ({len(kept)} kept)",
        f"- Final MSE: {np.mean(values):.3e} +/- {np.std(values):.1e}",
    ])


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Analyze QAG experiment results")
    parser.add_argument("--input", "-i", action="append", required=True, help="Result directory (repeatable)")
    parser.add_argument("--output", "-o", help="Directory for tables.md (default: first input)")
    parser.add_argument("--event-epoch", type=int, help="Calibration change epoch (default: detect from noise labels)")
    parser.add_argument("--strict", action="store_true", help="Exit 1 if any acceptance check fails")
    args = parser.parse_args(argv)

    inputs = [Path(p) for p in args.input]
    for path in inputs:
        if not path.is_dir():
            print(f"Error: {path} is not a directory", file=sys.stderr)
            return 1
    results = load_results(inputs)
    if not results:
        print("No results found!")
        return 1

    sections = []
    checks: List[Check] = []
    if "circuit_report" in results:
        sections.append(generate_circuit_table(results["circuit_report"]))
        checks += circuit_checks(results["circuit_report"])
    if "sweep" in results:
        for mode in ("inference", "training"):
            if any(r["mode"] == mode for r in results["sweep"]):
                sections.append(generate_sweep_table(results["sweep"], mode))
        checks += inference_checks(results["sweep"]) + training_checks(results["sweep"])
    if "trials" in results:
        sections.append(generate_trials_summary(results["trials"]))
    if "loss_history" in results:
        checks += calibration_checks(results["loss_history"], args.event_epoch)
    if checks:
        sections.append(generate_checks_table(checks))

    print("\n" + "=" * 70)
    print("\n\n".join(sections))
    print("=" * 70)

    output_dir = Path(args.output) if args.output else inputs[0]
    output_dir.mkdir(parents=True, exist_ok=True)
    tables_path = output_dir / "tables.md"
    with open(tables_path, "w") as f:
        f.write("# QAG Experiment Results\n\n")
        f.write(f"Generated: {datetime.now().isoformat()}\n\n")
        f.write("\n\n".join(sections))
        f.write("\n")
    print(f"\nSaved tables to: {tables_path}")

    failed = [name for name, ok, _ in checks if not ok]
    print(f"\n{len(checks) - len(failed)}/{len(checks)} checks passed")
    if args.strict and failed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
