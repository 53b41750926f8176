"""End-to-end runs of the experiment and analysis scripts on small configs."""

import json
from dataclasses import asdict

import pytest
import yaml

from experiments.scripts import analyze_results, run_experiment
from qag.circuits import build_architecture
from qag.errors import ConfigError
from qag.noise import NoiseModel
from qag.outputs import read_csv, write_csv
from qag.trainer import TrainConfig, train

SMALL_CONFIG = {
    "data": {"train_size": 150, "test_size": 100, "synthetic": {"n_samples": 300}},
    "training": {"eval_images": 40, "checkpoint_every": 0},
    "noise_sweep": {"levels": [0.0, 0.05], "configs": ["readout"], "files": [], "n_images": 4, "repeats": 2},
    "execution": {"progress": False},
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL_CONFIG))
    return str(path)


def run(*argv):
    return run_experiment.main([*argv, "--no-log", "--no-progress"])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One short training run shared by the generate/evaluate/sweep tests."""
    root = tmp_path_factory.mktemp("trained")
    config = root / "small.yaml"
    config.write_text(yaml.safe_dump(SMALL_CONFIG))
    out = root / "train"
    code = run("train", "-c", str(config), "--out", str(out), "--epochs", "2", "--shots", "32", "--arch", "Linear")
    assert code == 0
    return str(config), out


# =============================================================================
# Helpers
# =============================================================================


def test_parse_noise_arg():
    assert run_experiment.parse_noise_arg(None, 8) is None
    assert run_experiment.parse_noise_arg("none", 8) is None
    model = run_experiment.parse_noise_arg("combined:0.02", 8)
    assert model.label == "combined@0.02"
    assert model.cx_default == 0.02 and model.readout_error == (0.02,) * 8
    shipped = run_experiment.parse_noise_arg("calibration_after.json", 8)
    assert shipped.n_qubits == 8
    with pytest.raises(ConfigError):
        run_experiment.parse_noise_arg("readout:abc", 8)
    with pytest.raises(ConfigError):
        run_experiment.parse_noise_arg("no_such_device.json", 8)


def test_parse_floats():
    assert run_experiment.parse_floats("0,0.01, 0.05") == [0.0, 0.01, 0.05]
    assert run_experiment.parse_floats(None) is None
    with pytest.raises(ConfigError):
        run_experiment.parse_floats("0,x")


def test_append_to_log(tmp_path):
    log = tmp_path / "LOG.md"
    log.write_text(f"# Log\n\n{run_experiment.LOG_MARKER}\n\n## Run: older\n")
    run_experiment.append_to_log(log, "## Run: newer\n")
    text = log.read_text()
    assert text.index("## Run: newer") < text.index("## Run: older")


# =============================================================================
# Subcommands
# =============================================================================


def test_dry_run(tmp_path, capsys):
    out = tmp_path / "never"
    assert run("train", "--dry-run", "--out", str(out), "--epochs", "7") == 0
    assert "epochs: 7" in capsys.readouterr().out
    assert not out.exists()


def test_data_gen(tmp_path, small_config):
    out = tmp_path / "data"
    assert run("data-gen", "-c", small_config, "--out", str(out), "--n-samples", "50", "--seed", "3") == 0
    assert len((out / "dataset.csv").read_text().splitlines()) == 51
    synth = json.loads((out / "synth_params.json").read_text())
    assert synth["seed"] == 3 and synth["params"]["n_samples"] == 50
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "data-gen"
    assert manifest["result"] == {"n_samples": 50}
    assert len(manifest["config_hash"]) == 64


def test_train_outputs(trained):
    _, out = trained
    history = read_csv(out / "loss_history.csv")
    assert [int(r["epoch"]) for r in history] == [0, 1]
    checkpoint = json.loads((out / "checkpoint.json").read_text())
    assert checkpoint["architecture"] == "Linear" and checkpoint["epoch"] == 2
    summary = json.loads((out / "summary.json").read_text())
    assert 0.0 <= summary["final_mse"] < 0.36


def test_resume_extends_training(trained, tmp_path):
    config, out = trained
    resumed = tmp_path / "resumed"
    assert run("train", "-c", config, "--out", str(resumed), "--epochs", "3", "--shots", "32",
               "--arch", "Linear", "--resume", str(out / "checkpoint.json")) == 0
    assert [int(r["epoch"]) for r in read_csv(resumed / "loss_history.csv")] == [0, 1, 2]


def test_resume_with_other_settings_fails(trained, tmp_path):
    config, out = trained
    code = run("train", "-c", config, "--out", str(tmp_path / "r"), "--epochs", "3", "--shots", "64",
               "--arch", "Linear", "--resume", str(out / "checkpoint.json"))
    assert code == 1


def test_generate_and_evaluate(trained, tmp_path):
    config, out = trained
    gen_dir = tmp_path / "gen"
    assert run("generate", "-c", config, "--out", str(gen_dir), "--checkpoint", str(out / "checkpoint.json"),
               "--n-images", "20") == 0
    assert len((gen_dir / "generated.csv").read_text().splitlines()) == 21
    assert json.loads((gen_dir / "generated.json").read_text())["shots"] == 32

    eval_dir = tmp_path / "eval"
    assert run("evaluate", "-c", config, "--out", str(eval_dir), "--gen", str(gen_dir / "generated.csv")) == 0
    report = json.loads((eval_dir / "eval_report.json").read_text())
    assert report["n_gen"] == 20 and report["n_ref"] == 100
    assert len(read_csv(eval_dir / "clusters.csv")) == 8
    assert len(read_csv(eval_dir / "pixel_histograms.csv")) == 8 * 25


def test_generate_requires_checkpoint(tmp_path, small_config):
    assert run("generate", "-c", small_config, "--out", str(tmp_path / "g")) == 1
    assert run("generate", "-c", small_config, "--out", str(tmp_path / "g"),
               "--checkpoint", str(tmp_path / "absent.json")) == 1


def test_inference_sweep_and_analysis(trained, tmp_path):
    config, out = trained
    sweep_dir = tmp_path / "sweep"
    assert run("noise-sweep", "-c", config, "--out", str(sweep_dir), "--mode", "inference",
               "--checkpoint", str(out / "checkpoint.json")) == 0
    rows = read_csv(sweep_dir / "sweep.csv")
    assert [(r["config"], float(r["level"])) for r in rows] == [("readout", 0.0), ("readout", 0.05)]
    assert all(int(r["n_runs"]) == 2 for r in rows)

    assert analyze_results.main(["--input", str(sweep_dir)]) == 0
    tables = (sweep_dir / "tables.md").read_text()
    assert "## Noise Sweep (inference)" in tables


def test_noise_file_flag_adds_a_sweep_point(trained, tmp_path):
    config, out = trained
    device = tmp_path / "device.json"
    NoiseModel.uniform(8, readout=0.02, cx=0.01, label="device").to_json(device)
    sweep_dir = tmp_path / "sweep"
    assert run("noise-sweep", "-c", config, "--out", str(sweep_dir), "--mode", "inference",
               "--checkpoint", str(out / "checkpoint.json"), "--noise-file", str(device)) == 0
    rows = read_csv(sweep_dir / "sweep.csv")
    assert [r["config"] for r in rows] == ["readout", "readout", "from-file"]
    assert rows[-1]["noise_label"] == "device"
    assert run("noise-sweep", "-c", config, "--out", str(tmp_path / "bad"), "--mode", "inference",
               "--checkpoint", str(out / "checkpoint.json"), "--noise-file", str(tmp_path / "absent.json")) == 1


def test_train_trials(tmp_path, small_config):
    out = tmp_path / "trials"
    assert run("train", "-c", small_config, "--out", str(out), "--epochs", "1", "--shots", "16",
               "--arch", "Linear", "--trials", "3") == 0
    trials = read_csv(out / "trials.csv")
    assert len(trials) == 3 and all(r["kept"] == "True" for r in trials)
    assert json.loads((out / "trial_summary.json").read_text())["drop_extremes"] == 0


def test_circuit_report_and_analysis(tmp_path, small_config):
    out = tmp_path / "report"
    assert run("circuit-report", "-c", small_config, "--out", str(out), "--arch", "Linear", "--arch", "TTN",
               "--pairs", "1000", "--samples", "1000") == 0
    rows = read_csv(out / "circuit_report.csv")
    assert [r["name"] for r in rows] == ["Linear", "TTN"]
    assert json.loads((out / "circuit_report.json").read_text())["circuits"][0]["n_params"] == 16

    assert analyze_results.main(["--input", str(out), "--strict"]) == 0
    assert "| Linear" in (out / "tables.md").read_text()


# =============================================================================
# Analysis checks
# =============================================================================


def _history(spike=5.0):
    rows = []
    for epoch in range(160):
        if epoch < 30:
            total, label = 1.0, "before"
        elif epoch == 30:
            total, label = spike, "after"
        else:
            total, label = 4.0 * 0.98 ** (epoch - 30), "after"
        rows.append({"epoch": epoch, "total": total, "noise_label": label})
    return rows


def test_calibration_checks():
    history = _history()
    assert analyze_results.find_switch_epoch(history) == 30
    checks = analyze_results.calibration_checks(history)
    assert len(checks) == 2 and all(ok for _, ok, _ in checks)
    flat = analyze_results.calibration_checks(_history(spike=1.5))
    assert not flat[0][1]


def test_calibration_spike_on_a_real_training_run(shower_split):
    train_set, _ = shower_split
    inverted = NoiseModel.uniform(8, readout=1.0, label="inverted")
    cfg = TrainConfig(
        epochs=160, batch_size_initial=20, corr_start_epoch=1000, noise_schedule=((150, inverted),), seed=3,
    )
    state = train(build_architecture("MERA-up"), train_set, cfg)
    history = [asdict(r) for r in state.history]
    assert analyze_results.find_switch_epoch(history) == 150
    name, ok, detail = analyze_results.calibration_checks(history)[0]
    assert ok, detail


def test_analysis_of_loss_history(tmp_path):
    write_csv(_history(), tmp_path / "loss_history.csv")
    assert analyze_results.main(["--input", str(tmp_path), "--strict"]) == 0
    assert analyze_results.main(["--input", str(tmp_path / "missing")]) == 1


def test_inference_checks():
    def row(config, level, mse):
        return {"mode": "inference", "config": config, "level": level, "mse_mean": mse, "mse_std": 0.0,
                "noise_label": f"{config}@{level}", "noise_level": level}

    rows = [row("readout", 0.0, 1.0), row("readout", 0.05, 1.5), row("combined", 0.0, 1.0),
            row("combined", 0.01, 3.0), row("combined", 0.05, 4.0)]
    checks = {name: ok for name, ok, _ in analyze_results.inference_checks(rows)}
    assert checks["inference readout: within 2x up to 8.0%"]
    assert not checks["inference combined: within 2x up to 1.5%"]
    assert checks["inference combined >= readout from 3%"]
