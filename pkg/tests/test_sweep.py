"""Job fan-out and noise sweeps."""

import numpy as np
import pytest

from qag.circuits import build_architecture
from qag.codec import EncodingConfig, generate_images
from qag.errors import ConfigError
from qag.evaluation import shower_shape_mse
from qag.noise import NoiseModel
from qag.pool import gather_jobs, run_jobs
from qag.sweep import (
    STREAM_SWEEP,
    SweepConfig,
    configured_level,
    inference_sweep,
    sweep_models,
    training_sweep,
)
from qag.trainer import TrainConfig


def _square(x):
    return x * x


# =============================================================================
# Job pool
# =============================================================================


async def test_gather_jobs_keeps_submission_order():
    results = await gather_jobs(_square, list(range(8)), workers=2)
    assert results == [x * x for x in range(8)]


def test_run_jobs_inline():
    assert run_jobs(_square, [3, 1, 2]) == [9, 1, 4]
    assert run_jobs(_square, []) == []


# =============================================================================
# Sweep configuration
# =============================================================================


def test_sweep_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(mode="both")
    with pytest.raises(ConfigError):
        SweepConfig(configs=("thermal",))
    with pytest.raises(ConfigError):
        SweepConfig(levels=(1.5,))
    cfg = SweepConfig.from_mapping({"mode": "training", "levels": [0, 0.1], "plot": True})
    assert cfg.mode == "training" and cfg.levels == (0.0, 0.1)


def test_sweep_models_order_and_files(tmp_path):
    NoiseModel.uniform(8, 0.02, 0.01, label="device").to_json(tmp_path / "device.json")
    cfg = SweepConfig(levels=(0.0, 0.05), configs=("cnot", "readout"), files=("device.json",))
    models = sweep_models(cfg, 8, base_dir=tmp_path)
    assert [c for c, _ in models] == ["cnot", "cnot", "readout", "readout", "from-file"]
    assert models[1][1].cx_default == 0.05
    assert models[3][1].readout_error == (0.05,) * 8
    assert models[-1][1].label == "device"
    with pytest.raises(ConfigError):
        sweep_models(SweepConfig(files=("absent.json",)), 8, base_dir=tmp_path)


def test_configured_level():
    circuit = build_architecture("Linear")
    cfg = SweepConfig(levels=(0.04,))
    by_config = {c: m for c, m in sweep_models(cfg, 8)}
    assert configured_level("readout", by_config["readout"], circuit) == 0.04
    assert configured_level("cnot", by_config["cnot"], circuit) == 0.04
    assert configured_level("combined", by_config["combined"], circuit) == 0.04
    device = NoiseModel.uniform(8, 0.02, 0.06)
    assert configured_level("from-file", device, circuit) == pytest.approx(0.04)


# =============================================================================
# Sweeps
# =============================================================================


def test_inference_sweep_zero_level_matches_noiseless(shower_split):
    _, test_set = shower_split
    circuit = build_architecture("Linear")
    params = np.random.default_rng(6).uniform(-np.pi, np.pi, circuit.n_params)
    encoding = EncodingConfig.for_dataset(test_set.pixel_std, shots=64)
    cfg = SweepConfig(levels=(0.0, 0.1), configs=("readout", "cnot"), n_images=5, repeats=2, seed=3)
    points = inference_sweep(circuit, params, encoding, test_set, cfg)

    assert [(p.config, p.level) for p in points] == [
        ("readout", 0.0), ("readout", 0.1), ("cnot", 0.0), ("cnot", 0.1),
    ]
    assert points[1].noise_level == pytest.approx(0.05)
    expected = [
        shower_shape_mse(generate_images(circuit, params, encoding, 5, seed=[3, STREAM_SWEEP, r]), test_set.samples)
        for r in range(2)
    ]
    assert points[0].mse_values == pytest.approx(expected, abs=0)
    assert points[2].mse_values == points[0].mse_values
    assert points[0].mse_mean == pytest.approx(np.mean(expected))
    assert "mse_values" not in points[0].row()


def test_training_sweep_runs(shower_split):
    train_set, test_set = shower_split
    circuit = build_architecture("Linear")
    cfg = SweepConfig(mode="training", levels=(0.02,), configs=("combined",), trials=2)
    train_cfg = TrainConfig(epochs=2, shots=16, eval_images=8)
    points = training_sweep(circuit, train_set, test_set, train_cfg, cfg)
    assert len(points) == 1
    point = points[0]
    assert point.mode == "training" and point.n_runs == 2
    assert point.noise_label == "combined@0.02"
    assert all(np.isfinite(v) for v in point.mse_values)
