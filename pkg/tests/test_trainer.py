"""SPSA updates, training schedules, checkpoints and repeated trials."""

import math
from dataclasses import replace

import numpy as np
import pytest

from qag.circuits import build_architecture
from qag.codec import generate_images
from qag.data import SynthParams, split, synth_generate
from qag.errors import CheckpointError, ConfigError, TrainingError
from qag.evaluation import evaluate
from qag.noise import NoiseModel
from qag.trainer import (
    TrainConfig,
    TrainState,
    TrialResult,
    encoding_for,
    final_mse,
    init_state,
    load_checkpoint,
    parse_noise_change,
    repeat_trials,
    save_checkpoint,
    spsa_step,
    summarize_trials,
    train,
    trial_seeds,
)


def _quadratic(params):
    return float(np.sum(params**2))


@pytest.fixture
def small_cfg():
    return TrainConfig(epochs=4, shots=32, batch_size=3, batch_switch_epoch=2, eval_images=16, seed=7)


# =============================================================================
# Schedules and configuration
# =============================================================================


def test_learning_rate_schedule():
    cfg = TrainConfig()
    assert cfg.lr(0) == cfg.lr(50) == 1.0
    assert cfg.lr(150) == pytest.approx(math.exp(-0.6))
    assert cfg.lr(400) < cfg.lr(150)


def test_batch_size_schedule():
    cfg = TrainConfig()
    assert cfg.batch_size_at(99) == 1
    assert cfg.batch_size_at(100) == 20


def test_noise_schedule():
    before = NoiseModel.uniform(8, 0.01, label="before")
    after = NoiseModel.uniform(8, 0.05, label="after")
    cfg = TrainConfig(noise=before, noise_schedule=((10, after),))
    assert cfg.noise_at(9) is before
    assert cfg.noise_at(10) is after
    assert TrainConfig().noise_at(300) is None


def test_config_validation():
    with pytest.raises(TrainingError):
        TrainConfig(epochs=-1)
    with pytest.raises(TrainingError):
        TrainConfig(shots=0)
    with pytest.raises(TrainingError):
        TrainConfig(reference_mode="sometimes")
    with pytest.raises(TrainingError):
        TrainConfig(perturbation_c=0.0)


def test_config_hash_tracks_values():
    assert TrainConfig().config_hash() == TrainConfig().config_hash()
    assert TrainConfig(shots=64).config_hash() != TrainConfig().config_hash()
    assert TrainConfig(epochs=10).config_hash() == TrainConfig().config_hash()


def test_from_mapping_with_noise(tmp_path):
    NoiseModel.uniform(8, 0.02, label="later").to_json(tmp_path / "later.json")
    cfg = TrainConfig.from_mapping(
        {
            "epochs": 20,
            "noise": {"label": "flat", "readout": 0.01, "cx": 0.01},
            "noise_schedule": ["12:later.json", {"epoch": 5, "model": {"readout": 0.03}}],
            "unrelated": True,
        },
        base_dir=tmp_path,
    )
    assert cfg.epochs == 20
    assert cfg.noise.label == "flat"
    assert [e for e, _ in cfg.noise_schedule] == [5, 12]
    assert cfg.noise_at(15).label == "later"


@pytest.mark.parametrize("text", ["later.json", "x:later.json", "-1:later.json", "5:", "5:missing.json"])
def test_parse_noise_change_errors(tmp_path, text):
    NoiseModel.uniform(8, 0.02, label="later").to_json(tmp_path / "later.json")
    with pytest.raises(ConfigError):
        parse_noise_change(text, base_dir=tmp_path)


def test_parse_noise_change(tmp_path):
    NoiseModel.uniform(8, 0.02, label="later").to_json(tmp_path / "later.json")
    epoch, model = parse_noise_change("300:later.json", base_dir=tmp_path)
    assert epoch == 300 and model.label == "later"


# =============================================================================
# SPSA
# =============================================================================


def test_spsa_scalar_contraction():
    cfg = TrainConfig(lr_c0=0.1, lr_decay_start=10**6)
    state = TrainState(params=np.array([1.0]))
    values = []
    for _ in range(10):
        state = spsa_step(state, _quadratic, cfg)
        values.append(state.params[0])
    np.testing.assert_allclose(values, 0.8 ** np.arange(1, 11), rtol=1e-12)
    assert state.epoch == 10
    assert state.loss_evaluations == 20
    assert len(state.history) == 10


def test_spsa_descends_quadratic():
    cfg = TrainConfig(lr_c0=0.1, lr_decay_start=10**6)
    state = TrainState(params=np.array([1.0, -0.5]))
    losses = [_quadratic(state.params)]
    for _ in range(100):
        state = spsa_step(state, _quadratic, cfg)
        losses.append(_quadratic(state.params))
    assert np.all(np.diff(losses) <= 1e-15)
    assert np.linalg.norm(state.params) < 1e-2


def test_spsa_step_is_reproducible():
    cfg = TrainConfig(lr_c0=0.1)
    start = TrainState(params=np.linspace(-1, 1, 5), seed=3)
    a = spsa_step(start, _quadratic, cfg)
    b = spsa_step(start, _quadratic, cfg)
    np.testing.assert_array_equal(a.params, b.params)
    assert start.epoch == 0 and not start.history


def test_spsa_counts_actual_loss_calls():
    calls = []

    def counting(params):
        calls.append(params.copy())
        return _quadratic(params)

    state = TrainState(params=np.array([0.5, -0.5]))
    for step in range(1, 4):
        state = spsa_step(state, counting, TrainConfig())
        assert len(calls) == 2 * step
        assert state.loss_evaluations == len(calls)

    plus_calls, minus_calls = [], []
    state = spsa_step(
        TrainState(params=np.array([0.5, -0.5])),
        lambda p: plus_calls.append(p) or _quadratic(p),
        TrainConfig(),
        lambda p: minus_calls.append(p) or _quadratic(p),
    )
    assert len(plus_calls) == len(minus_calls) == 1
    assert state.loss_evaluations == 2
    np.testing.assert_allclose(plus_calls[0] + minus_calls[0], 2 * np.array([0.5, -0.5]))


def test_spsa_constant_loss_keeps_params():
    start = TrainState(params=np.linspace(-1, 1, 6), seed=4)
    state = start
    for _ in range(5):
        state = spsa_step(state, lambda p: 0.25, TrainConfig())
    np.testing.assert_array_equal(state.params, start.params)
    assert state.epoch == 5 and not any(r.skipped for r in state.history)


def test_spsa_skips_non_finite_loss():
    cfg = TrainConfig()
    state = TrainState(params=np.array([0.3, 0.4]))
    new = spsa_step(state, lambda p: float("nan"), cfg)
    np.testing.assert_array_equal(new.params, state.params)
    assert new.epoch == 1
    assert new.loss_evaluations == 2
    assert new.history[-1].skipped


def test_init_state_range():
    circuit = build_architecture("TTN")
    state = init_state(circuit, TrainConfig(seed=2))
    assert state.params.shape == (29,)
    assert np.all((state.params >= -np.pi) & (state.params < np.pi))
    np.testing.assert_array_equal(state.params, init_state(circuit, TrainConfig(seed=2)).params)


# =============================================================================
# Training loop
# =============================================================================


def test_short_training_run(shower_split, small_cfg):
    train_set, test_set = shower_split
    circuit = build_architecture("Linear")
    state = train(circuit, train_set, small_cfg)
    assert state.epoch == 4
    assert state.loss_evaluations == 8
    assert [r.epoch for r in state.history] == [0, 1, 2, 3]
    assert [r.batch_size for r in state.history] == [1, 1, 3, 3]
    assert all(np.isfinite(r.total) and r.w_corr == 0.0 for r in state.history)
    encoding = encoding_for(train_set, small_cfg)
    mse = final_mse(state.params, circuit, test_set, small_cfg, encoding)
    assert 0.0 <= mse < 0.36


def test_zero_epochs(shower_split):
    circuit = build_architecture("Linear")
    state = train(circuit, shower_split[0], TrainConfig(epochs=0))
    assert state.history == [] and state.epoch == 0


def test_train_checks_inputs(shower_split, small_cfg):
    train_set, _ = shower_split
    with pytest.raises(TrainingError):
        train(build_architecture("Linear", 4), train_set, small_cfg)
    circuit = build_architecture("Linear")
    with pytest.raises(TrainingError):
        train(circuit, train_set, small_cfg, state=TrainState(params=np.zeros(3), seed=7))
    with pytest.raises(TrainingError):
        train(circuit, train_set, small_cfg, state=TrainState(params=np.zeros(16), seed=8))


def test_resume_matches_uninterrupted(tmp_path, shower_split, small_cfg):
    train_set, _ = shower_split
    circuit = build_architecture("MERA-up")
    full = train(circuit, train_set, small_cfg)

    half_cfg = replace(small_cfg, epochs=2)
    half = train(circuit, train_set, half_cfg)
    path = save_checkpoint(half, tmp_path / "run" / "checkpoint.json", circuit, half_cfg, encoding_for(train_set, half_cfg))
    loaded = load_checkpoint(path, expected_hash=half_cfg.config_hash())
    assert loaded.architecture == "MERA-up" and loaded.state.epoch == 2

    resumed = train(circuit, train_set, small_cfg, state=loaded.state)
    np.testing.assert_array_equal(resumed.params, full.params)
    assert resumed.history == full.history
    assert resumed.loss_evaluations == full.loss_evaluations


def test_checkpoint_errors(tmp_path, small_cfg, shower_split):
    circuit = build_architecture("Linear")
    state = init_state(circuit, small_cfg)
    path = save_checkpoint(state, tmp_path / "ck.json", circuit, small_cfg, encoding_for(shower_split[0], small_cfg))
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_hash=TrainConfig().config_hash())
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"params": [0.1]}')
    with pytest.raises(CheckpointError):
        load_checkpoint(broken)


# =============================================================================
# Trials
# =============================================================================


def _result(seed, mse):
    return TrialResult(seed=seed, final_mse=mse, params=[], history=[])


def test_summarize_drops_extremes():
    results = [_result(s, m) for s, m in enumerate([5.0, 1.0, 2.0, 3.0, 100.0, 0.0, 4.0])]
    summary = summarize_trials(results, drop_extremes=2)
    assert sorted(summary.kept_seeds) == [2, 3, 6]
    assert summary.mean == pytest.approx(3.0)
    assert summary.std == pytest.approx(np.std([2.0, 3.0, 4.0]))
    with pytest.raises(TrainingError):
        summarize_trials(results[:4], drop_extremes=2)


def test_trial_seeds():
    seeds = trial_seeds(0, 6)
    assert seeds == trial_seeds(0, 6)
    assert len(set(seeds)) == 6
    assert trial_seeds(0, 3) == seeds[:3]


def test_repeat_trials_with_identical_seeds_has_zero_std(shower_split, small_cfg):
    train_set, test_set = shower_split
    circuit = build_architecture("Linear")
    summary = repeat_trials(circuit, train_set, test_set, small_cfg, n_trials=3, drop_extremes=0, seeds=[9, 9, 9])
    assert len({r.final_mse for r in summary.results}) == 1
    assert summary.std == pytest.approx(0.0, abs=1e-15)
    single = repeat_trials(circuit, train_set, test_set, small_cfg, n_trials=1, drop_extremes=0)
    assert single.std == 0.0
    assert single.mean == single.results[0].final_mse


# =============================================================================
# End-to-end
# =============================================================================


def test_default_mera_up_run_matches_headline_metrics():
    train_set, test_set = split(synth_generate(SynthParams(), seed=0), seed=0)
    circuit = build_architecture("MERA-up")
    passed = []
    for seed in trial_seeds(42, 3):
        cfg = TrainConfig(seed=seed)
        encoding = encoding_for(train_set, cfg)
        state = train(circuit, train_set, cfg, encoding)
        images = generate_images(circuit, state.params, encoding, test_set.n_samples, seed=[seed, 5])
        report = evaluate(images, test_set.samples)
        passed.append(
            report.shape_mse <= 5e-3
            and report.sign_agreement >= 0.85
            and abs(report.esum_mu_gen - report.esum_mu_ref) <= 0.05 * report.esum_mu_ref
            and abs(report.esum_sigma_gen - report.esum_sigma_ref) <= 0.3 * report.esum_sigma_ref
        )
    assert sum(passed) >= 2, passed
