"""
Noise sweeps.

Inference mode generates small image batches from one trained parameter
vector under increasing noise. Training mode trains fresh models under each
noise model and scores them under the same noise. Configuration curves are
indexed by their swept error rate (`level`); every point is also placed at
x = mean(mean readout error, mean CX error over the circuit's CX gates)
in `noise_level`, the only position a device snapshot has.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qag.codec import EncodingConfig, generate_images
from qag.data import ShowerDataset
from qag.errors import ConfigError
from qag.evaluation import shower_shape_mse
from qag.models import CircuitSpec
from qag.noise import NoiseModel, noise_level, sweep_model
from qag.pool import run_jobs
from qag.trainer import TrainConfig, encoding_for, final_mse, train, trial_seeds

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.0, 0.005, 0.01, 0.015, 0.02, 0.03, 0.05, 0.08, 0.10, 0.15)
DEFAULT_CONFIGS = ("readout", "cnot", "combined")
MODES = ("inference", "training")

STREAM_SWEEP = 7


@dataclass(frozen=True)
class SweepConfig:
    mode: str = "inference"
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    configs: Tuple[str, ...] = DEFAULT_CONFIGS
    files: Tuple[str, ...] = ()
    n_images: int = 20
    repeats: int = 10
    trials: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        object.__setattr__(self, "configs", tuple(self.configs))
        object.__setattr__(self, "files", tuple(str(f) for f in self.files))
        if self.mode not in MODES:
            raise ConfigError(f"sweep mode must be one of {MODES}, got '{self.mode}'")
        for config in self.configs:
            if config not in DEFAULT_CONFIGS:
                raise ConfigError(f"unknown sweep configuration '{config}'")
        if any(not 0.0 <= x <= 1.0 for x in self.levels):
            raise ConfigError(f"noise levels must lie in [0, 1], got {self.levels}")
        if self.n_images < 1 or self.repeats < 1 or self.trials < 1:
            raise ConfigError("n_images, repeats and trials must be >= 1")

    @classmethod
    def from_mapping(cls, payload: dict) -> "SweepConfig":
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class SweepPoint:
    mode: str
    config: str
    noise_label: str
    level: float
    noise_level: float
    mse_mean: float
    mse_std: float
    n_runs: int
    mse_values: List[float] = field(default_factory=list)

    def row(self) -> dict:
        out = asdict(self)
        out.pop("mse_values")
        return out


def sweep_models(
    cfg: SweepConfig, n_qubits: int, base_dir: Optional[Path] = None
) -> List[Tuple[str, NoiseModel]]:
    """(config name, model) for every sweep point, in output order."""
    points = [(config, sweep_model(config, level, n_qubits)) for config in cfg.configs for level in cfg.levels]
    for entry in cfg.files:
        path = Path(entry)
        if not path.exists() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"noise model file not found: {entry}")
        points.append(("from-file", NoiseModel.from_json(path, n_qubits)))
    return points


@dataclass(frozen=True)
class _InferenceJob:
    circuit: CircuitSpec
    params: Tuple[float, ...]
    encoding: EncodingConfig
    test_set: ShowerDataset
    noise: NoiseModel
    n_images: int
    seed: int
    repeat: int


def _inference_job(job: _InferenceJob) -> float:
    # The seed does not depend on the noise model, so points share latents and shots.
    images = generate_images(
        job.circuit, np.array(job.params), job.encoding, job.n_images, job.noise,
        seed=[job.seed, STREAM_SWEEP, job.repeat],
    )
    return shower_shape_mse(images, job.test_set.samples)


@dataclass(frozen=True)
class _TrainingJob:
    circuit: CircuitSpec
    train_set: ShowerDataset
    test_set: ShowerDataset
    cfg: TrainConfig
    encoding: Optional[EncodingConfig]


def _training_job(job: _TrainingJob) -> float:
    encoding = encoding_for(job.train_set, job.cfg, job.encoding)
    state = train(job.circuit, job.train_set, job.cfg, encoding)
    return final_mse(state.params, job.circuit, job.test_set, job.cfg, encoding, job.cfg.noise)


def configured_level(config: str, model: NoiseModel, circuit: CircuitSpec) -> float:
    """Swept error rate of a configuration point; snapshots fall back to their placement."""
    if config in ("readout", "combined"):
        return model.readout_error[0]
    if config in ("cnot", "cx"):
        return model.cx_default
    return noise_level(model, circuit.gates)


def _collect(
    cfg: SweepConfig, circuit: CircuitSpec, models: List[Tuple[str, NoiseModel]], values: List[float], per_point: int
) -> List[SweepPoint]:
    points = []
    for i, (config, model) in enumerate(models):
        chunk = np.array(values[i * per_point : (i + 1) * per_point])
        point = SweepPoint(
            mode=cfg.mode,
            config=config,
            noise_label=model.label,
            level=configured_level(config, model, circuit),
            noise_level=noise_level(model, circuit.gates),
            mse_mean=float(chunk.mean()),
            mse_std=float(chunk.std()),
            n_runs=per_point,
            mse_values=chunk.tolist(),
        )
        logger.info(
            "%s %-9s level=%.4f x=%.4f MSE=%.3g +/- %.3g",
            cfg.mode, config, point.level, point.noise_level, point.mse_mean, point.mse_std,
        )
        points.append(point)
    return points


def inference_sweep(
    circuit: CircuitSpec,
    params: Sequence[float],
    encoding: EncodingConfig,
    test_set: ShowerDataset,
    cfg: SweepConfig,
    base_dir: Optional[Path] = None,
    progress: bool = False,
) -> List[SweepPoint]:
    """Score one trained parameter vector under every sweep noise model."""
    models = sweep_models(cfg, circuit.n_qubits, base_dir)
    jobs = [
        _InferenceJob(circuit, tuple(float(p) for p in params), encoding, test_set, model, cfg.n_images, cfg.seed, r)
        for _, model in models
        for r in range(cfg.repeats)
    ]
    values = run_jobs(_inference_job, jobs, cfg.workers, progress, desc="inference sweep")
    return _collect(cfg, circuit, models, values, cfg.repeats)


def training_sweep(
    circuit: CircuitSpec,
    train_set: ShowerDataset,
    test_set: ShowerDataset,
    train_cfg: TrainConfig,
    cfg: SweepConfig,
    encoding: Optional[EncodingConfig] = None,
    base_dir: Optional[Path] = None,
    progress: bool = False,
) -> List[SweepPoint]:
    """Train ``cfg.trials`` models per noise model; trial seeds are shared across points."""
    models = sweep_models(cfg, circuit.n_qubits, base_dir)
    seeds = trial_seeds(cfg.seed, cfg.trials)
    jobs = [
        _TrainingJob(circuit, train_set, test_set, replace(train_cfg, noise=model, seed=seed), encoding)
        for _, model in models
        for seed in seeds
    ]
    values = run_jobs(_training_job, jobs, cfg.workers, progress, desc="training sweep")
    return _collect(cfg, circuit, models, values, cfg.trials)
