"""
SPSA training of the trainable circuit.

Every source of randomness in an epoch (perturbation signs, latent draws,
shot sampling, reference minibatch) is derived from ``(seed, epoch)``. A run
resumed from a checkpoint therefore continues exactly like an uninterrupted
one, and the two loss evaluations of an epoch can share their latents and
shots (common random numbers).
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from qag.codec import EncodingConfig, generate_images
from qag.data import ShowerDataset
from qag.errors import CheckpointError, ConfigError, TrainingError
from qag.evaluation import shower_shape_mse
from qag.models import CircuitSpec
from qag.noise import NoiseModel
from qag.objectives import (
    DEFAULT_BANDWIDTHS,
    LossBreakdown,
    LossRecord,
    loss_weights,
    total_loss,
)
from qag.pool import run_jobs

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

# Stream ids mixed into the per-epoch seed entropy.
STREAM_INIT = 0
STREAM_PERTURB = 1
STREAM_PLUS = 2
STREAM_MINUS = 3
STREAM_REFERENCE = 4
STREAM_EVAL = 5


# =============================================================================
# Configuration and state
# =============================================================================


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    epochs: int = 500
    shots: int = 512
    lr_c0: float = 1.0
    lr_decay: float = 0.006
    lr_decay_start: int = 50
    perturbation_c: float = 0.1
    batch_size_initial: int = 1
    batch_size: int = 20
    batch_switch_epoch: int = 100
    corr_start_epoch: int = 100
    weight_rate: float = 0.001
    weight_absolute: bool = False
    common_random_numbers: bool = True
    # "minibatch": reference batch the size of the generated batch; "full": whole training set
    reference_mode: str = "minibatch"
    bandwidths: Tuple[float, ...] = DEFAULT_BANDWIDTHS
    init_low: float = -math.pi
    init_high: float = math.pi
    eval_images: int = 980
    seed: int = 0
    noise: Optional[NoiseModel] = None
    noise_schedule: Tuple[Tuple[int, NoiseModel], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))
        object.__setattr__(
            self, "noise_schedule", tuple(sorted(((int(e), m) for e, m in self.noise_schedule), key=lambda x: x[0]))
        )
        if self.epochs < 0:
            raise TrainingError(f"epochs must be >= 0, got {self.epochs}")
        if self.shots < 1:
            raise TrainingError(f"shots must be >= 1, got {self.shots}")
        if self.batch_size_initial < 1 or self.batch_size < 1:
            raise TrainingError("batch sizes must be >= 1")
        if self.perturbation_c <= 0:
            raise TrainingError(f"perturbation_c must be positive, got {self.perturbation_c}")
        if self.reference_mode not in ("minibatch", "full"):
            raise TrainingError(f"reference_mode must be 'minibatch' or 'full', got '{self.reference_mode}'")
        if self.seed < 0:
            raise TrainingError(f"seed must be >= 0, got {self.seed}")

    def lr(self, epoch: int) -> float:
        if epoch < self.lr_decay_start:
            return self.lr_c0
        return self.lr_c0 * math.exp(-self.lr_decay * (epoch - self.lr_decay_start))

    def batch_size_at(self, epoch: int) -> int:
        return self.batch_size_initial if epoch < self.batch_switch_epoch else self.batch_size

    def noise_at(self, epoch: int) -> Optional[NoiseModel]:
        active = self.noise
        for start, model in self.noise_schedule:
            if epoch >= start:
                active = model
        return active

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if name == "noise":
                value = value.to_dict() if value is not None else None
            elif name == "noise_schedule":
                value = [{"epoch": e, "model": m.to_dict()} for e, m in value]
            elif isinstance(value, tuple):
                value = list(value)
            out[name] = value
        return out

    def config_hash(self) -> str:
        """Hash of every setting except the epoch budget, so a resumed run may extend it."""
        settings = {k: v for k, v in self.to_dict().items() if k != "epochs"}
        payload = json.dumps(settings, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_mapping(cls, payload: dict, n_qubits: int = 8, base_dir: Optional[Path] = None) -> "TrainConfig":
        """Build from a config section; noise entries may be inline objects or file paths."""
        kwargs = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        if kwargs.get("noise") is not None:
            kwargs["noise"] = _noise_entry(kwargs["noise"], n_qubits, base_dir)
        schedule = []
        for entry in kwargs.get("noise_schedule") or ():
            if isinstance(entry, str):
                schedule.append(parse_noise_change(entry, n_qubits, base_dir))
            elif isinstance(entry, dict) and "epoch" in entry:
                model = entry.get("model", entry.get("file"))
                schedule.append((int(entry["epoch"]), _noise_entry(model, n_qubits, base_dir)))
            else:
                raise ConfigError(f"invalid noise_schedule entry: {entry!r}")
        kwargs["noise_schedule"] = tuple(schedule)
        if "bandwidths" in kwargs:
            kwargs["bandwidths"] = tuple(kwargs["bandwidths"])
        return cls(**kwargs)


def _noise_entry(entry, n_qubits: int, base_dir: Optional[Path]) -> NoiseModel:
    if isinstance(entry, NoiseModel):
        return entry
    if isinstance(entry, dict):
        return NoiseModel.from_mapping(entry, n_qubits)
    if isinstance(entry, (str, Path)):
        path = Path(entry)
        if not path.is_absolute() and base_dir is not None and not path.exists():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"noise model file not found: {entry}")
        return NoiseModel.from_json(path, n_qubits)
    raise ConfigError(f"invalid noise model entry: {entry!r}")


def parse_noise_change(text: str, n_qubits: int = 8, base_dir: Optional[Path] = None) -> Tuple[int, NoiseModel]:
    """Parse ``"EPOCH:FILE.json"`` into a noise schedule entry."""
    epoch, sep, path = str(text).partition(":")
    if not sep or not path:
        raise ConfigError(f"noise change must look like 'EPOCH:FILE.json', got '{text}'")
    try:
        start = int(epoch)
    except ValueError as exc:
        raise ConfigError(f"noise change epoch is not an integer: '{epoch}'") from exc
    if start < 0:
        raise ConfigError(f"noise change epoch must be >= 0, got {start}")
    return start, _noise_entry(path, n_qubits, base_dir)


@dataclass
class TrainState:
    params: np.ndarray = field(repr=False)
    epoch: int = 0
    history: List[LossRecord] = field(default_factory=list, repr=False)
    seed: int = 0
    loss_evaluations: int = 0

    def copy(self) -> "TrainState":
        return TrainState(self.params.copy(), self.epoch, list(self.history), self.seed, self.loss_evaluations)


def epoch_rng(seed: int, epoch: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, stream]))


def init_state(circuit: CircuitSpec, cfg: TrainConfig) -> TrainState:
    """Parameters drawn uniformly from [init_low, init_high)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, STREAM_INIT]))
    params = rng.uniform(cfg.init_low, cfg.init_high, size=circuit.n_params)
    return TrainState(params=params, epoch=0, seed=cfg.seed)


# =============================================================================
# SPSA
# =============================================================================


LossFn = Callable[[np.ndarray], Union[float, LossBreakdown]]


def _total(result) -> float:
    return float(result.total) if isinstance(result, LossBreakdown) else float(result)


def spsa_step(
    state: TrainState,
    loss_fn: LossFn,
    cfg: TrainConfig,
    loss_fn_minus: Optional[LossFn] = None,
    noise_label: str = "noiseless",
) -> TrainState:
    """One SPSA update with exactly two loss evaluations.

    ``loss_fn_minus`` evaluates the minus perturbation when the two sides must
    not share random numbers; otherwise ``loss_fn`` is used for both.
    """
    epoch = state.epoch
    rng = epoch_rng(state.seed, epoch, STREAM_PERTURB)
    delta = rng.choice(np.array([-1.0, 1.0]), size=state.params.shape[0])
    c = cfg.perturbation_c
    calls = 0

    def evaluate(fn: LossFn, params: np.ndarray):
        nonlocal calls
        calls += 1
        return fn(params)

    plus = evaluate(loss_fn, state.params + c * delta)
    minus = evaluate(loss_fn_minus or loss_fn, state.params - c * delta)
    l_plus, l_minus = _total(plus), _total(minus)

    new = state.copy()
    new.loss_evaluations += calls
    new.epoch = epoch + 1
    lr = cfg.lr(epoch)

    if isinstance(plus, LossBreakdown) and isinstance(minus, LossBreakdown):
        mmd = 0.5 * (plus.mmd + minus.mmd)
        corr = 0.5 * (plus.corr + minus.corr)
        w_mmd, w_corr = plus.weights.w_mmd, plus.weights.w_corr
        degenerate = len(set(plus.degenerate_pixels) | set(minus.degenerate_pixels))
    else:
        mmd, corr, w_mmd, w_corr, degenerate = 0.5 * (l_plus + l_minus), 0.0, 1.0, 0.0, 0

    record = LossRecord(
        epoch=epoch,
        mmd_unweighted=mmd,
        corr_unweighted=corr,
        w_mmd=w_mmd,
        w_corr=w_corr,
        total=0.5 * (l_plus + l_minus),
        lr=lr,
        batch_size=cfg.batch_size_at(epoch),
        noise_label=noise_label,
        degenerate_pixels=degenerate,
    )

    if not (math.isfinite(l_plus) and math.isfinite(l_minus)):
        logger.warning("Epoch %d: non-finite loss (%r, %r); parameters kept", epoch, l_plus, l_minus)
        record.skipped = True
        new.history.append(record)
        return new

    gradient = (l_plus - l_minus) / (2.0 * c * delta)
    new.params = state.params - lr * gradient
    new.history.append(record)
    return new


# =============================================================================
# Training loop
# =============================================================================


def encoding_for(dataset: ShowerDataset, cfg: TrainConfig, encoding: Optional[EncodingConfig] = None) -> EncodingConfig:
    if encoding is None:
        return EncodingConfig.for_dataset(dataset.pixel_std, shots=cfg.shots)
    return replace(encoding, shots=cfg.shots)


def epoch_loss_fns(
    circuit: CircuitSpec,
    dataset: ShowerDataset,
    cfg: TrainConfig,
    encoding: EncodingConfig,
    epoch: int,
) -> Tuple[LossFn, LossFn]:
    """Loss closures for the plus and minus evaluations of ``epoch``."""
    batch = cfg.batch_size_at(epoch)
    weights = loss_weights(epoch, cfg.corr_start_epoch, cfg.weight_rate, cfg.weight_absolute)
    noise = cfg.noise_at(epoch)
    if cfg.reference_mode == "full":
        reference = dataset.samples
    else:
        rng = epoch_rng(cfg.seed, epoch, STREAM_REFERENCE)
        index = rng.choice(dataset.n_samples, size=batch, replace=batch > dataset.n_samples)
        reference = dataset.samples[index]

    def make(stream: int) -> LossFn:
        entropy = [cfg.seed, epoch, stream]

        def loss_fn(params: np.ndarray) -> LossBreakdown:
            images = generate_images(circuit, params, encoding, batch, noise, seed=entropy)
            return total_loss(
                images, reference, weights,
                reference_corr=dataset.corr, bandwidths=cfg.bandwidths, scale=encoding.e_max,
            )

        return loss_fn

    plus = make(STREAM_PLUS)
    minus = plus if cfg.common_random_numbers else make(STREAM_MINUS)
    return plus, minus


def train(
    circuit: CircuitSpec,
    dataset: ShowerDataset,
    cfg: TrainConfig,
    encoding: Optional[EncodingConfig] = None,
    state: Optional[TrainState] = None,
    progress: bool = False,
    checkpoint_path: Optional[Path] = None,
    checkpoint_every: int = 0,
) -> TrainState:
    """Run epochs ``state.epoch .. cfg.epochs - 1``; a fresh state is initialised if none is given."""
    if dataset.n_pixels != circuit.n_qubits:
        raise TrainingError(f"dataset has {dataset.n_pixels} pixels, circuit has {circuit.n_qubits} qubits")
    encoding = encoding_for(dataset, cfg, encoding)
    if state is None:
        state = init_state(circuit, cfg)
    elif state.params.shape != (circuit.n_params,):
        raise TrainingError(f"state has {state.params.shape[0]} parameters, '{circuit.name}' needs {circuit.n_params}")
    elif state.seed != cfg.seed:
        raise TrainingError(f"state seed {state.seed} does not match config seed {cfg.seed}")

    active_label = None
    epochs = range(state.epoch, cfg.epochs)
    for epoch in tqdm(epochs, desc=f"train {circuit.name}", disable=not progress):
        noise = cfg.noise_at(epoch)
        label = noise.label if noise is not None else "noiseless"
        if label != active_label:
            if active_label is not None:
                logger.info("Epoch %d: noise model switched from '%s' to '%s'", epoch, active_label, label)
            active_label = label
        plus, minus = epoch_loss_fns(circuit, dataset, cfg, encoding, epoch)
        state = spsa_step(state, plus, cfg, minus, noise_label=label)
        if checkpoint_path and checkpoint_every and state.epoch % checkpoint_every == 0:
            save_checkpoint(state, checkpoint_path, circuit, cfg, encoding)

    if state.history:
        last = state.history[-1]
        logger.info(
            "Finished %s at epoch %d: mmd=%.5f corr=%.5f",
            circuit.name, state.epoch, last.mmd_unweighted, last.corr_unweighted,
        )
    return state


def final_mse(
    params: np.ndarray,
    circuit: CircuitSpec,
    test: ShowerDataset,
    cfg: TrainConfig,
    encoding: EncodingConfig,
    noise: Optional[NoiseModel] = None,
    n_images: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """Shower-shape MSE of freshly generated images against ``test``."""
    n_images = n_images or cfg.eval_images
    entropy = [cfg.seed if seed is None else seed, STREAM_EVAL]
    images = generate_images(circuit, params, replace(encoding, shots=cfg.shots), n_images, noise, seed=entropy)
    return shower_shape_mse(images, test.samples)


# =============================================================================
# Checkpoints
# =============================================================================


def save_checkpoint(
    state: TrainState,
    path: Union[str, Path],
    circuit: CircuitSpec,
    cfg: TrainConfig,
    encoding: EncodingConfig,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "architecture": circuit.name,
        "n_qubits": circuit.n_qubits,
        "params": [float(p) for p in state.params],
        "epoch": state.epoch,
        "rng_state": {"seed": state.seed, "epoch": state.epoch},
        "loss_evaluations": state.loss_evaluations,
        "history": [asdict(r) for r in state.history],
        "config_hash": cfg.config_hash(),
        "train_config": cfg.to_dict(),
        "encoding": encoding.to_dict(),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as f:
        json.dump(payload, f, indent=2)
    tmp.replace(path)
    logger.debug("Checkpoint written to %s at epoch %d", path, state.epoch)
    return path


@dataclass
class Checkpoint:
    state: TrainState
    architecture: str
    n_qubits: int
    config_hash: str
    encoding: EncodingConfig
    train_config: dict


def load_checkpoint(path: Union[str, Path], expected_hash: Optional[str] = None) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path) as f:
            payload = json.load(f)
        state = TrainState(
            params=np.array(payload["params"], dtype=np.float64),
            epoch=int(payload["epoch"]),
            seed=int(payload["rng_state"]["seed"]),
            loss_evaluations=int(payload.get("loss_evaluations", 0)),
            history=[LossRecord(**r) for r in payload.get("history", [])],
        )
        checkpoint = Checkpoint(
            state=state,
            architecture=payload["architecture"],
            n_qubits=int(payload["n_qubits"]),
            config_hash=payload["config_hash"],
            encoding=EncodingConfig.from_mapping(payload["encoding"]),
            train_config=payload.get("train_config", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from exc
    if expected_hash is not None and checkpoint.config_hash != expected_hash:
        raise CheckpointError(f"{path}: config hash {checkpoint.config_hash[:12]} does not match {expected_hash[:12]}")
    return checkpoint


# =============================================================================
# Repeated trials
# =============================================================================


def trial_seeds(base_seed: int, n: int) -> List[int]:
    """Independent 32-bit seeds for ``n`` trials."""
    children = np.random.SeedSequence(base_seed).spawn(n)
    return [int(child.generate_state(1)[0]) for child in children]


@dataclass
class TrialResult:
    seed: int
    final_mse: float
    params: List[float]
    history: List[LossRecord]


@dataclass
class TrialSummary:
    results: List[TrialResult]
    kept_seeds: List[int]
    mean: float
    std: float
    drop_extremes: int


@dataclass(frozen=True)
class _TrialJob:
    circuit: CircuitSpec
    train_set: ShowerDataset
    test_set: ShowerDataset
    cfg: TrainConfig
    encoding: Optional[EncodingConfig]
    noise_eval: Optional[NoiseModel]


def _run_trial(job: Tuple[_TrialJob, int]) -> TrialResult:
    spec, seed = job
    cfg = replace(spec.cfg, seed=seed)
    encoding = encoding_for(spec.train_set, cfg, spec.encoding)
    state = train(spec.circuit, spec.train_set, cfg, encoding)
    noise = spec.noise_eval if spec.noise_eval is not None else cfg.noise_at(cfg.epochs)
    mse = final_mse(state.params, spec.circuit, spec.test_set, cfg, encoding, noise)
    return TrialResult(seed, mse, state.params.tolist(), state.history)


def summarize_trials(results: Sequence[TrialResult], drop_extremes: int) -> TrialSummary:
    """Drop the ``drop_extremes`` best and worst trials, then mean and std (ddof=0)."""
    if len(results) <= 2 * drop_extremes:
        raise TrainingError(f"{len(results)} trials cannot drop {drop_extremes} extremes on each side")
    ranked = sorted(results, key=lambda r: r.final_mse)
    kept = ranked[drop_extremes : len(ranked) - drop_extremes]
    values = np.array([r.final_mse for r in kept])
    return TrialSummary(
        results=list(results),
        kept_seeds=[r.seed for r in kept],
        mean=float(values.mean()),
        std=float(values.std()),
        drop_extremes=drop_extremes,
    )


def repeat_trials(
    circuit: CircuitSpec,
    train_set: ShowerDataset,
    test_set: ShowerDataset,
    cfg: TrainConfig,
    n_trials: int,
    drop_extremes: int = 2,
    seeds: Optional[Sequence[int]] = None,
    encoding: Optional[EncodingConfig] = None,
    noise_eval: Optional[NoiseModel] = None,
    workers: int = 1,
    progress: bool = False,
) -> TrialSummary:
    """Train ``n_trials`` independent runs and summarise their final MSE."""
    if n_trials < 1 or n_trials <= 2 * drop_extremes:
        raise TrainingError(f"{n_trials} trials cannot drop {drop_extremes} extremes on each side")
    if seeds is None:
        seeds = trial_seeds(cfg.seed, n_trials)
    elif len(seeds) != n_trials:
        raise TrainingError(f"got {len(seeds)} seeds for {n_trials} trials")
    spec = _TrialJob(circuit, train_set, test_set, cfg, encoding, noise_eval)
    results = run_jobs(_run_trial, [(spec, int(s)) for s in seeds], workers, progress, desc=f"trials {circuit.name}")
    summary = summarize_trials(results, drop_extremes)
    logger.info(
        "%s: %d trials, MSE %.3g +/- %.3g over %d kept",
        circuit.name, n_trials, summary.mean, summary.std, len(summary.kept_seeds),
    )
    return summary
