"""
Angle encoding: latent state preparation and decoding of per-qubit counts.

Each pixel owns one qubit. Preparation puts every qubit in |+> with H and
then rotates it by a latent angle omega_i = u_i * s * pixel_std_i * g, where
u_i is uniform in [-1, 1], g is one scalar per image and s is the latent scale
(radians per energy unit). By default s makes the rms of omega_i equal the
angle spread that pixel_std_i maps to under the decoder. After the trainable
circuit the |0> count c0 of qubit i is decoded as

    I = 2 * c0 / shots - 1
    theta = arcsin(I)
    E = e_max / (2 * theta_max) * (theta + theta_max)

so c0 = 0 maps to E = 0 and c0 = shots maps to E = e_max.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from qag.errors import EncodingError
from qag.models import H, RY, CircuitSpec, Gate, StateVector
from qag.noise import NoiseModel
from qag.simulator import bind, evolve_batch, sample_counts_batch

logger = logging.getLogger(__name__)

MAX_SHOTS = 100_000

SeedEntropy = Union[int, Sequence[int]]

LATENT_STREAM = 0
SHOT_STREAM = 1


@dataclass(frozen=True)
class EncodingConfig:
    """Encoding/decoding constants shared by generation and training."""

    n_pixels: int
    pixel_std: Tuple[float, ...]
    global_factor_range: Tuple[float, float] = (-0.25, 0.25)
    e_min: float = 0.0
    e_max: float = 0.6
    theta_max: float = float(np.pi / 2)
    shots: int = 512
    # Radians per energy unit applied to pixel_std; None picks the default scale.
    latent_scale: Optional[float] = None
    # Test hook: False drops the H gates so a qubit only sees Ry(omega).
    apply_hadamard: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pixel_std", tuple(float(s) for s in self.pixel_std))
        object.__setattr__(self, "global_factor_range", tuple(float(x) for x in self.global_factor_range))
        if self.latent_scale is None:
            object.__setattr__(self, "latent_scale", self.default_latent_scale())
        object.__setattr__(self, "latent_scale", float(self.latent_scale))
        if not np.isfinite(self.latent_scale) or self.latent_scale < 0:
            raise EncodingError(f"latent_scale must be finite and >= 0, got {self.latent_scale}")
        if self.n_pixels < 1:
            raise EncodingError(f"n_pixels must be >= 1, got {self.n_pixels}")
        if len(self.pixel_std) != self.n_pixels:
            raise EncodingError(f"pixel_std has {len(self.pixel_std)} entries for {self.n_pixels} pixels")
        if any(not np.isfinite(s) or s < 0 for s in self.pixel_std):
            raise EncodingError(f"pixel_std must be finite and >= 0, got {self.pixel_std}")
        low, high = self.global_factor_range
        if low > high:
            raise EncodingError(f"global_factor_range is empty: {self.global_factor_range}")
        if self.e_min != 0.0:
            raise EncodingError(f"the decoder assumes e_min = 0, got {self.e_min}")
        if self.e_max <= 0 or self.theta_max <= 0:
            raise EncodingError("e_max and theta_max must be positive")
        if not 1 <= self.shots <= MAX_SHOTS:
            raise EncodingError(f"shots must be in [1, {MAX_SHOTS}], got {self.shots}")

    def default_latent_scale(self) -> float:
        """Scale at which rms(omega_i) equals pixel_std_i * 2 * theta_max / e_max."""
        low, high = self.global_factor_range
        # E[u^2] = 1/3 for u ~ U(-1, 1); E[g^2] for g ~ U(low, high)
        rms = np.sqrt((low * low + low * high + high * high) / 3.0 / 3.0)
        if rms <= 0.0 or self.e_max <= 0.0:
            return 1.0
        return float(2.0 * self.theta_max / self.e_max / rms)

    @classmethod
    def for_dataset(cls, pixel_std: Sequence[float], **overrides) -> "EncodingConfig":
        return cls(n_pixels=len(pixel_std), pixel_std=tuple(pixel_std), **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, payload: dict) -> "EncodingConfig":
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class LatentDraw:
    omega: np.ndarray = field(repr=False)
    global_factor: float


def image_rng(seed: SeedEntropy, index: int, stream: int) -> np.random.Generator:
    """Independent generator for one image and one purpose (latents or shots)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, stream)))


def draw_latent(cfg: EncodingConfig, rng: np.random.Generator) -> LatentDraw:
    u = rng.uniform(-1.0, 1.0, size=cfg.n_pixels)
    g = rng.uniform(*cfg.global_factor_range)
    return LatentDraw(omega=u * cfg.latent_scale * np.asarray(cfg.pixel_std) * g, global_factor=float(g))


def prepare_state_circuit(draw: LatentDraw, apply_hadamard: bool = True) -> List[Gate]:
    """H then Ry(omega_i) on every qubit."""
    omega = np.asarray(draw.omega, dtype=np.float64)
    if not np.all(np.isfinite(omega)):
        raise EncodingError("latent angles must be finite")
    gates = []
    for q, angle in enumerate(omega):
        if apply_hadamard:
            gates.append(H(q))
        gates.append(RY(q, angle=float(angle)))
    return gates


def _preparation_template(n_qubits: int, apply_hadamard: bool) -> List[Gate]:
    gates = []
    for q in range(n_qubits):
        if apply_hadamard:
            gates.append(H(q))
        gates.append(RY(q, slot=q))
    return gates


def decode_angles(counts0: np.ndarray, shots: int) -> np.ndarray:
    """Per-qubit angle theta = arcsin(2 * c0 / shots - 1)."""
    if shots < 1:
        raise EncodingError(f"shots must be >= 1, got {shots}")
    counts0 = np.asarray(counts0)
    if np.any(counts0 < 0) or np.any(counts0 > shots):
        raise EncodingError(f"counts must lie in [0, {shots}]")
    intersection = np.clip(2.0 * counts0 / shots - 1.0, -1.0, 1.0)
    return np.arcsin(intersection)


def decode_counts(counts0: np.ndarray, shots: int, cfg: EncodingConfig) -> np.ndarray:
    """Map per-qubit |0> counts to pixel energies in [0, e_max]."""
    theta = decode_angles(counts0, shots)
    energies = cfg.e_max / (2.0 * cfg.theta_max) * (theta + cfg.theta_max)
    return np.clip(energies, cfg.e_min, cfg.e_max)


def energies_to_angles(energies: np.ndarray, cfg: EncodingConfig) -> np.ndarray:
    return np.asarray(energies) * (2.0 * cfg.theta_max) / cfg.e_max - cfg.theta_max


def draw_latents(cfg: EncodingConfig, n_images: int, seed: SeedEntropy, start_index: int = 0) -> np.ndarray:
    return np.stack(
        [
            draw_latent(cfg, image_rng(seed, start_index + i, LATENT_STREAM)).omega
            for i in range(n_images)
        ]
    )


def generate_counts(
    circuit: CircuitSpec,
    params: Sequence[float],
    cfg: EncodingConfig,
    n_images: int,
    noise: Optional[NoiseModel] = None,
    seed: SeedEntropy = 0,
    latents: Optional[np.ndarray] = None,
    start_index: int = 0,
) -> np.ndarray:
    """Per-image, per-qubit |0> counts, shape (n_images, n_pixels)."""
    if n_images < 1:
        raise EncodingError(f"n_images must be >= 1, got {n_images}")
    if circuit.n_qubits != cfg.n_pixels:
        raise EncodingError(f"circuit has {circuit.n_qubits} qubits for {cfg.n_pixels} pixels")
    if latents is None:
        latents = draw_latents(cfg, n_images, seed, start_index)
    latents = np.asarray(latents, dtype=np.float64)
    if latents.shape != (n_images, cfg.n_pixels):
        raise EncodingError(f"latents must have shape ({n_images}, {cfg.n_pixels}), got {latents.shape}")
    if not np.all(np.isfinite(latents)):
        raise EncodingError("latent angles must be finite")

    n = cfg.n_pixels
    zero = np.repeat(StateVector.zero(n).amplitudes[None, :], n_images, axis=0)
    prepared = evolve_batch(zero, _preparation_template(n, cfg.apply_hadamard), n, params=latents)
    shot_rngs = [image_rng(seed, start_index + i, SHOT_STREAM) for i in range(n_images)]
    return sample_counts_batch(prepared, cfg.shots, noise, bind(circuit, params), shot_rngs, n)


def generate_images(
    circuit: CircuitSpec,
    params: Sequence[float],
    cfg: EncodingConfig,
    n_images: int,
    noise: Optional[NoiseModel] = None,
    seed: SeedEntropy = 0,
    latents: Optional[np.ndarray] = None,
    start_index: int = 0,
) -> np.ndarray:
    """Sample ``n_images`` energy vectors: prepare, run, measure, decode.

    Image ``i`` draws its latents and its shots from generators seeded by
    ``(seed, start_index + i)``, so a batch is reproducible image by image.
    """
    counts = generate_counts(circuit, params, cfg, n_images, noise, seed, latents, start_index)
    return decode_counts(counts, cfg.shots, cfg)
