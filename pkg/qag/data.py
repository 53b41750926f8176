"""
Shower datasets: CSV I/O, train/test splits and a synthetic generator.

A dataset is an (n_samples, n_pixels) matrix of energies in [0, e_max] with
its per-pixel mean, std (ddof=0) and Pearson correlation.

The synthetic generator draws

    x = m + kappa * diag(m) @ L @ z,    z ~ N(0, I),  L @ L.T = C

where m is a Gamma-shaped longitudinal profile normalised to the energy-sum
mean, C is the target correlation and kappa is chosen so the per-image sum
has the requested standard deviation.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from qag.errors import DatasetError
from qag.objectives import pearson_corr

logger = logging.getLogger(__name__)

DEFAULT_E_MAX = 0.6
DEFAULT_PIXELS = 8
TRAIN_SIZE = 1000
TEST_SIZE = 980


@dataclass
class ShowerDataset:
    samples: np.ndarray = field(repr=False)
    pixel_mean: np.ndarray = field(repr=False)
    pixel_std: np.ndarray = field(repr=False)
    corr: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)
    n_clamped: int = 0

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def from_samples(
        cls,
        samples,
        provenance: Optional[dict] = None,
        e_max: float = DEFAULT_E_MAX,
    ) -> "ShowerDataset":
        """Validate, clamp to [0, e_max] and compute statistics."""
        samples = np.array(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise DatasetError(f"samples must be a non-empty 2-D matrix, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DatasetError("samples contain non-finite values")
        outside = (samples < 0.0) | (samples > e_max)
        n_clamped = int(outside.sum())
        if n_clamped:
            logger.warning("Clamped %d energies to [0, %g]", n_clamped, e_max)
            samples = np.clip(samples, 0.0, e_max)
        if samples.shape[0] >= 2:
            corr = pearson_corr(samples)[0]
        else:
            corr = np.eye(samples.shape[1])
        return cls(
            samples=samples,
            pixel_mean=samples.mean(axis=0),
            pixel_std=samples.std(axis=0),
            corr=corr,
            provenance=dict(provenance or {}),
            n_clamped=n_clamped,
        )

    def subset(self, index: np.ndarray, tag: str) -> "ShowerDataset":
        provenance = dict(self.provenance, subset=tag)
        return ShowerDataset.from_samples(self.samples[index], provenance)

    def summary(self) -> dict:
        sums = self.samples.sum(axis=1)
        return {
            "n_samples": self.n_samples,
            "n_pixels": self.n_pixels,
            "pixel_mean": self.pixel_mean.tolist(),
            "pixel_std": self.pixel_std.tolist(),
            "esum_mu": float(sums.mean()),
            "esum_sigma": float(sums.std()),
            "provenance": self.provenance,
        }


# =============================================================================
# CSV I/O
# =============================================================================


def pixel_header(n_pixels: int) -> list:
    return [f"p{i}" for i in range(n_pixels)]


def load_dataset(
    path: Union[str, Path],
    n_pixels: int = DEFAULT_PIXELS,
    e_max: float = DEFAULT_E_MAX,
) -> ShowerDataset:
    """Read a CSV of ``n_pixels`` energy columns; a header row is optional."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    rows = []
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if line_no == 1 and not _is_numeric(row[0]):
                if len(row) != n_pixels:
                    raise DatasetError(f"{path}: header has {len(row)} columns, expected {n_pixels}")
                continue
            if len(row) != n_pixels:
                raise DatasetError(f"{path}:{line_no}: expected {n_pixels} columns, got {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise DatasetError(f"{path}:{line_no}: malformed row ({exc})") from exc
    if not rows:
        raise DatasetError(f"{path}: no samples")
    dataset = ShowerDataset.from_samples(np.array(rows), {"source": "file", "path": str(path)}, e_max)
    logger.info("Loaded %d samples from %s", dataset.n_samples, path)
    return dataset


def _is_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def save_dataset(dataset: Union[ShowerDataset, np.ndarray], path: Union[str, Path]) -> Path:
    """Write samples as CSV with a ``p0..p{d-1}`` header and repr-precision floats."""
    samples = dataset.samples if isinstance(dataset, ShowerDataset) else np.asarray(dataset)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(pixel_header(samples.shape[1]))
        for row in samples:
            writer.writerow([repr(float(v)) for v in row])
    return path


def split(
    dataset: ShowerDataset,
    train_n: int = TRAIN_SIZE,
    test_n: int = TEST_SIZE,
    seed: int = 0,
) -> Tuple[ShowerDataset, ShowerDataset]:
    """Disjoint shuffled train/test subsets."""
    if train_n < 1 or test_n < 1:
        raise DatasetError(f"split sizes must be >= 1, got ({train_n}, {test_n})")
    if train_n + test_n > dataset.n_samples:
        raise DatasetError(
            f"cannot split {dataset.n_samples} samples into {train_n} train + {test_n} test"
        )
    order = np.random.default_rng(seed).permutation(dataset.n_samples)
    return (
        dataset.subset(order[:train_n], "train"),
        dataset.subset(order[train_n : train_n + test_n], "test"),
    )


# =============================================================================
# Synthetic generator
# =============================================================================


@dataclass(frozen=True)
class SynthParams:
    """Parameters of the synthetic shower generator."""

    n_samples: int = 2000
    n_pixels: int = DEFAULT_PIXELS
    # Gamma profile z**(shape-1) * exp(-z / scale) at pixel centres z = i + 0.5
    profile_shape: float = 3.0
    profile_scale: float = 1.2
    esum_mu: float = 1.6
    esum_sigma: float = 0.12
    # One-factor correlation: C = l l^T with unit diagonal
    corr_loadings: Tuple[float, ...] = (0.7, 0.7, 0.7, 0.7, 0.7, -0.5, -0.5, -0.5)
    target_corr: Optional[Tuple[Tuple[float, ...], ...]] = None
    e_max: float = DEFAULT_E_MAX

    def __post_init__(self):
        object.__setattr__(self, "corr_loadings", tuple(float(x) for x in self.corr_loadings))
        if self.target_corr is not None:
            object.__setattr__(self, "target_corr", tuple(tuple(float(x) for x in row) for row in self.target_corr))
        if self.n_samples < 1 or self.n_pixels < 1:
            raise DatasetError("n_samples and n_pixels must be >= 1")
        if self.profile_shape <= 0 or self.profile_scale <= 0:
            raise DatasetError("profile shape and scale must be positive")
        if self.esum_mu <= 0 or self.esum_sigma < 0:
            raise DatasetError(f"invalid energy sum ({self.esum_mu}, {self.esum_sigma})")
        if self.target_corr is None and len(self.corr_loadings) != self.n_pixels:
            raise DatasetError(f"need {self.n_pixels} correlation loadings, got {len(self.corr_loadings)}")
        if any(abs(x) > 1 for x in self.corr_loadings):
            raise DatasetError("correlation loadings must lie in [-1, 1]")

    def correlation(self) -> np.ndarray:
        if self.target_corr is not None:
            corr = np.array(self.target_corr, dtype=np.float64)
            if corr.shape != (self.n_pixels, self.n_pixels):
                raise DatasetError(f"target_corr must be {self.n_pixels}x{self.n_pixels}, got {corr.shape}")
            return corr
        loadings = np.array(self.corr_loadings)
        corr = np.outer(loadings, loadings)
        np.fill_diagonal(corr, 1.0)
        return corr

    def profile(self) -> np.ndarray:
        z = np.arange(self.n_pixels) + 0.5
        shape = z ** (self.profile_shape - 1.0) * np.exp(-z / self.profile_scale)
        return shape / shape.sum()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, payload: dict) -> "SynthParams":
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def _factor(corr: np.ndarray) -> np.ndarray:
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise DatasetError("target correlation is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise DatasetError("target correlation must have a unit diagonal")
    eigvals, eigvecs = np.linalg.eigh(corr)
    if eigvals.min() < -1e-10:
        raise DatasetError(f"target correlation is not positive semidefinite (min eigenvalue {eigvals.min():.3g})")
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def analytic_moments(params: SynthParams) -> dict:
    """Closed-form per-pixel moments and energy-sum moments before clamping."""
    mean = params.esum_mu * params.profile()
    corr = params.correlation()
    spread = float(np.sqrt(mean @ corr @ mean))
    kappa = params.esum_sigma / spread if spread > 0 else 0.0
    return {
        "pixel_mean": mean,
        "pixel_std": kappa * mean,
        "kappa": kappa,
        "esum_mu": float(mean.sum()),
        "esum_sigma": params.esum_sigma,
    }


def synth_generate(params: SynthParams, seed: int = 0) -> ShowerDataset:
    """Draw a synthetic dataset; values outside [0, e_max] are clamped."""
    corr = params.correlation()
    factor = _factor(corr)
    moments = analytic_moments(params)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((params.n_samples, params.n_pixels))
    mean = moments["pixel_mean"]
    samples = mean + moments["kappa"] * mean * (z @ factor.T)
    provenance = {"source": "synthetic", "seed": seed, "params": params.to_dict()}
    dataset = ShowerDataset.from_samples(samples, provenance, params.e_max)
    logger.info(
        "Generated %d synthetic showers (esum mu=%.3f sigma=%.3f)",
        params.n_samples, params.esum_mu, params.esum_sigma,
    )
    return dataset
