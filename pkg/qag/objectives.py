"""
Training objectives: kernel MMD, correlation-matrix MSE and the loss-weight
schedule that hands over from the first to the second after epoch 100.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from qag.errors import LossError

logger = logging.getLogger(__name__)

DEFAULT_BANDWIDTHS = (0.01, 0.1, 0.5, 1.0)
CORR_START_EPOCH = 100
WEIGHT_DECAY_RATE = 0.001

# Pixels whose sample std falls below this are treated as constant.
ZERO_VARIANCE_TOL = 1e-12


@dataclass(frozen=True)
class LossWeights:
    w_mmd: float
    w_corr: float
    epoch: int


def loss_weights(
    epoch: int,
    start: int = CORR_START_EPOCH,
    rate: float = WEIGHT_DECAY_RATE,
    absolute: bool = False,
) -> LossWeights:
    """Weights for ``epoch``: MMD only before ``start``, then a linear handover.

    With ``absolute`` the decay is counted from epoch 0 instead of ``start``.
    """
    if epoch < 0:
        raise LossError(f"epoch must be >= 0, got {epoch}")
    if epoch < start:
        return LossWeights(1.0, 0.0, epoch)
    elapsed = epoch if absolute else epoch - start
    w_mmd = max(0.0, 1.0 - rate * elapsed)
    return LossWeights(w_mmd, 1.0 - w_mmd, epoch)


@dataclass
class LossRecord:
    """One row of the loss history (unweighted components plus weights)."""

    epoch: int
    mmd_unweighted: float
    corr_unweighted: float
    w_mmd: float
    w_corr: float
    total: float
    lr: float = 0.0
    batch_size: int = 0
    noise_label: str = "noiseless"
    skipped: bool = False
    degenerate_pixels: int = 0


def _as_batch(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] == 0:
        raise LossError(f"{name} must be a non-empty (samples, pixels) batch, got shape {x.shape}")
    return x


def mmd_loss(
    generated,
    reference,
    bandwidths: Sequence[float] = DEFAULT_BANDWIDTHS,
    scale: float = 0.6,
) -> float:
    """Squared MMD (biased V-statistic) under a Gaussian kernel mixture.

    Energies are divided by ``scale`` before the kernel is applied.
    """
    x = _as_batch(generated, "generated") / scale
    y = _as_batch(reference, "reference") / scale
    if x.shape[1] != y.shape[1]:
        raise LossError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]} pixels")

    def kernel_mean(a, b):
        d2 = cdist(a, b, "sqeuclidean")
        return sum(np.mean(np.exp(-d2 / (2.0 * s**2))) for s in bandwidths)

    value = kernel_mean(x, x) + kernel_mean(y, y) - 2.0 * kernel_mean(x, y)
    return max(float(value), 0.0)


def pearson_corr(batch) -> Tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of the pixel columns.

    Returns ``(corr, degenerate)``; a constant pixel gets zero off-diagonal
    entries, a unit diagonal entry and ``degenerate[i] = True``.
    """
    x = _as_batch(batch, "batch")
    if x.shape[0] < 2:
        raise LossError(f"correlation needs at least 2 samples, got {x.shape[0]}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    degenerate = sd < ZERO_VARIANCE_TOL
    safe = np.where(degenerate, 1.0, sd)
    corr = cov / np.outer(safe, safe)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr, degenerate


def _corr_loss(generated, reference_corr) -> Tuple[float, np.ndarray]:
    corr, degenerate = pearson_corr(generated)
    reference_corr = np.asarray(reference_corr, dtype=np.float64)
    if reference_corr.shape != corr.shape:
        raise LossError(f"reference correlation has shape {reference_corr.shape}, expected {corr.shape}")
    if degenerate.any():
        logger.warning("Zero-variance pixels in generated batch: %s", np.flatnonzero(degenerate).tolist())
    return float(np.mean((corr - reference_corr) ** 2)), degenerate


def corr_loss(generated, reference_corr) -> float:
    """MSE over all d*d entries between batch correlation and ``reference_corr``."""
    return _corr_loss(generated, reference_corr)[0]


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    mmd: float
    corr: float
    weights: LossWeights
    degenerate_pixels: Tuple[int, ...] = ()


def total_loss(
    generated,
    reference,
    weights: LossWeights,
    reference_corr: Optional[np.ndarray] = None,
    bandwidths: Sequence[float] = DEFAULT_BANDWIDTHS,
    scale: float = 0.6,
) -> LossBreakdown:
    """Weighted sum ``w_mmd * MMD + w_corr * Corr`` with unweighted components.

    The correlation term is skipped (reported as 0) while ``w_corr`` is 0.
    """
    if weights.w_mmd < 0 or weights.w_corr < 0:
        raise LossError(f"loss weights must be >= 0, got {weights}")
    mmd = mmd_loss(generated, reference, bandwidths, scale)
    corr, degenerate = 0.0, ()
    if weights.w_corr > 0:
        if reference_corr is None:
            reference_corr = pearson_corr(reference)[0]
        corr, mask = _corr_loss(generated, reference_corr)
        degenerate = tuple(int(i) for i in np.flatnonzero(mask))
    total = weights.w_mmd * mmd + weights.w_corr * corr
    return LossBreakdown(total, mmd, corr, weights, degenerate)


def aggregate_histories(histories: Sequence[Sequence[LossRecord]]) -> List[Dict[str, float]]:
    """Per-epoch mean and std (ddof=0) of the unweighted losses across runs.

    Runs of different length are aggregated over the epochs they share.
    """
    if not histories:
        return []
    n_epochs = min(len(h) for h in histories)
    rows = []
    for e in range(n_epochs):
        records = [h[e] for h in histories]
        mmd = np.array([r.mmd_unweighted for r in records])
        corr = np.array([r.corr_unweighted for r in records])
        total = np.array([r.total for r in records])
        rows.append(
            {
                "epoch": records[0].epoch,
                "mmd_mean": float(mmd.mean()),
                "mmd_std": float(mmd.std()),
                "corr_mean": float(corr.mean()),
                "corr_std": float(corr.std()),
                "total_mean": float(total.mean()),
                "total_std": float(total.std()),
                "n_runs": len(records),
            }
        )
    return rows
