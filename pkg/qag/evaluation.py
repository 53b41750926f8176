"""
Physics accuracy metrics comparing generated showers with reference showers.

    1. shower shape      MSE of per-pixel mean energies
    2. correlations      Pearson matrices, their MSE and sign agreement
    3. energy sum        mean/std and histogram of per-image totals
    4. shower modes      k-means centroids, paired by Hungarian assignment
    5. pixel spectra     per-pixel histograms and their intersection
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from qag.errors import EvaluationError, LossError
from qag.objectives import pearson_corr

logger = logging.getLogger(__name__)

N_CLUSTERS = 4
N_BINS = 25


def _batch(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EvaluationError(f"{name} must be a non-empty (samples, pixels) batch, got shape {x.shape}")
    return x


def _pair(gen, ref) -> Tuple[np.ndarray, np.ndarray]:
    gen, ref = _batch(gen, "generated"), _batch(ref, "reference")
    if gen.shape[1] != ref.shape[1]:
        raise EvaluationError(f"pixel dimension mismatch: {gen.shape[1]} vs {ref.shape[1]}")
    return gen, ref


# =============================================================================
# Metrics
# =============================================================================


def shower_shape_mse(gen, ref) -> float:
    gen, ref = _pair(gen, ref)
    return float(np.mean((gen.mean(axis=0) - ref.mean(axis=0)) ** 2))


@dataclass
class CorrelationResult:
    corr_gen: np.ndarray
    corr_ref: np.ndarray
    corr_mse: float
    sign_agreement: float
    degenerate_gen: List[int] = field(default_factory=list)
    degenerate_ref: List[int] = field(default_factory=list)


def correlation_metric(gen, ref) -> CorrelationResult:
    gen, ref = _pair(gen, ref)
    try:
        corr_gen, flags_gen = pearson_corr(gen)
        corr_ref, flags_ref = pearson_corr(ref)
    except LossError as exc:
        raise EvaluationError(str(exc)) from exc
    if flags_gen.any() or flags_ref.any():
        logger.warning(
            "Zero-variance pixels (generated %s, reference %s); their correlations are set to 0",
            np.flatnonzero(flags_gen).tolist(), np.flatnonzero(flags_ref).tolist(),
        )
    return CorrelationResult(
        corr_gen=corr_gen,
        corr_ref=corr_ref,
        corr_mse=float(np.mean((corr_gen - corr_ref) ** 2)),
        sign_agreement=float(np.mean(np.sign(corr_gen) == np.sign(corr_ref))),
        degenerate_gen=np.flatnonzero(flags_gen).tolist(),
        degenerate_ref=np.flatnonzero(flags_ref).tolist(),
    )


@dataclass
class EnergySumStats:
    mu: float
    sigma: float
    bin_edges: np.ndarray
    counts: np.ndarray


def energy_sum_stats(batch, bins: int = N_BINS, e_max: float = 0.6) -> EnergySumStats:
    """Mean, std (ddof=0) and histogram over [0, d * e_max] of image totals."""
    batch = _batch(batch, "batch")
    sums = batch.sum(axis=1)
    counts, edges = np.histogram(sums, bins=bins, range=(0.0, batch.shape[1] * e_max))
    return EnergySumStats(float(sums.mean()), float(sums.std()), edges, counts)


@dataclass
class ClusterResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float


def kmeans_inertia(batch: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared distances to the nearest centroid."""
    return float(np.sum(np.min(cdist(batch, centroids, "sqeuclidean"), axis=1)))


def kmeans_modes(batch, k: int = N_CLUSTERS, seed: int = 0, iterations: int = 50) -> ClusterResult:
    """k-means++ seeded Lloyd iterations; centroids sorted by descending first pixel."""
    batch = _batch(batch, "batch")
    if batch.shape[0] < k:
        raise EvaluationError(f"k-means with k={k} needs at least {k} samples, got {batch.shape[0]}")
    n_distinct = np.unique(batch, axis=0).shape[0]
    if n_distinct < k:
        raise EvaluationError(f"only {n_distinct} distinct samples for k={k} clusters")
    centroids, _ = kmeans2(batch, k, iter=iterations, minit="++", seed=seed, missing="warn")
    order = np.argsort(-centroids[:, 0], kind="stable")
    centroids = centroids[order]
    labels = np.argmin(cdist(batch, centroids, "sqeuclidean"), axis=1)
    return ClusterResult(centroids, labels, kmeans_inertia(batch, centroids))


def pair_clusters(gen_centroids, ref_centroids) -> Tuple[np.ndarray, np.ndarray]:
    """Match each generated centroid to a reference centroid.

    Returns ``(assignment, distances)`` where generated centroid ``i`` pairs
    with reference centroid ``assignment[i]`` at Euclidean ``distances[i]``.
    """
    cost = cdist(np.asarray(gen_centroids), np.asarray(ref_centroids))
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(len(rows), dtype=int)
    assignment[rows] = cols
    return assignment, cost[rows, cols][np.argsort(rows)]


@dataclass
class PixelHistograms:
    bin_edges: np.ndarray
    gen_counts: np.ndarray
    ref_counts: np.ndarray
    overlap: np.ndarray


def per_pixel_histograms(gen, ref, bins: int = N_BINS, e_max: float = 0.6) -> PixelHistograms:
    """Per-pixel histograms on shared edges over [0, e_max] and their intersection."""
    gen, ref = _pair(gen, ref)
    edges = np.linspace(0.0, e_max, bins + 1)
    gen_counts = np.stack([np.histogram(gen[:, i], bins=edges)[0] for i in range(gen.shape[1])])
    ref_counts = np.stack([np.histogram(ref[:, i], bins=edges)[0] for i in range(ref.shape[1])])
    gen_p = gen_counts / np.maximum(gen_counts.sum(axis=1, keepdims=True), 1)
    ref_p = ref_counts / np.maximum(ref_counts.sum(axis=1, keepdims=True), 1)
    overlap = np.minimum(gen_p, ref_p).sum(axis=1)
    return PixelHistograms(edges, gen_counts, ref_counts, overlap)


# =============================================================================
# Full report
# =============================================================================


@dataclass
class EvalReport:
    n_gen: int
    n_ref: int
    shape_mse: float
    pixel_mean_gen: np.ndarray
    pixel_mean_ref: np.ndarray
    corr_matrix_gen: np.ndarray
    corr_matrix_ref: np.ndarray
    corr_mse: float
    sign_agreement: float
    esum_mu_gen: float
    esum_mu_ref: float
    esum_sigma_gen: float
    esum_sigma_ref: float
    esum_bin_edges: np.ndarray
    esum_counts_gen: np.ndarray
    esum_counts_ref: np.ndarray
    cluster_centroids_gen: np.ndarray
    cluster_centroids_ref: np.ndarray
    cluster_assignment: np.ndarray
    cluster_distances: np.ndarray
    pixel_bin_edges: np.ndarray
    pixel_counts_gen: np.ndarray
    pixel_counts_ref: np.ndarray
    pixel_overlap: np.ndarray
    degenerate_pixels: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out

    def headline(self) -> dict:
        return {
            "shape_mse": self.shape_mse,
            "corr_mse": self.corr_mse,
            "sign_agreement": self.sign_agreement,
            "esum_mu_gen": self.esum_mu_gen,
            "esum_mu_ref": self.esum_mu_ref,
            "esum_sigma_gen": self.esum_sigma_gen,
            "esum_sigma_ref": self.esum_sigma_ref,
            "min_pixel_overlap": float(self.pixel_overlap.min()),
            "max_cluster_distance": float(self.cluster_distances.max()),
        }


def evaluate(
    gen,
    ref,
    k: int = N_CLUSTERS,
    bins: int = N_BINS,
    e_max: float = 0.6,
    seed: int = 0,
) -> EvalReport:
    """Compute all five metrics for one generated batch."""
    gen, ref = _pair(gen, ref)
    corr = correlation_metric(gen, ref)
    esum_gen = energy_sum_stats(gen, bins, e_max)
    esum_ref = energy_sum_stats(ref, bins, e_max)
    clusters_gen = kmeans_modes(gen, k, seed)
    clusters_ref = kmeans_modes(ref, k, seed)
    assignment, distances = pair_clusters(clusters_gen.centroids, clusters_ref.centroids)
    hists = per_pixel_histograms(gen, ref, bins, e_max)
    return EvalReport(
        n_gen=gen.shape[0],
        n_ref=ref.shape[0],
        shape_mse=shower_shape_mse(gen, ref),
        pixel_mean_gen=gen.mean(axis=0),
        pixel_mean_ref=ref.mean(axis=0),
        corr_matrix_gen=corr.corr_gen,
        corr_matrix_ref=corr.corr_ref,
        corr_mse=corr.corr_mse,
        sign_agreement=corr.sign_agreement,
        esum_mu_gen=esum_gen.mu,
        esum_mu_ref=esum_ref.mu,
        esum_sigma_gen=esum_gen.sigma,
        esum_sigma_ref=esum_ref.sigma,
        esum_bin_edges=esum_gen.bin_edges,
        esum_counts_gen=esum_gen.counts,
        esum_counts_ref=esum_ref.counts,
        cluster_centroids_gen=clusters_gen.centroids,
        cluster_centroids_ref=clusters_ref.centroids,
        cluster_assignment=assignment,
        cluster_distances=distances,
        pixel_bin_edges=hists.bin_edges,
        pixel_counts_gen=hists.gen_counts,
        pixel_counts_ref=hists.ref_counts,
        pixel_overlap=hists.overlap,
        degenerate_pixels=sorted(set(corr.degenerate_gen) | set(corr.degenerate_ref)),
    )
