"""MMD, correlation loss and the loss-weight schedule."""

import numpy as np
import pytest

from qag.errors import LossError
from qag.objectives import (
    LossRecord,
    LossWeights,
    aggregate_histories,
    corr_loss,
    loss_weights,
    mmd_loss,
    pearson_corr,
    total_loss,
)


@pytest.fixture
def batches(rng):
    a = rng.uniform(0, 0.6, size=(20, 8))
    b = rng.uniform(0, 0.6, size=(20, 8))
    return a, b


# =============================================================================
# MMD
# =============================================================================


def test_mmd_identical_batches(batches):
    a, _ = batches
    assert mmd_loss(a, a) == pytest.approx(0.0, abs=1e-12)


def test_mmd_symmetric_and_positive(batches):
    a, b = batches
    assert mmd_loss(a, b) == pytest.approx(mmd_loss(b, a), abs=1e-12)
    assert mmd_loss(a, b) > 0


def test_mmd_grows_with_shift(batches):
    a, _ = batches
    assert mmd_loss(a, a + 0.05) < mmd_loss(a, a + 0.2)


def test_mmd_single_pair_closed_form():
    x, y = np.array([[0.1, 0.3]]), np.array([[0.4, 0.2]])
    d2 = np.sum((x - y) ** 2)
    bandwidths = (0.01, 0.1, 0.5, 1.0)
    expected = sum(2.0 * (1.0 - np.exp(-d2 / (2.0 * s**2))) for s in bandwidths)
    assert mmd_loss(x, y, bandwidths, scale=1.0) == pytest.approx(expected, rel=1e-12)


def test_mmd_same_distribution_is_small():
    rng = np.random.default_rng(21)
    a = rng.normal(0.2, 0.03, size=(1000, 8))
    b = rng.normal(0.2, 0.03, size=(1000, 8))
    assert mmd_loss(a, b) < 0.01


def test_mmd_dimension_mismatch(batches):
    a, _ = batches
    with pytest.raises(LossError):
        mmd_loss(a, a[:, :4])


# =============================================================================
# Correlation
# =============================================================================


def test_corr_loss_identity_against_all_ones():
    uncorrelated = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    np.testing.assert_allclose(pearson_corr(uncorrelated)[0], np.eye(2), atol=1e-15)
    assert corr_loss(uncorrelated, np.ones((2, 2))) == pytest.approx(0.5)


def test_corr_loss_self_consistent(batches):
    a, _ = batches
    assert corr_loss(a, pearson_corr(a)[0]) == pytest.approx(0.0, abs=1e-12)


def test_corr_loss_affine_invariant(batches):
    a, b = batches
    ref = pearson_corr(b)[0]
    assert corr_loss(3.0 * a + 0.1, ref) == pytest.approx(corr_loss(a, ref), abs=1e-10)


def test_pearson_matches_numpy(batches):
    a, _ = batches
    corr, degenerate = pearson_corr(a)
    np.testing.assert_allclose(corr, np.corrcoef(a, rowvar=False), atol=1e-12)
    assert not degenerate.any()


def test_zero_variance_pixel(batches):
    a, _ = batches
    a = a.copy()
    a[:, 2] = 0.3
    corr, degenerate = pearson_corr(a)
    assert degenerate.tolist() == [i == 2 for i in range(8)]
    assert corr[2, 2] == 1.0
    assert np.all(corr[2, np.arange(8) != 2] == 0.0)
    assert np.all(np.isfinite(corr))


def test_corr_needs_two_samples():
    with pytest.raises(LossError):
        pearson_corr(np.ones((1, 3)))


# =============================================================================
# Weights and total
# =============================================================================


def test_weight_schedule():
    assert loss_weights(0) == LossWeights(1.0, 0.0, 0)
    assert loss_weights(99).w_corr == 0.0
    for epoch in (100, 250, 499, 2000):
        w = loss_weights(epoch)
        assert w.w_mmd + w.w_corr == pytest.approx(1.0)
        assert w.w_mmd >= 0.0
    assert loss_weights(300).w_mmd == pytest.approx(0.8)
    assert loss_weights(300, absolute=True).w_mmd == pytest.approx(0.7)
    with pytest.raises(LossError):
        loss_weights(-1)


def test_total_loss_combines_components(batches):
    a, b = batches
    weights = LossWeights(0.75, 0.25, 150)
    result = total_loss(a, b, weights)
    expected_corr = corr_loss(a, pearson_corr(b)[0])
    assert result.mmd == pytest.approx(mmd_loss(a, b))
    assert result.corr == pytest.approx(expected_corr)
    assert result.total == pytest.approx(0.75 * result.mmd + 0.25 * expected_corr)


def test_total_loss_skips_corr_before_handover(batches):
    a, b = batches
    single = a[:1]
    result = total_loss(single, b, loss_weights(10))
    assert result.corr == 0.0
    assert result.total == pytest.approx(result.mmd)


def test_aggregate_histories():
    def record(epoch, mmd):
        return LossRecord(epoch, mmd, 0.0, 1.0, 0.0, mmd)

    runs = [[record(0, 1.0), record(1, 0.5)], [record(0, 3.0), record(1, 0.5), record(2, 0.1)]]
    rows = aggregate_histories(runs)
    assert len(rows) == 2
    assert rows[0]["mmd_mean"] == pytest.approx(2.0)
    assert rows[0]["mmd_std"] == pytest.approx(1.0)
    assert rows[1]["mmd_std"] == 0.0
    assert rows[1]["n_runs"] == 2
