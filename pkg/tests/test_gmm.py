import math

import numpy as np
import pytest

from oavc_coverage.density import GaussianMixture
from oavc_coverage.errors import InsufficientDataError, InvalidInputError
from oavc_coverage.gmm import EmConfig, fit, log_likelihood, responsibilities
from oavc_coverage.linalg import SymMat2


def test_single_component_is_sample_mle():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 2)) @ np.array([[2.0, 0.3], [0.0, 0.5]]) + [3, -1]
    res = fit(pts, 1)
    np.testing.assert_allclose(res.mixture.means[0], pts.mean(axis=0), atol=1e-12)
    d = pts - pts.mean(axis=0)
    np.testing.assert_allclose(res.mixture.covs[0].to_array(), d.T @ d / len(pts), atol=1e-12)
    assert res.mixture.weights[0] == 1.0


def test_separated_clusters():
    rng = np.random.default_rng(1)
    a = rng.normal(0, 0.1, (5, 2))
    b = rng.normal(0, 0.1, (5, 2)) + [100, 0]
    res = fit(np.vstack([a, b]), 2)
    order = np.argsort(res.mixture.means[:, 0])
    np.testing.assert_allclose(res.mixture.means[order[0]], a.mean(axis=0), atol=0.1)
    np.testing.assert_allclose(res.mixture.means[order[1]], b.mean(axis=0), atol=0.1)
    np.testing.assert_allclose(res.mixture.weights, [0.5, 0.5], atol=1e-6)


def test_one_component_per_point_hits_floor():
    pts = np.array([[0, 0], [5, 1], [-3, 4]], dtype=float)
    cfg = EmConfig(cov_floor=1e-3)
    res = fit(pts, 3, cfg)
    got = res.mixture.means[np.lexsort((res.mixture.means[:, 1], res.mixture.means[:, 0]))]
    np.testing.assert_allclose(got, pts[np.lexsort((pts[:, 1], pts[:, 0]))], atol=1e-9)
    for c in res.mixture.covs:
        np.testing.assert_allclose(c.packed(), [1e-3, 0, 1e-3], atol=1e-12)


def test_likelihood_monotone():
    rng = np.random.default_rng(2)
    for seed in range(20):
        pts = np.vstack([rng.normal(c, 1.0, (15, 2)) for c in ([0, 0], [4, 1], [1, 5])])
        res = fit(pts, 3, seed=seed)
        hist = np.array(res.history)
        assert np.all(np.diff(hist) >= -1e-10 * max(1.0, abs(hist[0])))
        assert res.log_likelihood == pytest.approx(log_likelihood(res.mixture, pts), rel=1e-10)


def test_order_invariance_and_determinism():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(30, 2))
    a = fit(pts, 2, seed=5).mixture
    b = fit(pts[::-1], 2, seed=5).mixture
    assert a == b


def test_log_likelihood_examples():
    mix = GaussianMixture([[0, 0]], [SymMat2.identity()], [1.0])
    assert log_likelihood(mix, [[0, 0]]) == pytest.approx(-math.log(2 * math.pi), rel=1e-15)
    pts = np.random.default_rng(4).normal(size=(6, 2))
    assert log_likelihood(mix, np.vstack([pts, pts])) == pytest.approx(2 * log_likelihood(mix, pts), rel=1e-14)


def test_responsibilities_rows_sum_to_one():
    mix = GaussianMixture([[0, 0], [3, 0]], [SymMat2.identity()] * 2, [0.5, 0.5])
    r = responsibilities(mix, np.random.default_rng(5).normal(size=(20, 2)))
    np.testing.assert_allclose(r.sum(axis=1), 1.0, atol=1e-14)


def test_errors():
    with pytest.raises(InsufficientDataError):
        fit([[0, 0]], 2)
    with pytest.raises(InvalidInputError):
        fit([[0, 0], [1, np.nan]], 1)
    with pytest.raises(InvalidInputError):
        EmConfig(cov_floor=0.0)
