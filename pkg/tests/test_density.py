import math

import numpy as np
import pytest

from oavc_coverage.density import (
    DensityPath,
    Gaussian,
    GaussianMixture,
    gaussian_pdf,
    gm_eval,
    pair_components,
    path_cov,
    path_eval,
    path_mean,
    path_weights,
    sample_mixture,
)
from oavc_coverage.errors import DomainError, InfeasibleScenarioError, InvalidInputError
from oavc_coverage.geometry import Disk, Rect
from oavc_coverage.linalg import SymMat2

I2 = SymMat2.identity()


def s5_initial():
    return GaussianMixture([[3, 12], [12, 14]], [[0.2, -0.6, 3], [10.5, -0.5, 2]], [0.3, 0.7])


def s5_final():
    return GaussianMixture([[1, 1], [17, 1]], [[0.7, 0.2, 0.5], [0.8, 0.2, 0.4]], [0.5, 0.5])


def test_gaussian_pdf_values():
    g = Gaussian(np.zeros(2), I2)
    assert gaussian_pdf([0, 0], g) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert gaussian_pdf([1, 0], g) == pytest.approx(math.exp(-0.5) / (2 * math.pi), rel=1e-15)
    assert gaussian_pdf([0, 0], Gaussian(np.zeros(2), SymMat2(4, 0, 1))) == pytest.approx(1 / (4 * math.pi))


def test_gaussian_pdf_singular():
    with pytest.raises(DomainError):
        gaussian_pdf([0, 0], Gaussian(np.zeros(2), SymMat2(1, 1, 1)))


def test_gm_eval_matches_components():
    mix = s5_initial()
    q = np.array([3.0, 12.0])
    expect = sum(w * gaussian_pdf(q, g) for w, g in zip(mix.weights, mix.components))
    assert gm_eval(q, mix) == pytest.approx(expect, rel=1e-14)
    single = GaussianMixture([[1, 2]], [I2], [1.0])
    assert gm_eval([0.3, 0.1], single) == pytest.approx(gaussian_pdf([0.3, 0.1], single.components[0]), rel=1e-14)
    twin = GaussianMixture([[1, 2], [1, 2]], [I2, I2], [0.5, 0.5])
    assert gm_eval([0.3, 0.1], twin) == pytest.approx(gaussian_pdf([0.3, 0.1], single.components[0]), rel=1e-14)
    pts = np.random.default_rng(0).normal(size=(7, 2))
    assert gm_eval(pts, mix).shape == (7,)


def test_mixture_validation():
    with pytest.raises(InvalidInputError):
        GaussianMixture([[0, 0], [1, 1]], [I2, I2], [0.5, 0.6])
    with pytest.raises(InvalidInputError):
        GaussianMixture([[0, 0]], [I2], [-0.0001 + 1.0, 0.0001])
    with pytest.raises(DomainError):
        GaussianMixture([[0, 0]], [SymMat2(1, 2, 1)], [1.0])


def test_path_mean_examples():
    init = GaussianMixture([[0, 0]], [I2], [1.0])
    fin = GaussianMixture([[10, 0]], [I2], [1.0])
    path = DensityPath.between(init, fin, a=-1.0)
    np.testing.assert_allclose(path_mean(path, 0, math.log(2)), [5.0, 0.0], atol=1e-14)
    np.testing.assert_array_equal(path_mean(path, 0, 0.0), [0.0, 0.0])
    np.testing.assert_allclose(path_mean(path, 0, 80.0), [10.0, 0.0], atol=1e-12)
    with pytest.raises(DomainError):
        path_mean(path, 0, -1.0)


def test_path_cov_examples():
    init = GaussianMixture([[0, 0]], [I2], [1.0])
    fin = GaussianMixture([[0, 0]], [SymMat2.identity(4.0)], [1.0])
    path = DensityPath.between(init, fin, b=-1.0)
    np.testing.assert_allclose(path_cov(path, 0, math.log(2)).packed(), [2.25, 0.0, 2.25], atol=1e-14)
    p2 = DensityPath.between(s5_initial(), s5_final())
    for j2 in range(2):
        start = s5_initial().covs[p2.pairing[j2]]
        np.testing.assert_allclose(path_cov(p2, j2, 0.0).packed(), start.packed(), atol=1e-13)
        np.testing.assert_allclose(path_cov(p2, j2, 100.0).packed(), s5_final().covs[j2].packed(), atol=1e-12)


def test_path_weights_examples():
    init = GaussianMixture([[0, 0]], [I2], [1.0])
    fin = GaussianMixture([[1, 0], [2, 0]], [I2, I2], [0.5, 0.5])
    path = DensityPath.between(init, fin, alpha=-1.0)
    np.testing.assert_allclose(path_weights(path, math.log(2)), [0.5, 0.25, 0.25], atol=1e-15)
    np.testing.assert_array_equal(path_weights(path, 0.0), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(path_weights(path, 100.0), [0.0, 0.5, 0.5], atol=1e-15)


def test_path_eval_boundaries():
    path = DensityPath.between(s5_initial(), s5_final())
    pts = np.random.default_rng(1).uniform(-20, 20, (500, 2))
    np.testing.assert_allclose(path_eval(path, pts, 0.0), gm_eval(pts, s5_initial()), rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(path_eval(path, pts, 100.0), gm_eval(pts, s5_final()), atol=1e-10)
    assert np.all(path_eval(path, [[3.0, 12.0], [1.0, 1.0]], 3.0) > 0)


def test_pairing_minimises_distance():
    assert pair_components(s5_initial(), s5_final()) == (0, 1)
    swapped = GaussianMixture([[17, 1], [1, 1]], [I2, I2], [0.5, 0.5])
    assert pair_components(s5_final(), swapped) == (1, 0)
    three = GaussianMixture([[0, 0], [1, 1], [2, 2]], [I2] * 3, [0.2, 0.3, 0.5])
    assert pair_components(s5_initial(), three) == (0, 1, 0)


def test_rates_must_be_negative():
    with pytest.raises(DomainError):
        DensityPath.between(s5_initial(), s5_final(), a=0.0)


def test_sample_mixture():
    dom = Rect(-10, 10, -10, 10)
    assert sample_mixture(s5_initial(), 0, dom).shape == (0, 2)
    tight = GaussianMixture([[0, 0]], [SymMat2.identity(0.01)], [1.0])
    pts = sample_mixture(tight, 500, dom, seed=3)
    assert np.all(np.hypot(*pts.T) < 6 * 0.1)
    mix = GaussianMixture([[0, 0]], [I2], [1.0])
    obs = [Disk((0, 0), 1.0)]
    pts = sample_mixture(mix, 300, dom, obs, seed=4)
    assert np.all(np.hypot(*pts.T) > 1.0)
    np.testing.assert_array_equal(pts, sample_mixture(mix, 300, dom, obs, seed=4))


def test_sample_mixture_infeasible():
    far = GaussianMixture([[1000, 1000]], [I2], [1.0])
    with pytest.raises(InfeasibleScenarioError):
        sample_mixture(far, 5, Rect(-1, 1, -1, 1))
