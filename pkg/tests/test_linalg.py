import math

import numpy as np
import pytest

from oavc_coverage.errors import ConditioningError, DomainError, InvalidInputError
from oavc_coverage.linalg import SymMat2, clamp_eigenvalues, congruence, eig2, spd_inv_sqrt, spd_sqrt, vec2


def test_eig2_diagonal():
    vals, vecs = eig2(SymMat2(4.0, 0.0, 9.0))
    np.testing.assert_allclose(vals, [9.0, 4.0])
    np.testing.assert_allclose(np.abs(vecs[:, 0]), [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(np.abs(vecs[:, 1]), [1.0, 0.0], atol=1e-15)


def test_eig2_identity_orthonormal():
    vals, vecs = eig2(SymMat2.identity())
    np.testing.assert_allclose(vals, [1.0, 1.0])
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(2), atol=1e-15)


def test_eig2_coupled():
    vals, vecs = eig2(SymMat2(2.0, 1.0, 2.0))
    np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-15)
    s = 1 / math.sqrt(2)
    assert abs(abs(vecs[:, 0] @ [s, s]) - 1) < 1e-15
    assert abs(abs(vecs[:, 1] @ [s, -s]) - 1) < 1e-15


def test_eig2_rejects_nan():
    with pytest.raises(InvalidInputError):
        eig2(SymMat2(math.nan, 0.0, 1.0))


def test_spd_sqrt_examples():
    assert spd_sqrt(SymMat2.identity()) == SymMat2.identity()
    np.testing.assert_allclose(spd_sqrt(SymMat2(4.0, 0.0, 9.0)).packed(), [2.0, 0.0, 3.0], atol=1e-15)
    s = spd_sqrt(SymMat2(2.0, 1.0, 2.0))
    np.testing.assert_allclose(s @ s, [[2.0, 1.0], [1.0, 2.0]], atol=1e-14)


def test_spd_sqrt_rejects_indefinite():
    with pytest.raises(DomainError):
        spd_sqrt(SymMat2(1.0, 2.0, 1.0))


def test_inv_sqrt_examples_and_property():
    np.testing.assert_allclose(spd_inv_sqrt(SymMat2(4.0, 0.0, 9.0)).packed(), [0.5, 0.0, 1 / 3], atol=1e-15)
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.normal(size=(2, 2))
        m = SymMat2.from_array(a @ a.T + 0.1 * np.eye(2))
        r = spd_inv_sqrt(m)
        np.testing.assert_allclose(r @ m.to_array() @ r.to_array(), np.eye(2), atol=1e-10)


def test_inv_sqrt_conditioning_error_carries_eigenvalue():
    with pytest.raises(ConditioningError) as info:
        spd_inv_sqrt(SymMat2(1.0, 0.0, 1e-14))
    assert info.value.smallest_eigenvalue == pytest.approx(1e-14)


def test_clamp_and_congruence():
    c = clamp_eigenvalues(SymMat2(1e-6, 0.0, 2.0), 1e-3)
    np.testing.assert_allclose(c.packed(), [1e-3, 0.0, 2.0], atol=1e-15)
    out = congruence(SymMat2(2.0, 0.0, 1.0), SymMat2(1.0, 1.0, 3.0))
    np.testing.assert_allclose(out.packed(), [4.0, 2.0, 3.0])


def test_vec2():
    np.testing.assert_array_equal(vec2(1, 2), [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        vec2([1.0, math.inf])
