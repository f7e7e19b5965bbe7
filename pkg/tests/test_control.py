import numpy as np
import pytest

from oavc_coverage.control import Gains, control_gain, control_input, cost_gradient, locational_cost
from oavc_coverage.errors import DomainError, InvalidInputError
from oavc_coverage.geometry import ConvexPolygon
from oavc_coverage.quadrature import CellMoments, cell_moments

UNIT = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])


def moments(mass, centroid, geo=1.0):
    return CellMoments(mass, np.asarray(centroid, dtype=float), geo)


def test_control_input_examples():
    np.testing.assert_array_equal(control_input([1, 2], moments(1.0, [1, 2]), Gains()), [0, 0])
    u = control_input([2, 0], moments(1.0, [0, 0]), Gains(k0=1.0, k1=0.0))
    np.testing.assert_allclose(u, [-2, 0])
    u = control_input([1, 1], moments(2.0, [0, 0], geo=4.0), Gains(k0=0.0, k1=1.0))
    np.testing.assert_allclose(u, [-2, -2])


def test_saturation():
    u = control_input([10, 0], moments(1.0, [0, 0]), Gains(u_max=5.0))
    np.testing.assert_allclose(u, [-5, 0])


def test_gain_validation():
    with pytest.raises(InvalidInputError):
        Gains(k0=0.0, k1=0.0)
    with pytest.raises(InvalidInputError):
        Gains(k0=-1.0)
    with pytest.raises(DomainError):
        control_gain(moments(0.0, [0, 0]), Gains())


def test_cost_gradient_examples():
    np.testing.assert_array_equal(cost_gradient([1, 1], moments(3.0, [1, 1])), [0, 0])
    np.testing.assert_allclose(cost_gradient([1, -2], moments(3.0, [0, 0])), [6, -12])


def test_locational_cost_examples():
    def ones(q, t):
        return np.ones(len(q))

    assert locational_cost([[0.5, 0.5]], [UNIT], ones, 0.0) == pytest.approx(1 / 6)
    off = locational_cost([[0.8, 0.3]], [UNIT], ones, 0.0)
    assert off == pytest.approx(1 / 6 + 0.3**2 + 0.2**2)

    def bump(q, t):
        return np.exp(-8 * ((q - 0.5) ** 2).sum(axis=1))

    at_c = locational_cost([[0.5, 0.5]], [UNIT], bump, 0.0)
    assert at_c > 0
    assert locational_cost([[0.6, 0.45]], [UNIT], bump, 0.0) > at_c


def test_gradient_matches_finite_difference():
    def dens(q, t):
        return 1 + q[:, 0] * q[:, 1] ** 2

    p = np.array([[0.3, 0.7]])
    g = cost_gradient(p[0], cell_moments(UNIT, p[0], dens, 0.0))
    h = 1e-3
    fd = [
        (locational_cost(p + h * e, [UNIT], dens, 0.0) - locational_cost(p - h * e, [UNIT], dens, 0.0)) / (2 * h)
        for e in np.eye(2)
    ]
    np.testing.assert_allclose(g, fd, rtol=1e-10)
