import numpy as np
import pytest

from plate_afem.quadrature import physical_points, triangle_rule


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 6, 8, 10, 12])
def test_monomial_exactness(degree):
    """Rules pass the barycentric monomial self-test at build time."""
    rule = triangle_rule(degree)
    assert rule.degree >= degree
    assert abs(rule.weights.sum() - 1.0) < 5e-13


def test_weights_positive_smallest_rules():
    for degree in (2, 5):
        assert np.all(triangle_rule(degree).weights > 0)


def test_integrates_polynomial_on_physical_triangle():
    # int over conv{(0,0),(2,0),(0,1)} of x*y = 1/6 (area = 1)
    rule = triangle_rule(4)
    coords = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    pts = physical_points(rule, coords[None])
    vals = pts[0, :, 0] * pts[0, :, 1]
    area = 1.0
    assert abs(area * np.dot(rule.weights, vals) - 1.0 / 6.0) < 1e-14


def test_degree_request_validation():
    with pytest.raises(ValueError):
        triangle_rule(-1)
