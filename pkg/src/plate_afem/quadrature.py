"""Quadrature rules on triangles, verified for exactness at build time.

Rules are stored in barycentric coordinates with weights normalised to sum
to one, so that ``meas(T) * sum(w_q * f(x_q))`` approximates ``int_T f``.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import factorial, sqrt

import numpy as np

__all__ = ["QuadratureRule", "triangle_rule", "physical_points"]


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points, weights (summing to 1) and verified exactness degree."""

    points: np.ndarray   # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int


def _monomial_mean(a, b, c):
    # mean over a triangle of lam1^a lam2^b lam3^c
    return 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)


def _selftest(points, weights, degree, tol=5e-13):
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            c_exp_max = degree - a - b
            for c in range(c_exp_max + 1):
                val = np.sum(weights * points[:, 0] ** a * points[:, 1] ** b * points[:, 2] ** c)
                ref = _monomial_mean(a, b, c)
                if abs(val - ref) > tol * max(1.0, abs(ref)):
                    raise AssertionError(
                        f"quadrature self-test failed for monomial ({a},{b},{c}): "
                        f"{val} vs {ref}"
                    )


def _edge_midpoint_rule():
    pts = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
    w = np.full(3, 1.0 / 3.0)
    return pts, w


def _seven_point_rule():
    # symmetric 7-point rule, exact to degree 5
    a1 = (6.0 - sqrt(15.0)) / 21.0
    a2 = (6.0 + sqrt(15.0)) / 21.0
    w1 = (155.0 - sqrt(15.0)) / 1200.0
    w2 = (155.0 + sqrt(15.0)) / 1200.0
    pts = [[1.0 / 3.0] * 3]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        for perm in ((1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)):
            pts.append(list(perm))
            wts.append(w)
    return np.array(pts), np.array(wts)


def _collapsed_gauss_rule(degree):
    # tensor Gauss-Legendre mapped to the triangle; the Jacobian raises the
    # required 1d exactness by one
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    lam1 = U
    lam2 = V * (1.0 - U)
    lam3 = 1.0 - lam1 - lam2
    weights = (WU * WV * (1.0 - U)).ravel() * 2.0
    pts = np.stack([lam1.ravel(), lam2.ravel(), lam3.ravel()], axis=1)
    return pts, weights


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Return a quadrature rule exact for polynomials up to ``degree``."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if degree <= 2:
        pts, w = _edge_midpoint_rule()
        actual = 2
    elif degree <= 5:
        pts, w = _seven_point_rule()
        actual = 5
    else:
        pts, w = _collapsed_gauss_rule(degree)
        actual = degree
    _selftest(pts, w, actual)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(points=pts, weights=w, degree=actual)


def physical_points(rule: QuadratureRule, tri_coords: np.ndarray) -> np.ndarray:
    """Map barycentric rule points to triangles given as (..., 3, 2) arrays."""
    return np.einsum("qi,...id->...qd", rule.points, tri_coords)
