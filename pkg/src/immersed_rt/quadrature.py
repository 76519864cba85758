"""Quadrature on triangles and segments, plus composite rules for cut cells.

Triangle rules are collapsed (Duffy) Gauss-Legendre products on the reference
triangle (0,0),(1,0),(0,1); segment rules are Gauss-Legendre on [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_DEGREES = (1, 2, 3, 4, 5, 6, 7, 8, 10, 12)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 2) reference coords for triangles, (n,) for segments
    weights: np.ndarray
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        """Barycentric coordinates (n, 3) of triangle rule points."""
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - x - y, x, y])


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    if degree not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported triangle quadrature degree {degree}")
    # the collapsed map adds one power of (1 - eta) to the integrand
    n = (degree + 2) // 2 + ((degree + 2) % 2)
    g, w = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    xi, eta = np.meshgrid(g, g, indexing="ij")
    wx, we = np.meshgrid(w, w, indexing="ij")
    x = xi * (1.0 - eta)
    y = eta
    weights = (wx * we * (1.0 - eta)).ravel()
    pts = np.column_stack([x.ravel(), y.ravel()])
    return QuadratureRule(pts, weights, degree)


@lru_cache(maxsize=None)
def segment_rule(degree: int) -> QuadratureRule:
    if degree < 0 or degree > 20:
        raise ValueError(f"unsupported segment quadrature degree {degree}")
    n = degree // 2 + 1
    g, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (g + 1.0), 0.5 * w, degree)


def triangle_area(tri) -> float:
    tri = np.asarray(tri, dtype=float)
    d1 = tri[1] - tri[0]
    d2 = tri[2] - tri[0]
    return 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])


def map_triangle_points(tri, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points and weights on one triangle (or a stack).

    ``tri`` is (3, 2) or (m, 3, 2); returns points (..., n, 2) and weights
    (..., n) already scaled by the element area.
    """
    rule = triangle_rule(degree)
    tri = np.asarray(tri, dtype=float)
    lam = rule.barycentric
    pts = np.einsum("qk,...kd->...qd", lam, tri)
    d1 = tri[..., 1, :] - tri[..., 0, :]
    d2 = tri[..., 2, :] - tri[..., 0, :]
    jac = np.abs(d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])
    weights = jac[..., None] * rule.weights
    return pts, weights


def integrate_triangle(tri, f, degree: int):
    """Integrate ``f`` over a triangle with an affine-mapped rule exact to ``degree``.

    ``f`` maps an (n, 2) array of points to (n,) or (n, k) values.
    """
    pts, w = map_triangle_points(tri, degree)
    vals = np.asarray(f(pts), dtype=float)
    if vals.ndim == 0:
        vals = np.full(w.shape, float(vals))
    return np.tensordot(w, vals, axes=(0, 0))


def integrate_cut_element(cut, f_plus, f_minus, degree: int):
    """Sum of ``f_plus`` over the plus sub-triangles and ``f_minus`` over the minus ones."""
    total = 0.0
    for tri in cut.sub_triangles_plus:
        total = total + integrate_triangle(tri, f_plus, degree)
    for tri in cut.sub_triangles_minus:
        total = total + integrate_triangle(tri, f_minus, degree)
    return total


def integrate_segment(a, b, f, degree: int):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rule = segment_rule(degree)
    pts = a + rule.points[:, None] * (b - a)
    vals = np.asarray(f(pts), dtype=float)
    if vals.ndim == 0:
        vals = np.full(rule.weights.shape, float(vals))
    return np.linalg.norm(b - a) * np.tensordot(rule.weights, vals, axes=(0, 0))


def integrate_edge_piecewise(a, b, split, f_first, f_second, degree: int):
    """Integrate over segment ab, using ``f_first`` on [a, split] and ``f_second`` on [split, b].

    With ``split=None`` the whole segment uses ``f_first``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if split is None:
        return integrate_segment(a, b, f_first, degree)
    split = np.asarray(split, dtype=float)
    d = b - a
    L2 = float(d @ d)
    s = float((split - a) @ d) / L2
    off = abs(float(d[0] * (split - a)[1] - d[1] * (split - a)[0])) / np.sqrt(L2)
    if not (0.0 < s < 1.0) or off > 1e-10 * np.sqrt(L2):
        raise ValueError("split point must lie strictly inside the edge")
    return integrate_segment(a, split, f_first, degree) + integrate_segment(split, b, f_second, degree)
