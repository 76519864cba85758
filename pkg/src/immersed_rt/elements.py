"""Local element algebra for lowest-order Raviart-Thomas and its immersed variant."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .exceptions import AssumptionViolation, NonPositiveCoefficient
from .geometry import LOCAL_EDGES, CutTopology
from .quadrature import integrate_segment, map_triangle_points

THETA_TOL = 1e-12
# Gauss degree for edge means of general callables; degree 6 leaves ~1e-9 on non-polynomial fluxes
DOF_DEGREE = 10


@dataclass(frozen=True)
class AffineVectorField:
    """x -> (a + b*x1, c + b*x2)."""

    a: float
    c: float
    b: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([self.a + self.b * x[..., 0], self.c + self.b * x[..., 1]], axis=-1)

    @property
    def divergence(self) -> float:
        return 2.0 * self.b

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.a, self.c, self.b])

    @classmethod
    def from_coef(cls, coef) -> "AffineVectorField":
        return cls(float(coef[0]), float(coef[1]), float(coef[2]))

    @classmethod
    def constant(cls, v) -> "AffineVectorField":
        return cls(float(v[0]), float(v[1]), 0.0)

    def __add__(self, other: "AffineVectorField") -> "AffineVectorField":
        return AffineVectorField(self.a + other.a, self.c + other.c, self.b + other.b)

    def __sub__(self, other: "AffineVectorField") -> "AffineVectorField":
        return AffineVectorField(self.a - other.a, self.c - other.c, self.b - other.b)

    def __mul__(self, s: float) -> "AffineVectorField":
        return AffineVectorField(s * self.a, s * self.c, s * self.b)

    __rmul__ = __mul__

    def __neg__(self) -> "AffineVectorField":
        return self * -1.0


ZERO = AffineVectorField(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PiecewiseRTFunction:
    """Two RT0 fields glued along the straight cut line of ``cut``."""

    plus: AffineVectorField
    minus: AffineVectorField
    cut: CutTopology

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        side = self.cut.side_of(x)
        return np.where(side[..., None] > 0, self.plus(x), self.minus(x))

    def piece(self, side: int) -> AffineVectorField:
        return self.plus if side > 0 else self.minus

    def normal_jump(self, x) -> float:
        return float((self.plus(x) - self.minus(x)) @ self.cut.n_h)

    def tangential_jump(self, x=None) -> float:
        """Coefficient-scaled tangential jump at ``x`` (default x_T)."""
        cut = self.cut
        x = cut.x_T if x is None else x
        return float(cut.beta_plus * self.plus(x) @ cut.t_h - cut.beta_minus * self.minus(x) @ cut.t_h)

    @property
    def divergence_jump(self) -> float:
        return self.plus.divergence - self.minus.divergence

    def __add__(self, other: "PiecewiseRTFunction") -> "PiecewiseRTFunction":
        return PiecewiseRTFunction(self.plus + other.plus, self.minus + other.minus, self.cut)

    def __sub__(self, other: "PiecewiseRTFunction") -> "PiecewiseRTFunction":
        return PiecewiseRTFunction(self.plus - other.plus, self.minus - other.minus, self.cut)

    def __mul__(self, s: float) -> "PiecewiseRTFunction":
        return PiecewiseRTFunction(self.plus * s, self.minus * s, self.cut)

    __rmul__ = __mul__


Field = Union[AffineVectorField, PiecewiseRTFunction]


@dataclass(frozen=True)
class LocalBasis:
    fields: tuple
    theta_omega: float = 0.0
    mu_coefficients: tuple = (0.0, 0.0, 0.0)
    denominator: float = 1.0
    omega_projection: AffineVectorField = ZERO


def triangle_geometry(T):
    """Edge lengths, outward unit normals and area of a triangle."""
    T = np.asarray(T, dtype=float)
    lengths = np.empty(3)
    normals = np.empty((3, 2))
    for i, (p, q) in enumerate(LOCAL_EDGES):
        d = T[q] - T[p]
        lengths[i] = np.hypot(d[0], d[1])
        normals[i] = (d[1], -d[0])
    d1, d2 = T[1] - T[0], T[2] - T[0]
    signed = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if signed == 0.0 or not np.isfinite(signed):
        raise ValueError("degenerate triangle")
    if signed < 0:
        normals = -normals
    normals /= lengths[:, None]
    return lengths, normals, abs(signed)


def rt_basis(T) -> tuple:
    """lambda_i(x) = |e_i| / (2|T|) (x - A_i), unit mean outward flux on edge i."""
    T = np.asarray(T, dtype=float)
    lengths, _, area = triangle_geometry(T)
    out = []
    for i in range(3):
        s = lengths[i] / (2.0 * area)
        out.append(AffineVectorField(-s * T[i, 0], -s * T[i, 1], s))
    return tuple(out)


def combine(coeffs: Sequence[float], fields: Sequence[Field]) -> Field:
    acc = fields[0] * float(coeffs[0])
    for c, f in zip(coeffs[1:], fields[1:]):
        acc = acc + f * float(c)
    return acc


def _edge_endpoints(T, i):
    p, q = LOCAL_EDGES[i]
    return T[p], T[q]


def dof_functional(q, T, i: int, cut: CutTopology | None = None, degree: int = DOF_DEGREE) -> float:
    """Mean outward normal flux of ``q`` through local edge ``i``.

    ``q`` may be an AffineVectorField or PiecewiseRTFunction (evaluated exactly),
    a pair ``(q_plus, q_minus)`` of callables used on the respective sides of the
    edge split, or a single callable. Callables use Gauss quadrature, split at
    the interface point when ``cut`` is given.
    """
    T = np.asarray(T, dtype=float)
    lengths, normals, _ = triangle_geometry(T)
    n = normals[i]
    a, b = _edge_endpoints(T, i)
    if isinstance(q, AffineVectorField):
        return float(q(0.5 * (a + b)) @ n)
    if isinstance(q, PiecewiseRTFunction):
        total = 0.0
        for pa, pb, side in q.cut.edge_pieces(i):
            total += np.linalg.norm(pb - pa) * float(q.piece(side)(0.5 * (pa + pb)) @ n)
        return total / lengths[i]
    if isinstance(q, tuple):
        q_plus, q_minus = q
        if cut is None:
            raise ValueError("a side-wise pair needs a cut")
        total = 0.0
        for pa, pb, side in cut.edge_pieces(i):
            f = q_plus if side > 0 else q_minus
            total += integrate_segment(pa, pb, lambda x: f(x) @ n, degree)
        return total / lengths[i]
    if cut is not None:
        total = 0.0
        for pa, pb, _ in cut.edge_pieces(i):
            total += integrate_segment(pa, pb, lambda x: q(x) @ n, degree)
        return total / lengths[i]
    return integrate_segment(a, b, lambda x: q(x) @ n, degree) / lengths[i]


def dofs(q, T, cut: CutTopology | None = None, degree: int = DOF_DEGREE) -> np.ndarray:
    return np.array([dof_functional(q, T, i, cut, degree) for i in range(3)])


def rt_interpolate(q, T, cut: CutTopology | None = None) -> AffineVectorField:
    return combine(dofs(q, T, cut), rt_basis(T))


def build_omega(T, cut: CutTopology):
    """omega = t_h on the plus piece, 0 on the minus piece; its RT0 interpolant and theta.

    theta = (Pi omega)(x_T) . t_h, which lies in [0, 1] on triangles without
    obtuse angles.
    """
    omega = PiecewiseRTFunction(AffineVectorField.constant(cut.t_h), ZERO, cut)
    proj = rt_interpolate(omega, T)
    theta = float(proj(cut.x_T) @ cut.t_h)
    if theta < -THETA_TOL or theta > 1.0 + THETA_TOL:
        raise AssumptionViolation(
            f"element {cut.element_id}: theta_omega={theta:.3e} outside [0, 1]; maximum angle condition violated")
    return omega, proj, theta


def ife_basis(T, cut: CutTopology) -> LocalBasis:
    """Immersed basis from the closed-form correction of the standard RT0 basis."""
    bp, bm = cut.beta_plus, cut.beta_minus
    if not (bp > 0 and bm > 0):
        raise NonPositiveCoefficient(f"element {cut.element_id}: beta_T must be positive, got ({bp}, {bm})")
    T = np.asarray(T, dtype=float)
    lam = rt_basis(T)
    _, proj, theta = build_omega(T, cut)
    ratio = bm / bp
    denom = 1.0 + (ratio - 1.0) * theta
    jt_plus = AffineVectorField.constant(cut.t_h) - proj
    jt_minus = -proj
    fields, mus = [], []
    for li in lam:
        mu = (ratio - 1.0) * float(li(cut.x_T) @ cut.t_h) / denom
        mus.append(mu)
        fields.append(PiecewiseRTFunction(li + jt_plus * mu, li + jt_minus * mu, cut))
    return LocalBasis(tuple(fields), theta, tuple(mus), denom, proj)


def ife_interpolate(q, T, cut: CutTopology, basis: LocalBasis | None = None) -> PiecewiseRTFunction:
    basis = ife_basis(T, cut) if basis is None else basis
    return combine(dofs(q, T, cut), basis.fields)


def _interpolation_gap(z: PiecewiseRTFunction, T, basis: LocalBasis) -> PiecewiseRTFunction:
    return z - combine(dofs(z, T), basis.fields)


def auxiliary_functions(T, cut: CutTopology, basis: LocalBasis | None = None):
    """(Psi, Upsilon, Theta): zero DOFs and unit normal / scaled tangential / divergence jump."""
    T = np.asarray(T, dtype=float)
    basis = ife_basis(T, cut) if basis is None else basis
    psi = _interpolation_gap(PiecewiseRTFunction(AffineVectorField.constant(cut.n_h), ZERO, cut), T, basis)
    if cut.beta_plus > cut.beta_minus:
        z = PiecewiseRTFunction(AffineVectorField.constant(cut.t_h / cut.beta_plus), ZERO, cut)
    else:
        z = PiecewiseRTFunction(ZERO, AffineVectorField.constant(-cut.t_h / cut.beta_minus), cut)
    upsilon = _interpolation_gap(z, T, basis)
    xt = cut.x_T
    half = AffineVectorField(-0.5 * xt[0], -0.5 * xt[1], 0.5)
    theta = _interpolation_gap(PiecewiseRTFunction(half, ZERO, cut), T, basis)
    return psi, upsilon, theta


def field_l2_norm(f: Field, T, cut: CutTopology | None = None) -> float:
    """L2 norm over T; piecewise fields use their own side of the cut line."""
    if isinstance(f, PiecewiseRTFunction):
        total = 0.0
        for tris, piece in ((f.cut.sub_triangles_plus, f.plus), (f.cut.sub_triangles_minus, f.minus)):
            for tri in tris:
                pts, w = map_triangle_points(tri, 2)
                v = piece(pts)
                total += float(w @ np.einsum("ij,ij->i", v, v))
        return float(np.sqrt(total))
    pts, w = map_triangle_points(np.asarray(T, dtype=float), 2)
    v = f(pts)
    return float(np.sqrt(w @ np.einsum("ij,ij->i", v, v)))


def piece_sup_norm(f: AffineVectorField, T) -> float:
    """Sup of |f| over the triangle; |f| is convex so the max sits at a vertex."""
    return float(np.max(np.linalg.norm(f(np.asarray(T, dtype=float)), axis=1)))
