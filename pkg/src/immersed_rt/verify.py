"""Property suites run by ``immersed-rt verify``.

Each suite returns a JSON-serialisable summary with a ``passed`` flag, sample
counts and the worst observed margins.
"""
from __future__ import annotations

import math

import numpy as np

from .analysis import commuting_check, discretize, interpolation_study
from .elements import auxiliary_functions, field_l2_norm, ife_basis
from .exceptions import AssumptionViolation
from .geometry import build_uniform_mesh, circle, classify_mesh, make_cut, polygon_area, polyline_interface
from .problems import example1

SUITES = ("unisolvence", "commuting", "interpolation", "auxiliary", "geometry")


def random_right_or_acute_triangle(rng: np.random.Generator) -> np.ndarray:
    """Counterclockwise triangle with all angles <= pi/2 and unit-order size."""
    while True:
        T = rng.uniform(-1.0, 1.0, size=(3, 2))
        d = [T[(i + 1) % 3] - T[i] for i in range(3)]
        cross = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        if abs(cross) < 1e-2:
            continue
        if cross < 0:
            T = T[[0, 2, 1]]
        ok = all(np.dot(T[(i + 1) % 3] - T[i], T[(i + 2) % 3] - T[i]) >= 0 for i in range(3))
        if ok:
            return T


def random_cut(rng: np.random.Generator, T=None, lone=None, lone_side=None, s_range=(1e-3, 1 - 1e-3)):
    """Straight cut separating one vertex of ``T`` from the other two.

    Returns the triangle and its CutTopology; the cut points sit at relative
    positions drawn from ``s_range`` on the two edges adjacent to the lone vertex.
    """
    T = random_right_or_acute_triangle(rng) if T is None else np.asarray(T, dtype=float)
    k = int(rng.integers(3)) if lone is None else lone
    side = int(rng.choice([-1, 1])) if lone_side is None else lone_side
    a, b = (k + 1) % 3, (k + 2) % 3
    s1, s2 = rng.uniform(*s_range, size=2)
    points = {b: T[k] + s1 * (T[a] - T[k]),  # local edge b joins k and a
              a: T[k] + s2 * (T[b] - T[k])}
    sides = np.full(3, -side)
    sides[k] = side
    return T, make_cut(0, T, sides, points)


def case1_theta(T, cut) -> float:
    """theta_omega from the angle identity, with A3 the lone vertex.

    theta = |DA3| sin(angle) cos(gamma) / (|e1| sin(A2)) written as
    (n_h . (A3 - D)) ((A2 - A1) . t_h) / (2|T|) when A3 lies on the plus side.
    """
    k = cut.lone_vertex
    A1, A2, A3 = T[(k + 1) % 3], T[(k + 2) % 3], T[k]
    D = cut.split_point((k + 1) % 3)  # the point on A2A3 (edge opposite A1)
    area = 0.5 * abs((A2 - A1)[0] * (A3 - A1)[1] - (A2 - A1)[1] * (A3 - A1)[0])
    n, t = cut.n_h, cut.t_h
    if cut.vertex_sides[k] < 0:
        n, t = -n, -t
    theta = float(n @ (A3 - D)) * float((A2 - A1) @ t) / (2.0 * area)
    return theta if cut.vertex_sides[k] > 0 else 1.0 - theta


def unisolvence(samples: int = 10_000, seed: int = 42, contrast_range=(1e-3, 1e3)) -> dict:
    rng = np.random.default_rng(seed)
    lo, hi = np.log10(contrast_range[0]), np.log10(contrast_range[1])
    worst_denom = math.inf
    theta_lo, theta_hi = math.inf, -math.inf
    worst_closed = 0.0
    failures = 0
    for _ in range(samples):
        T, cut = random_cut(rng)
        ratio = 10.0 ** rng.uniform(lo, hi)  # beta^- / beta^+
        cut = cut.with_coefficients(1.0, ratio)
        basis = ife_basis(T, cut)
        margin = basis.denominator - min(1.0, ratio)
        worst_denom = min(worst_denom, margin)
        theta_lo = min(theta_lo, basis.theta_omega)
        theta_hi = max(theta_hi, basis.theta_omega)
        gap = abs(basis.theta_omega - case1_theta(T, cut))
        worst_closed = max(worst_closed, gap)
        if margin < -1e-12 or not (-1e-12 <= basis.theta_omega <= 1 + 1e-12) or gap > 1e-10:
            failures += 1
    return dict(suite="unisolvence", passed=failures == 0, samples=samples, seed=seed, failures=failures,
                min_denominator_margin=worst_denom, theta_min=theta_lo, theta_max=theta_hi,
                max_closed_form_gap=worst_closed)


def random_polynomial_field(rng: np.random.Generator, degree: int = 3):
    """Random vector field with polynomial components and its divergence."""
    powers = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    c1 = rng.normal(size=len(powers))
    c2 = rng.normal(size=len(powers))

    def q(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        m = np.stack([x1 ** i * x2 ** j for i, j in powers], axis=-1)
        return np.stack([m @ c1, m @ c2], axis=-1)

    def div(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        d1 = sum(c * i * x1 ** (i - 1) * x2 ** j for c, (i, j) in zip(c1, powers) if i > 0)
        d2 = sum(c * j * x1 ** i * x2 ** (j - 1) for c, (i, j) in zip(c2, powers) if j > 0)
        return d1 + d2 + 0.0 * x1

    return q, div


def commuting(N: int = 16, r0: float = 0.5, fields: int = 20, seed: int = 42, tol: float = 1e-11) -> dict:
    rng = np.random.default_rng(seed)
    problem = example1(r0)
    mesh, cls = discretize(problem, N)
    defects = []
    for _ in range(fields):
        q, div = random_polynomial_field(rng, int(rng.integers(0, 4)))
        defects.append(commuting_check(q, div, mesh, cls))
    worst = max(defects)
    return dict(suite="commuting", passed=worst <= tol, N=N, r0=r0, fields=fields, seed=seed,
                interface_elements=len(cls.cuts), max_defect=worst, tolerance=tol)


def interpolation(N_list=(8, 16, 32, 64, 128), r0: float = 0.5, band=(0.85, 1.15)) -> dict:
    report = interpolation_study(example1(r0), list(N_list))
    final = report.rate_p[-1]
    return dict(suite="interpolation", passed=band[0] <= final <= band[1], N=list(N_list),
                errors=report.column("err_p"), rates=report.rate_p[1:], final_rate=final, band=list(band))


def auxiliary_scaling(hs=None, contrast: float = 100.0) -> dict:
    """log-log slopes of ||Psi||, ||Upsilon||, ||Theta|| over a similar family of cut triangles."""
    hs = [2.0 ** -k for k in range(2, 7)] if hs is None else list(hs)
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    norms = []
    for h in hs:
        T = h * ref + np.array([0.3, -0.2])
        points = {2: T[0] + 0.37 * (T[1] - T[0]), 1: T[0] + 0.61 * (T[2] - T[0])}
        cut = make_cut(0, T, [1, -1, -1], points, beta_plus=contrast, beta_minus=1.0)
        psi, ups, theta = auxiliary_functions(T, cut)
        norms.append([field_l2_norm(f, T) for f in (psi, ups, theta)])
    norms = np.array(norms)
    slopes = [float(np.polyfit(np.log(hs), np.log(norms[:, k]), 1)[0]) for k in range(3)]
    expected = [1.0, 1.0, 2.0]
    ok = all(abs(s - e) <= 0.1 for s, e in zip(slopes, expected))
    return dict(suite="auxiliary", passed=ok, h=hs, slopes=dict(psi=slopes[0], upsilon=slopes[1], theta=slopes[2]),
                expected=dict(psi=1.0, upsilon=1.0, theta=2.0))


def geometry(N: int = 8, r0: float = 0.5) -> dict:
    mesh = build_uniform_mesh(N)
    ls = circle(r0)
    try:
        cls = classify_mesh(mesh, ls)
        line = polyline_interface(cls)
    except AssumptionViolation as exc:
        return dict(suite="geometry", passed=False, N=N, r0=r0, error=type(exc).__name__, message=str(exc))
    area_gap = 0.0
    centroid_bad = 0
    for t, cut in cls.cuts.items():
        total = abs(polygon_area(cut.plus_polygon)) + abs(polygon_area(cut.minus_polygon))
        area_gap = max(area_gap, abs(total - mesh.areas[t]) / mesh.areas[t])
        for tri in cut.sub_triangles_plus:
            centroid_bad += int(ls(tri.mean(axis=0)) <= 0)
        for tri in cut.sub_triangles_minus:
            centroid_bad += int(ls(tri.mean(axis=0)) >= 0)
    counts_ok = (mesh.n_triangles == 2 * N * N and mesh.n_edges == 3 * N * N + 2 * N
                 and mesh.n_vertices == (N + 1) ** 2)
    return dict(suite="geometry", passed=bool(counts_ok and area_gap <= 1e-12 and line.n_segments == len(cls.cuts)),
                N=N, r0=r0, interface_elements=len(cls.cuts), interface_edges=int(cls.edge_cut.sum()),
                max_area_gap=area_gap, polyline_segments=line.n_segments, loops=len(line.loops),
                polyline_max_distance=line.max_distance(ls), centroid_side_mismatches=centroid_bad)


def run_suite(name: str, seed: int = 42, N: int | None = None, r0: float | None = None) -> dict:
    if name == "unisolvence":
        return unisolvence(seed=seed)
    if name == "commuting":
        return commuting(N=N or 16, r0=0.5 if r0 is None else r0, seed=seed)
    if name == "interpolation":
        return interpolation(r0=0.5 if r0 is None else r0)
    if name == "auxiliary":
        return auxiliary_scaling()
    if name == "geometry":
        return geometry(N=N or 8, r0=0.5 if r0 is None else r0)
    raise KeyError(f"unknown suite {name!r}; choose from {SUITES}")
