"""Error norms, interpolation studies and convergence tables."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assembly import MixedSystem, _rt_values, assemble_system, build_dof_map, edge_jump_vectors, local_bases
from .elements import DOF_DEGREE, AffineVectorField, ife_interpolate, rt_interpolate
from .geometry import Classification, Mesh, build_uniform_mesh, classify_mesh
from .problems import ProblemSpec
from .quadrature import integrate_segment, map_triangle_points, segment_rule
from .solver import MixedSolution, solve

log = logging.getLogger(__name__)

ERROR_DEGREE = 6


def discretize(problem: ProblemSpec, N: int, domain=(-1.0, 1.0, -1.0, 1.0)):
    mesh = build_uniform_mesh(N, domain)
    cls = classify_mesh(mesh, problem.level_set, beta=(problem.beta_plus, problem.beta_minus))
    return mesh, cls


def element_pieces(system_or_bases, mesh: Mesh, flux: np.ndarray, t: int):
    """Local (plus, minus) affine pieces of a global flux vector on interface element ``t``."""
    bases = system_or_bases.bases if isinstance(system_or_bases, MixedSystem) else system_or_bases
    dm = build_dof_map(mesh)
    c = dm.orientation_sign[t] * flux[mesh.tri_edges[t]]
    pieces = bases[t]
    plus = AffineVectorField.from_coef(sum(ci * pc[0].coef for ci, pc in zip(c, pieces)))
    minus = AffineVectorField.from_coef(sum(ci * pc[1].coef for ci, pc in zip(c, pieces)))
    return plus, minus


def flux_l2_error(mesh: Mesh, cls: Classification, bases: dict, flux: np.ndarray, p_exact,
                  degree: int = ERROR_DEGREE) -> float:
    """||p - p_h||_{L2}: exact flux on the true side, discrete flux on the discrete side."""
    dm = build_dof_map(mesh)
    non = np.flatnonzero(cls.element_side != 0)
    X = mesh.coords()[non]
    pts, w = map_triangle_points(X, degree)
    c = dm.orientation_sign[non] * flux[mesh.tri_edges[non]]
    ph = np.einsum("tqid,ti->tqd", _rt_values(X, pts), c)
    diff = p_exact(pts) - ph
    total = float(np.einsum("tq,tqd,tqd->", w, diff, diff))
    for t, cut in cls.cuts.items():
        plus, minus = element_pieces(bases, mesh, flux, t)
        for tris, piece in ((cut.sub_triangles_plus, plus), (cut.sub_triangles_minus, minus)):
            for tri in tris:
                p, ww = map_triangle_points(tri, degree)
                d = p_exact(p) - piece(p)
                total += float(ww @ np.einsum("qd,qd->q", d, d))
    return math.sqrt(total)


def scalar_l2_error(mesh: Mesh, cls: Classification, u_h: np.ndarray, u_exact,
                    degree: int = ERROR_DEGREE) -> float:
    non = np.flatnonzero(cls.element_side != 0)
    pts, w = map_triangle_points(mesh.coords()[non], degree)
    diff = u_exact(pts) - u_h[non, None]
    total = float(np.einsum("tq,tq->", w, diff * diff))
    for t, cut in cls.cuts.items():
        for tri in cut.sub_triangles_plus + cut.sub_triangles_minus:
            p, ww = map_triangle_points(tri, degree)
            d = u_exact(p) - u_h[t]
            total += float(ww @ (d * d))
    return math.sqrt(total)


def jump_seminorm(mesh: Mesh, cls: Classification, bases: dict, flux: np.ndarray) -> float:
    """(sum over interior interface edges of ||[q . n_e]||^2_{L2(e)})^(1/2)."""
    dm = build_dof_map(mesh)
    total = 0.0
    for e in np.flatnonzero(cls.edge_cut & ~mesh.boundary):
        for length, dofs, vals in edge_jump_vectors(mesh, cls, dm, bases, e):
            total += length * float(vals @ flux[dofs]) ** 2
    return math.sqrt(total)


@dataclass(frozen=True)
class Errors:
    err_p: float
    err_u: float
    jump: float
    energy: float  # mesh-dependent norm of p - p_h


def l2_errors(solution: MixedSolution, system: MixedSystem, problem: ProblemSpec) -> Errors:
    mesh, cls = system.mesh, system.cls
    ep = flux_l2_error(mesh, cls, system.bases, solution.flux_coefficients, problem.p)
    eu = scalar_l2_error(mesh, cls, solution.scalar_values, problem.u)
    jump = jump_seminorm(mesh, cls, system.bases, solution.flux_coefficients)
    # the exact flux has no normal jumps, so the jump term of p - p_h is that of p_h
    return Errors(ep, eu, jump, math.sqrt(ep ** 2 + system.eta * jump ** 2))


def divergence_defect(solution: MixedSolution, system: MixedSystem) -> float:
    """max_T |div p_h + P0 f| with the element mean of f taken from the load vector."""
    div = (system.B @ solution.flux_coefficients) / system.mesh.areas
    return float(np.max(np.abs(div - system.F / system.mesh.areas)))


def flux_dofs(mesh: Mesh, cls: Classification, problem: ProblemSpec, degree: int = DOF_DEGREE) -> np.ndarray:
    """Mean normal flux of the exact p through every edge (canonical normals).

    Cut edges are split at the interface point and each part uses its own side's closed form.
    """
    V = mesh.vertices
    rule = segment_rule(degree)
    a = V[mesh.edges[:, 0]]
    b = V[mesh.edges[:, 1]]
    pts = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    vals = np.einsum("eqd,ed->eq", problem.p(pts), mesh.edge_normals)
    out = vals @ rule.weights
    n_e = mesh.edge_normals
    for e in np.flatnonzero(cls.edge_cut):
        s = cls.edge_points[e]
        first = cls.vertex_sides[mesh.edges[e, 0]]
        fa = problem.exact_p_plus if first > 0 else problem.exact_p_minus
        fb = problem.exact_p_minus if first > 0 else problem.exact_p_plus
        total = integrate_segment(a[e], s, lambda x: fa(x) @ n_e[e], degree)
        total += integrate_segment(s, b[e], lambda x: fb(x) @ n_e[e], degree)
        out[e] = total / mesh.edge_lengths[e]
    return out


def interpolation_error(problem: ProblemSpec, N: int, method: str = "immersed") -> float:
    """||p - Pi_h p||_{L2} for the immersed (or standard) interpolant."""
    mesh, cls = discretize(problem, N)
    bases = local_bases(mesh, cls, method)
    return flux_l2_error(mesh, cls, bases, flux_dofs(mesh, cls, problem), problem.p)


def commuting_check(q, div_q, mesh: Mesh, cls: Classification) -> float:
    """max_T |div(interpolant of q) - mean_T(div q)|, both pieces on interface elements."""
    worst = 0.0
    for t in range(mesh.n_triangles):
        T = mesh.coords(t)
        pts, w = map_triangle_points(T, ERROR_DEGREE)
        mean = float(w @ div_q(pts)) / mesh.areas[t]
        if t in cls.cuts:
            f = ife_interpolate(q, T, cls.cuts[t])
            worst = max(worst, abs(f.plus.divergence - mean), abs(f.minus.divergence - mean))
        else:
            worst = max(worst, abs(rt_interpolate(q, T).divergence - mean))
    return worst


def rates(errors: Sequence[float], N_list: Sequence[int] | None = None) -> list:
    """log2(e_prev / e_cur); None where the mesh was not exactly doubled."""
    N_list = [2 ** k for k in range(len(errors))] if N_list is None else N_list
    out = [None]
    for k in range(1, len(errors)):
        prev, cur = errors[k - 1], errors[k]
        doubled = N_list[k] == 2 * N_list[k - 1]
        out.append(math.log2(prev / cur) if doubled and prev > 0 and cur > 0 else None)
    return out


@dataclass(frozen=True)
class ErrorRow:
    N: int
    h: float
    err_p: float
    err_u: float = float("nan")
    jump: float = float("nan")
    energy: float = float("nan")


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)
    title: str = ""

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def rates(self, name: str = "err_p") -> list:
        return rates(self.column(name), self.column("N"))

    @property
    def rate_p(self) -> list:
        return self.rates("err_p")

    @property
    def rate_u(self) -> list:
        return self.rates("err_u")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "err_p", "rate_p", "err_u", "rate_u", "jump_seminorm"])
        for row, rp, ru in zip(self.rows, self.rate_p, self.rate_u):
            w.writerow([row.N, repr(row.err_p), "" if rp is None else repr(rp),
                        repr(row.err_u), "" if ru is None else repr(ru), repr(row.jump)])
        return buf.getvalue()

    def to_table(self) -> str:
        head = f"{'N':>6} | {'||p-p_h||':>10} {'rate':>6} | {'||u-u_h||':>10} {'rate':>6} | {'jump':>10}"
        lines = [self.title, head, "-" * len(head)] if self.title else [head, "-" * len(head)]
        for row, rp, ru in zip(self.rows, self.rate_p, self.rate_u):
            lines.append(f"{row.N:>6} | {row.err_p:>10.3E} {_fmt_rate(rp):>6} | "
                         f"{row.err_u:>10.3E} {_fmt_rate(ru):>6} | {row.jump:>10.3E}")
        return "\n".join(lines)


def _fmt_rate(r) -> str:
    return "" if r is None or not np.isfinite(r) else f"{r:.2f}"


def check_doubling(N_list: Sequence[int]) -> None:
    """N values must be the smallest entry times strictly increasing powers of two."""
    if not N_list or any(int(n) != n or n < 1 for n in N_list):
        raise ValueError(f"N values must be positive integers, got {list(N_list)}")
    for a, b in zip(N_list[:-1], N_list[1:]):
        q = b / a
        if b <= a or q != int(q) or int(q) & (int(q) - 1):
            raise ValueError(f"N values must grow by powers of two: got {a} then {b}")


def solve_problem(problem: ProblemSpec, N: int, method: str = "immersed", eta: float = 1.0,
                  backend: str = "direct"):
    mesh, cls = discretize(problem, N)
    system = assemble_system(mesh, cls, problem, method, eta)
    solution = solve(system, backend=backend)
    return system, solution


def convergence_table(problem: ProblemSpec, method: str, eta: float, N_list: Sequence[int],
                      backend: str = "direct") -> ErrorReport:
    check_doubling(N_list)
    label = "Traditional RT" if method == "traditional" else f"Immersed RT (eta={eta:g})"
    report = ErrorReport(title=f"{problem.name}: {label}")
    for N in N_list:
        system, solution = solve_problem(problem, N, method, eta, backend)
        err = l2_errors(solution, system, problem)
        log.info("N=%d err_p=%.4e err_u=%.4e", N, err.err_p, err.err_u)
        report.rows.append(ErrorRow(N, system.mesh.h, err.err_p, err.err_u, err.jump, err.energy))
    return report


def interpolation_study(problem: ProblemSpec, N_list: Sequence[int]) -> ErrorReport:
    check_doubling(N_list)
    report = ErrorReport(title=f"{problem.name}: immersed interpolation error")
    for N in N_list:
        report.rows.append(ErrorRow(N, 2.0 * math.sqrt(2.0) / N, interpolation_error(problem, N)))
    return report
