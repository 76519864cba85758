"""Global degrees of freedom and the penalized saddle-point system."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import LocalBasis, ife_basis, rt_basis
from .geometry import LOCAL_EDGES, Classification, Mesh
from .problems import ProblemSpec
from .quadrature import integrate_segment, map_triangle_points

METHODS = ("traditional", "immersed")


@dataclass(frozen=True)
class DofMap:
    edge_dof_count: int
    element_dof_count: int
    orientation_sign: np.ndarray  # (nt, 3): local outward normal vs canonical edge normal
    tri_edges: np.ndarray


def build_dof_map(mesh: Mesh) -> DofMap:
    nt = mesh.n_triangles
    first = mesh.edge_to_elements[mesh.tri_edges, 0]
    signs = np.where(first == np.arange(nt)[:, None], 1, -1)
    return DofMap(mesh.n_edges, nt, signs, mesh.tri_edges)


def local_bases(mesh: Mesh, cls: Classification, method: str) -> dict:
    """Per interface element: the three local basis functions as (plus, minus) pieces."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    out = {}
    for t, cut in cls.cuts.items():
        T = mesh.coords(t)
        if method == "immersed":
            basis = ife_basis(T, cut)
            pieces = tuple((f.plus, f.minus) for f in basis.fields)
        else:
            basis = LocalBasis(rt_basis(T))
            pieces = tuple((f, f) for f in basis.fields)
        out[t] = pieces
    return out


def _rt_values(X, pts):
    """Standard basis values (..., nq, 3, 2) at points ``pts`` of triangles ``X``."""
    d = [X[:, q] - X[:, p] for p, q in LOCAL_EDGES]
    lengths = np.stack([np.linalg.norm(v, axis=1) for v in d], axis=1)
    d1, d2 = X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    s = lengths / (2.0 * area[:, None])  # (nt, 3)
    return s[:, None, :, None] * (pts[:, :, None, :] - X[:, None, :, :])


def _beta_on_side(problem: ProblemSpec, pts, side):
    side = np.asarray(side)
    bp = problem.beta_plus(pts)
    bm = problem.beta_minus(pts)
    return np.where(side[..., None] > 0, bp, bm) if side.ndim else (bp if side > 0 else bm)


def _piece_mass(pieces, tris, beta, side, degree=2):
    """Mass matrix contribution of one side: sum over sub-triangles of int beta phi_i . phi_j."""
    M = np.zeros((3, 3))
    for tri in tris:
        pts, w = map_triangle_points(tri, degree)
        b = beta(pts)
        vals = np.stack([pc[0 if side > 0 else 1](pts) for pc in pieces])  # (3, nq, 2)
        M += np.einsum("q,iqd,jqd->ij", w * b, vals, vals)
    return M


def _scatter(dm: DofMap, elems, local, n):
    signs = dm.orientation_sign[elems]
    glob = dm.tri_edges[elems]
    local = local * signs[:, :, None] * signs[:, None, :]
    rows = np.repeat(glob, 3, axis=1).ravel()
    cols = np.tile(glob, (1, 3)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_a(mesh: Mesh, cls: Classification, problem: ProblemSpec, method: str,
               dm: DofMap | None = None, bases: dict | None = None) -> sp.csr_matrix:
    """int beta_h p . q with beta^+ on the plus side of the discrete interface, beta^- on the minus side."""
    dm = build_dof_map(mesh) if dm is None else dm
    bases = local_bases(mesh, cls, method) if bases is None else bases
    n = mesh.n_edges
    non = np.flatnonzero(cls.element_side != 0)
    X = mesh.coords()[non]
    pts, w = map_triangle_points(X, 2)
    beta = _beta_on_side(problem, pts, cls.element_side[non])
    vals = _rt_values(X, pts)
    local = np.einsum("tq,tqid,tqjd->tij", w * beta, vals, vals)
    A = _scatter(dm, non, local, n)

    ife = np.array(sorted(cls.cuts), dtype=np.int64)
    if len(ife):
        loc = np.empty((len(ife), 3, 3))
        for k, t in enumerate(ife):
            cut = cls.cuts[t]
            pieces = bases[t]
            loc[k] = (_piece_mass(pieces, cut.sub_triangles_plus, problem.beta_plus, +1)
                      + _piece_mass(pieces, cut.sub_triangles_minus, problem.beta_minus, -1))
        A = A + _scatter(dm, ife, loc, n)
    return A.tocsr()


def edge_jump_vectors(mesh: Mesh, cls: Classification, dm: DofMap, bases: dict, e: int):
    """Normal-trace jumps of the global basis on the two sub-segments of interface edge ``e``.

    Returns [(length, dof indices, jump values), ...] for the plus and minus pieces.
    """
    t1, t2 = mesh.edge_to_elements[e]
    n_e = mesh.edge_normals[e]
    split = cls.edge_points[e]
    a, b = mesh.vertices[mesh.edges[e]]
    sa = cls.vertex_sides[mesh.edges[e, 0]]
    pieces = [(a, split, sa), (split, b, -sa)]
    out = []
    for pa, pb, side in pieces:
        mid = 0.5 * (pa + pb)
        dofs, vals = [], []
        for t, sgn_elem in ((t1, 1.0), (t2, -1.0)):
            for j in range(3):
                field = bases[t][j][0 if side > 0 else 1]
                dofs.append(dm.tri_edges[t, j])
                vals.append(sgn_elem * dm.orientation_sign[t, j] * float(field(mid) @ n_e))
        out.append((float(np.linalg.norm(pb - pa)), np.array(dofs), np.array(vals)))
    return out


def assemble_penalty(mesh: Mesh, cls: Classification, eta: float, dm: DofMap | None = None,
                     bases: dict | None = None, method: str = "immersed") -> sp.csr_matrix:
    """eta * sum over interior interface edges of int [p . n_e][q . n_e], without edge-length scaling."""
    if eta < 0:
        raise ValueError("penalty parameter must be non-negative")
    n = mesh.n_edges
    if eta == 0 or not cls.cuts:
        return sp.csr_matrix((n, n))
    dm = build_dof_map(mesh) if dm is None else dm
    bases = local_bases(mesh, cls, method) if bases is None else bases
    rows, cols, data = [], [], []
    for e in np.flatnonzero(cls.edge_cut & ~mesh.boundary):
        for length, dofs, vals in edge_jump_vectors(mesh, cls, dm, bases, e):
            rows.append(np.repeat(dofs, len(dofs)))
            cols.append(np.tile(dofs, len(dofs)))
            data.append(eta * length * np.outer(vals, vals).ravel())
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


def assemble_b(mesh: Mesh, dm: DofMap | None = None) -> sp.csr_matrix:
    """B[T, e_i(T)] = sign * |e_i|: the exact element integral of the basis divergence."""
    dm = build_dof_map(mesh) if dm is None else dm
    nt = mesh.n_triangles
    rows = np.repeat(np.arange(nt), 3)
    cols = dm.tri_edges.ravel()
    vals = (dm.orientation_sign * mesh.edge_lengths[dm.tri_edges]).ravel()
    return sp.coo_matrix((vals, (rows, cols)), shape=(nt, mesh.n_edges)).tocsr()


def element_integrals(mesh: Mesh, cls: Classification, f, degree: int = 4) -> np.ndarray:
    """int_T f for every element, splitting interface elements into their sub-triangles."""
    out = np.zeros(mesh.n_triangles)
    non = np.flatnonzero(cls.element_side != 0)
    pts, w = map_triangle_points(mesh.coords()[non], degree)
    out[non] = np.einsum("tq,tq->t", w, f(pts))
    for t, cut in cls.cuts.items():
        total = 0.0
        for tri in cut.sub_triangles_plus + cut.sub_triangles_minus:
            p, ww = map_triangle_points(tri, degree)
            total += float(ww @ f(p))
        out[t] = total
    return out


def assemble_rhs(problem: ProblemSpec, mesh: Mesh, cls: Classification, dm: DofMap | None = None):
    """(G, F): natural Dirichlet term int_{boundary} g q.n and F_T = -int_T f."""
    dm = build_dof_map(mesh) if dm is None else dm
    F = -element_integrals(mesh, cls, problem.f, degree=4)
    G = np.zeros(mesh.n_edges)
    bnd = np.flatnonzero(mesh.boundary)
    # boundary edges are never cut, so every basis trace there is constant 1 or 0
    V = mesh.vertices
    for e in bnd:
        a, b = V[mesh.edges[e]]
        G[e] = integrate_segment(a, b, problem.boundary_g, 4)
    return G, F


@dataclass
class MixedSystem:
    A: sp.csr_matrix
    B: sp.csr_matrix
    G: np.ndarray
    F: np.ndarray
    eta: float
    method: str
    mesh: Mesh = field(repr=False)
    cls: Classification = field(repr=False)
    dof_map: DofMap = field(repr=False)
    bases: dict = field(repr=False, default_factory=dict)
    penalty: sp.csr_matrix | None = field(repr=False, default=None)

    @property
    def shape(self) -> tuple:
        n = self.A.shape[0] + self.B.shape[0]
        return (n, n)

    def matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.A, self.B.T], [self.B, None]], format="csc")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.G, self.F])


def assemble_system(mesh: Mesh, cls: Classification, problem: ProblemSpec, method: str = "immersed",
                    eta: float = 1.0) -> MixedSystem:
    """[[A + S, B^T], [B, 0]] [p; u] = [G; F]; the penalty S is only used by the immersed method."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    dm = build_dof_map(mesh)
    bases = local_bases(mesh, cls, method)
    A = assemble_a(mesh, cls, problem, method, dm, bases)
    S = None
    if method == "immersed":
        S = assemble_penalty(mesh, cls, eta, dm, bases)
        A = (A + S).tocsr()
    B = assemble_b(mesh, dm)
    G, F = assemble_rhs(problem, mesh, cls, dm)
    assert A.shape == (mesh.n_edges, mesh.n_edges) and B.shape == (mesh.n_triangles, mesh.n_edges)
    return MixedSystem(A, B, G, F, float(eta), method, mesh, cls, dm, bases, S)
