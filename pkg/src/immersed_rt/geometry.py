"""Structured triangulations, level-set interfaces and cut-element geometry."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import AssumptionViolation, TopologyError

# local edge i is opposite local vertex i
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


def rotate_clockwise(v) -> np.ndarray:
    """Rotation by -pi/2: (x, y) -> (y, -x)."""
    v = np.asarray(v, dtype=float)
    return np.array([v[1], -v[0]])


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counterclockwise
    edges: np.ndarray  # (ne, 2) vertex pairs, smaller index first
    edge_normals: np.ndarray  # (ne, 2) canonical unit normals
    edge_lengths: np.ndarray
    edge_to_elements: np.ndarray  # (ne, 2), second entry -1 on the boundary
    boundary: np.ndarray  # (ne,) bool
    tri_edges: np.ndarray  # (nt, 3) global edge of local edge i
    areas: np.ndarray
    h: float
    N: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def coords(self, t=None) -> np.ndarray:
        """Vertex coordinates of all triangles (nt, 3, 2) or of triangle ``t``."""
        if t is None:
            return self.vertices[self.triangles]
        return self.vertices[self.triangles[t]]

    def outward_normals(self) -> np.ndarray:
        """Outward unit normals (nt, 3, 2) of each local edge."""
        X = self.coords()
        out = np.empty_like(X)
        for i, (a, b) in enumerate(LOCAL_EDGES):
            d = X[:, b] - X[:, a]
            L = np.linalg.norm(d, axis=1)
            out[:, i, 0] = d[:, 1] / L
            out[:, i, 1] = -d[:, 0] / L
        return out

    def max_angles(self) -> np.ndarray:
        X = self.coords()
        angles = np.empty((len(X), 3))
        for k in range(3):
            u = X[:, (k + 1) % 3] - X[:, k]
            v = X[:, (k + 2) % 3] - X[:, k]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles[:, k] = np.arccos(np.clip(c, -1.0, 1.0))
        return angles.max(axis=1)


def mesh_from_triangles(vertices, triangles, N: int = 0) -> Mesh:
    """Build edge connectivity for a conforming triangulation."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64).copy()
    X = vertices[triangles]
    signed = 0.5 * ((X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1])
                    - (X[:, 1, 1] - X[:, 0, 1]) * (X[:, 2, 0] - X[:, 0, 0]))
    if np.any(signed == 0.0):
        raise ValueError("degenerate triangle")
    flip = signed < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    areas = np.abs(signed)
    nt = len(triangles)

    local = np.stack([triangles[:, [a, b]] for a, b in LOCAL_EDGES], axis=1)  # (nt, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    tri_edges = inverse.reshape(nt, 3)
    ne = len(edges)

    owner = np.repeat(np.arange(nt), 3)
    order = np.lexsort((owner, inverse))
    counts = np.bincount(inverse, minlength=ne)
    if np.any(counts > 2):
        raise ValueError("non-manifold edge")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    e2t = np.full((ne, 2), -1, dtype=np.int64)
    e2t[:, 0] = owner[order][starts]
    two = counts == 2
    e2t[two, 1] = owner[order][starts[two] + 1]

    # canonical normal: exterior to the first (lowest-index) incident triangle
    first_local = np.empty(ne, dtype=np.int64)
    flat_tri = owner[order][starts]
    flat_pos = order[starts] % 3
    first_local[:] = flat_pos
    a_idx = np.array([LOCAL_EDGES[i][0] for i in range(3)])[first_local]
    b_idx = np.array([LOCAL_EDGES[i][1] for i in range(3)])[first_local]
    pa = vertices[triangles[flat_tri, a_idx]]
    pb = vertices[triangles[flat_tri, b_idx]]
    d = pb - pa
    lengths = np.linalg.norm(d, axis=1)
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]

    diam = np.max(np.stack([np.linalg.norm(X[:, (k + 1) % 3] - X[:, k], axis=1) for k in range(3)]), axis=0)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_normals=normals,
        edge_lengths=lengths,
        edge_to_elements=e2t,
        boundary=~two,
        tri_edges=tri_edges,
        areas=areas,
        h=float(diam.max()),
        N=N,
    )


def build_uniform_mesh(N: int, domain=(-1.0, 1.0, -1.0, 1.0)) -> Mesh:
    """N x N congruent rectangles, each cut along the same diagonal.

    The diagonal joins the upper-left and lower-right corners of every cell,
    as in the usual picture of this mesh family.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    x0, x1, y0, y1 = domain
    xs = np.linspace(x0, x1, N + 1)
    ys = np.linspace(y0, y1, N + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    v00 = (j * (N + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + N + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v01])
    upper = np.column_stack([v10, v11, v01])
    triangles = np.empty((2 * N * N, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    return mesh_from_triangles(vertices, triangles, N=N)


@dataclass(frozen=True)
class LevelSet:
    """Interface as the zero set of ``signed_distance`` (negative inside the minus region)."""

    signed_distance: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __call__(self, x):
        return self.signed_distance(x)

    def normal(self, x) -> np.ndarray:
        g = np.asarray(self.gradient(x), dtype=float)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def tangent(self, x) -> np.ndarray:
        n = self.normal(x)
        return np.stack([n[..., 1], -n[..., 0]], axis=-1)


def circle(r0: float, center=(0.0, 0.0)) -> LevelSet:
    c = np.asarray(center, dtype=float)

    def rho(x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - c, axis=-1) - r0

    def grad(x):
        d = np.asarray(x, dtype=float) - c
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    return LevelSet(rho, grad, name=f"circle(r0={r0}, center={tuple(c)})")


def empty_interface(offset: float = 10.0) -> LevelSet:
    """A level set positive on the whole domain: every element lies on the plus side."""

    def rho(x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] + offset

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.array([1.0, 0.0]), x.shape).copy()

    return LevelSet(rho, grad, name="empty")


@dataclass(frozen=True)
class CutTopology:
    element_id: int
    vertices: np.ndarray  # (3, 2)
    cut_edge_local_ids: tuple  # (i, j), i < j
    D: np.ndarray  # on local edge cut_edge_local_ids[0]
    E: np.ndarray  # on local edge cut_edge_local_ids[1]
    n_h: np.ndarray
    t_h: np.ndarray
    x_T: np.ndarray
    beta_plus: float
    beta_minus: float
    plus_polygon: np.ndarray
    minus_polygon: np.ndarray
    sub_triangles_plus: tuple
    sub_triangles_minus: tuple
    vertex_sides: np.ndarray  # (3,) +1 / -1 per local vertex
    lone_vertex: int  # the vertex separated from the other two

    def split_point(self, local_edge: int) -> Optional[np.ndarray]:
        if local_edge == self.cut_edge_local_ids[0]:
            return self.D
        if local_edge == self.cut_edge_local_ids[1]:
            return self.E
        return None

    def side_of(self, x) -> np.ndarray:
        """+1 / -1 by the straight cut line through D, E (ties go to plus)."""
        x = np.asarray(x, dtype=float)
        s = (x - self.D) @ self.n_h
        return np.where(s >= 0.0, 1, -1)

    def edge_pieces(self, local_edge: int):
        """[(a, b, side), ...] sub-segments of a local edge with their side label."""
        i0, i1 = LOCAL_EDGES[local_edge]
        a, b = self.vertices[i0], self.vertices[i1]
        sa, sb = self.vertex_sides[i0], self.vertex_sides[i1]
        if sa == sb:
            return [(a, b, int(sa))]
        p = self.split_point(local_edge)
        return [(a, p, int(sa)), (p, b, int(sb))]

    def with_coefficients(self, beta_plus: float, beta_minus: float) -> "CutTopology":
        from dataclasses import replace

        return replace(self, beta_plus=float(beta_plus), beta_minus=float(beta_minus))


def polygon_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def make_cut(element_id, vertices, vertex_sides, points, beta_plus=1.0, beta_minus=1.0) -> CutTopology:
    """Assemble the cut geometry of one triangle.

    ``points`` maps each cut local edge to its interface point; ``vertex_sides``
    holds +1/-1 per vertex. Exactly two local edges must be cut.
    """
    vertices = np.asarray(vertices, dtype=float)
    vertex_sides = np.asarray(vertex_sides, dtype=int)
    cut_ids = tuple(sorted(points))
    if len(cut_ids) != 2:
        raise AssumptionViolation(f"element {element_id}: expected 2 cut edges, got {len(cut_ids)}")
    lone = ({0, 1, 2} - set(cut_ids)).pop()  # the uncut edge is opposite the lone vertex
    k = lone
    a, b = (k + 1) % 3, (k + 2) % 3
    P_ka = np.asarray(points[b], dtype=float)  # local edge b joins k and a
    P_bk = np.asarray(points[a], dtype=float)
    tri = np.array([vertices[k], P_ka, P_bk])
    if np.array_equal(P_ka, vertices[a]):  # interface through vertex a
        quad = np.array([vertices[a], vertices[b], P_bk])
        quad_fan = (quad,)
    elif np.array_equal(P_bk, vertices[b]):
        quad = np.array([P_ka, vertices[a], vertices[b]])
        quad_fan = (quad,)
    else:
        quad = np.array([P_ka, vertices[a], vertices[b], P_bk])
        quad_fan = (np.array([P_ka, vertices[a], vertices[b]]), np.array([P_ka, vertices[b], P_bk]))
    D = np.asarray(points[cut_ids[0]], dtype=float)
    E = np.asarray(points[cut_ids[1]], dtype=float)
    d = E - D
    n = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    lone_plus = vertex_sides[k] > 0
    if (n @ (vertices[k] - D) > 0) != lone_plus:
        n = -n
    t = rotate_clockwise(n)
    if lone_plus:
        plus_poly, minus_poly = tri, quad
        sub_plus, sub_minus = (tri,), quad_fan
    else:
        plus_poly, minus_poly = quad, tri
        sub_plus, sub_minus = quad_fan, (tri,)
    return CutTopology(
        element_id=int(element_id),
        vertices=vertices,
        cut_edge_local_ids=cut_ids,
        D=D,
        E=E,
        n_h=n,
        t_h=t,
        x_T=0.5 * (D + E),
        beta_plus=float(beta_plus),
        beta_minus=float(beta_minus),
        plus_polygon=plus_poly,
        minus_polygon=minus_poly,
        sub_triangles_plus=sub_plus,
        sub_triangles_minus=sub_minus,
        vertex_sides=vertex_sides,
        lone_vertex=int(k),
    )


@dataclass(frozen=True)
class Classification:
    mesh: Mesh
    level_set: LevelSet
    element_side: np.ndarray  # +1 / -1 for non-interface elements, 0 for interface elements
    edge_cut: np.ndarray  # (ne,) bool
    edge_points: np.ndarray  # (ne, 2), NaN on uncut edges
    vertex_sides: np.ndarray  # (nv,) +1 / -1, 0 on the interface
    cuts: dict = field(default_factory=dict)  # element id -> CutTopology

    @property
    def interface_elements(self) -> np.ndarray:
        return np.flatnonzero(self.element_side == 0)

    @property
    def interface_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cut)


def _bisect_edges(rho, a, b, sa, iterations=64):
    """Vectorized bisection for the sign change of ``rho`` on segments a->b."""
    lo = np.zeros(len(a))
    hi = np.ones(len(a))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        val = rho(a + mid[:, None] * (b - a))
        same = np.sign(val) == sa
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    t = 0.5 * (lo + hi)
    return a + t[:, None] * (b - a)


def classify_mesh(mesh: Mesh, ls: LevelSet, tol: Optional[float] = None, beta=None,
                  samples_per_edge: int = 16, on_vertex: str = "through") -> Classification:
    """Label interface elements/edges and build the cut geometry of every interface element.

    ``beta`` is an optional pair of callables (beta_plus, beta_minus) sampled at
    x_T of every cut; both default to 1. Vertices within ``tol`` of the interface
    carry sign 0 and the discrete interface runs through them; pass
    ``on_vertex="error"`` to reject such meshes instead.
    """
    if on_vertex not in ("through", "error"):
        raise ValueError("on_vertex must be 'through' or 'error'")
    if tol is None:
        tol = 1e-12 * mesh.h
    V = mesh.vertices
    rv = np.asarray(ls(V), dtype=float)
    # a vertex within tol of the interface is treated as lying on it (sign 0): the discrete
    # interface then passes through that vertex and no cut area is altered
    vsign = np.where(np.abs(rv) <= tol, 0, np.where(rv > 0, 1, -1))
    if on_vertex == "error" and np.any(vsign == 0):
        idx = np.flatnonzero(vsign == 0)[:5]
        raise AssumptionViolation(f"vertices {idx.tolist()} lie on the interface (|rho| <= {tol:g})")

    ea, eb = mesh.edges[:, 0], mesh.edges[:, 1]
    edge_cut = vsign[ea] * vsign[eb] < 0

    # every closed edge may be crossed at most once
    s = (np.arange(1, samples_per_edge + 1) / (samples_per_edge + 1))
    pts = V[ea][:, None, :] + s[None, :, None] * (V[eb] - V[ea])[:, None, :]
    sg = np.sign(np.asarray(ls(pts.reshape(-1, 2)), dtype=float)).reshape(len(ea), -1)
    sg = np.concatenate([vsign[ea][:, None], sg, vsign[eb][:, None]], axis=1)
    changes = np.count_nonzero(np.diff(sg, axis=1) != 0, axis=1)
    # touching the interface at an endpoint adds one sign change that is not a crossing
    changes -= (vsign[ea] == 0).astype(int) + (vsign[eb] == 0).astype(int)
    bad = changes > 1
    if np.any(bad):
        raise AssumptionViolation(
            f"edges {np.flatnonzero(bad)[:5].tolist()} are cut more than once; refine the mesh")

    if np.any(edge_cut & mesh.boundary) or np.any(vsign[np.unique(mesh.edges[mesh.boundary])] == 0):
        raise AssumptionViolation("interface reaches the domain boundary; it must be immersed in the domain")

    edge_points = np.full((mesh.n_edges, 2), np.nan)
    ci = np.flatnonzero(edge_cut)
    if len(ci):
        edge_points[ci] = _bisect_edges(lambda x: np.asarray(ls(x), dtype=float),
                                        V[ea[ci]], V[eb[ci]], vsign[ea[ci]])

    tri_sign = vsign[mesh.triangles]
    has_plus = np.any(tri_sign > 0, axis=1)
    has_minus = np.any(tri_sign < 0, axis=1)
    interface = has_plus & has_minus
    if np.any(~has_plus & ~has_minus):
        raise AssumptionViolation("an element has all vertices on the interface")
    tri_cut = edge_cut[mesh.tri_edges]
    ncut = tri_cut.sum(axis=1)
    nzero = np.count_nonzero(tri_sign == 0, axis=1)
    if np.any(interface & (ncut + nzero != 2)):
        raise AssumptionViolation("an element boundary is cut at more than two points")
    element_side = np.where(interface, 0, np.where(has_plus, 1, -1))

    ife = np.flatnonzero(interface)
    if len(ife):
        angles = mesh.max_angles()[ife]
        if np.any(angles > 0.5 * np.pi + 1e-12):
            raise AssumptionViolation("interface element with maximum angle above pi/2")

    bp, bm = beta if beta is not None else (None, None)
    cuts = {}
    for t in ife:
        tv = mesh.triangles[t]
        local = vsign[tv].copy()
        points = {i: edge_points[mesh.tri_edges[t, i]] for i in range(3) if tri_cut[t, i]}
        for k in np.flatnonzero(local == 0):
            # the vertex on the interface joins the side of its successor; the edge to its
            # predecessor (opposite the successor) is then "cut" exactly at the vertex
            succ = (k + 1) % 3
            local[k] = local[succ]
            points[succ] = V[tv[k]]
        cut = make_cut(t, V[tv], local, points)
        if bp is not None:
            cut = cut.with_coefficients(float(bp(cut.x_T[None])[0]), float(bm(cut.x_T[None])[0]))
        cuts[int(t)] = cut
    return Classification(mesh, ls, element_side, edge_cut, edge_points, vsign, cuts)


@dataclass(frozen=True)
class InterfacePolyline:
    loops: tuple  # each (m, 2) closed loop, first point repeated at the end
    n_segments: int

    def segments(self):
        for loop in self.loops:
            for k in range(len(loop) - 1):
                yield loop[k], loop[k + 1]

    def max_distance(self, ls: LevelSet, samples: int = 16) -> float:
        """Largest |rho| over points sampled on the polyline."""
        s = np.linspace(0.0, 1.0, samples + 1)
        worst = 0.0
        for loop in self.loops:
            a, b = loop[:-1], loop[1:]
            pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
            worst = max(worst, float(np.max(np.abs(ls(pts.reshape(-1, 2))))))
        return worst


def polyline_interface(cls: Classification) -> InterfacePolyline:
    """Chain the per-element segments D-E into closed loops."""
    mesh = cls.mesh
    if not cls.cuts:
        raise TopologyError("no interface elements: the interface does not cross the mesh")
    links: dict[tuple, list[tuple]] = {}
    where: dict[tuple, np.ndarray] = {}
    for t, cut in cls.cuts.items():
        ends = []
        for i, P in zip(cut.cut_edge_local_ids, (cut.D, cut.E)):
            e = int(mesh.tri_edges[t, i])
            if cls.edge_cut[e]:
                key = ("e", e)
            else:  # the interface passes through a vertex of this edge
                v = mesh.edges[e][np.argmin(np.linalg.norm(mesh.vertices[mesh.edges[e]] - P, axis=1))]
                key = ("v", int(v))
            where[key] = P
            ends.append(key)
        links.setdefault(ends[0], []).append(ends[1])
        links.setdefault(ends[1], []).append(ends[0])
    if any(len(v) != 2 for v in links.values()):
        raise TopologyError("interface segments do not form closed loops")
    seen = set()
    loops = []
    for start in sorted(links):
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = links[cur][0] if links[cur][0] != prev else links[cur][1]
            if nxt == start:
                break
            if nxt in seen:
                raise TopologyError("interface segments do not form closed loops")
            chain.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        pts = np.array([where[k] for k in chain])
        loops.append(np.vstack([pts, pts[:1]]))
    return InterfacePolyline(tuple(loops), sum(len(l) - 1 for l in loops))
