import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from immersed_rt.elements import (AffineVectorField, PiecewiseRTFunction, auxiliary_functions, build_omega,
                                  dof_functional, dofs, ife_basis, ife_interpolate, piece_sup_norm,
                                  rt_basis, rt_interpolate, triangle_geometry)
from immersed_rt.exceptions import AssumptionViolation, NonPositiveCoefficient
from immersed_rt.geometry import make_cut
from immersed_rt.problems import example1
from immersed_rt.verify import case1_theta, random_cut

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def cut_of(T, lone, s1, s2, lone_side=1, beta=(1.0, 1.0)):
    k = lone
    a, b = (k + 1) % 3, (k + 2) % 3
    sides = np.full(3, -lone_side)
    sides[k] = lone_side
    pts = {b: T[k] + s1 * (T[a] - T[k]), a: T[k] + s2 * (T[b] - T[k])}
    return make_cut(0, T, sides, pts, *beta)


def test_affine_field_algebra():
    f = AffineVectorField(1.0, 2.0, 3.0)
    g = AffineVectorField(0.5, -1.0, 1.0)
    np.testing.assert_allclose(f(np.array([1.0, 1.0])), [4.0, 5.0])
    assert f.divergence == 6.0
    assert (f + g - g) == f
    assert (2 * f).coef.tolist() == [2.0, 4.0, 6.0]
    assert AffineVectorField.from_coef(f.coef) == f


def test_affine_normal_trace_constant_on_lines():
    rng = np.random.default_rng(1)
    for _ in range(20):
        f = AffineVectorField(*rng.normal(size=3))
        a, b = rng.normal(size=(2, 2))
        d = b - a
        n = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        vals = [f(a + s * d) @ n for s in (0.0, 0.3, 1.0)]
        np.testing.assert_allclose(vals, vals[0], atol=1e-13)


def test_rt_basis_unit_triangle():
    lam = rt_basis(UNIT)
    # the edge opposite (0, 1) is the bottom edge
    assert lam[2] == AffineVectorField(0.0, -1.0, 1.0)
    x = np.array([[0.2, 0.0], [0.7, 0.0]])
    np.testing.assert_allclose(lam[2](x) @ np.array([0.0, -1.0]), 1.0)
    assert lam[2].divergence == pytest.approx(2.0)
    lengths, _, area = triangle_geometry(UNIT)
    for i in range(3):
        assert lam[i].divergence == pytest.approx(lengths[i] / area)


def test_degenerate_triangle():
    with pytest.raises(ValueError):
        rt_basis(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_kronecker_random_triangle(seed):
    rng = np.random.default_rng(seed)
    T = rng.uniform(-1, 1, size=(3, 2))
    if triangle_geometry(T)[2] < 1e-2:
        return
    lam = rt_basis(T)
    K = np.array([[dof_functional(lambda x, f=f: f(x), T, j) for f in lam] for j in range(3)])
    np.testing.assert_allclose(K, np.eye(3), atol=1e-12)


def test_dof_functional_examples():
    assert dof_functional(AffineVectorField.constant([1.0, 0.0]), UNIT, 2) == pytest.approx(0.0)
    assert dof_functional(lambda x: np.broadcast_to([1.0, 0.0], x.shape), UNIT, 1) == pytest.approx(-1.0)


def test_dof_functional_cut_edge_matches_dense_simpson():
    p = example1().p
    T = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75]])
    cut = make_cut(0, T, [-1, 1, 1], {2: np.array([np.sqrt(0.1875), 0.25]), 1: np.array([0.25, np.sqrt(0.1875)])})
    _, normals, _ = triangle_geometry(T)
    for i in (1, 2):
        got = dof_functional(p, T, i, cut)
        a, b = T[(i + 1) % 3], T[(i + 2) % 3]
        s = np.linspace(0.0, 1.0, 10001)
        vals = p(a + s[:, None] * (b - a)) @ normals[i]
        w = np.ones_like(s)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        simpson = (s[1] - s[0]) / 3.0 * (w @ vals)
        assert got == pytest.approx(simpson, abs=1e-10)


def test_rt_interpolation_reproduces_rt_fields():
    f = AffineVectorField(0.3, -0.2, 1.7)
    g = rt_interpolate(lambda x: f(x), UNIT)
    np.testing.assert_allclose(g.coef, f.coef, atol=1e-13)


def test_omega_limits():
    # plus side shrinking to the lone vertex: theta -> 0
    assert build_omega(UNIT, cut_of(UNIT, 0, 1e-6, 1e-6))[2] == pytest.approx(0.0, abs=1e-5)
    # plus side filling the triangle: theta -> 1
    assert build_omega(UNIT, cut_of(UNIT, 0, 1e-6, 1e-6, lone_side=-1))[2] == pytest.approx(1.0, abs=1e-5)


def test_theta_closed_form_and_case_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(500):
        T, cut = random_cut(rng)
        theta = build_omega(T, cut)[2]
        assert theta == pytest.approx(case1_theta(T, cut), abs=1e-10)
        swapped = make_cut(0, T, -cut.vertex_sides, {i: cut.split_point(i) for i in cut.cut_edge_local_ids})
        assert build_omega(T, swapped)[2] == pytest.approx(1.0 - theta, abs=1e-12)


def test_obtuse_triangle_can_violate_theta_bound():
    rng = np.random.default_rng(0)
    for _ in range(200):
        T = rng.uniform(-1, 1, size=(3, 2))
        if triangle_geometry(T)[2] < 1e-2:
            continue
        _, cut = random_cut(rng, T=T)
        try:
            build_omega(T, cut)
        except AssumptionViolation:
            return
    pytest.fail("no violation found on random obtuse triangles")


def test_equal_coefficients_give_standard_basis():
    cut = cut_of(UNIT, 1, 0.3, 0.6, beta=(2.0, 2.0))
    basis = ife_basis(UNIT, cut)
    for f, lam in zip(basis.fields, rt_basis(UNIT)):
        assert f.plus == lam and f.minus == lam


def irt_residuals(f: PiecewiseRTFunction):
    cut = f.cut
    return (f.normal_jump(cut.D), f.normal_jump(cut.E), f.tangential_jump(), f.divergence_jump)


@pytest.mark.parametrize("beta", [(100.0, 1.0), (1.0, 100.0), (1e3, 1e-3 * 1e3)])
def test_ife_basis_conditions_and_kronecker(beta):
    rng = np.random.default_rng(11)
    for _ in range(50):
        T, cut = random_cut(rng)
        cut = cut.with_coefficients(*beta)
        basis = ife_basis(T, cut)
        scale = max(1.0, max(np.abs(f.plus.coef).max() + np.abs(f.minus.coef).max() for f in basis.fields))
        for f in basis.fields:
            np.testing.assert_allclose(irt_residuals(f), 0.0, atol=1e-11 * scale)
        K = np.array([dofs(f, T) for f in basis.fields]).T
        np.testing.assert_allclose(K, np.eye(3), atol=1e-12 * scale)
        assert basis.denominator >= min(1.0, beta[1] / beta[0]) - 1e-12


def dense_ife_basis(T, cut):
    """Solve the six conditions for the six coefficients (a, c, b) per side directly."""
    _, normals, _ = triangle_geometry(T)
    rows, n, t = [], cut.n_h, cut.t_h
    for i in range(3):
        row = np.zeros(6)
        for pa, pb, side in cut.edge_pieces(i):
            frac = np.linalg.norm(pb - pa) / np.linalg.norm(T[(i + 2) % 3] - T[(i + 1) % 3])
            m = 0.5 * (pa + pb)
            off = 0 if side > 0 else 3
            row[off:off + 3] += frac * np.array([normals[i, 0], normals[i, 1], m @ normals[i]])
        rows.append(row)
    D, x = cut.D, cut.x_T
    rows.append(np.r_[n[0], n[1], D @ n, -n[0], -n[1], -(D @ n)])
    bp, bm = cut.beta_plus, cut.beta_minus
    rows.append(np.r_[bp * t[0], bp * t[1], bp * (x @ t), -bm * t[0], -bm * t[1], -bm * (x @ t)])
    rows.append(np.r_[0, 0, 1, 0, 0, -1])
    M = np.array(rows)
    rhs = np.zeros((6, 3))
    rhs[:3] = np.eye(3)
    return np.linalg.solve(M, rhs)


def test_closed_form_matches_dense_linear_system():
    rng = np.random.default_rng(21)
    for _ in range(200):
        T, cut = random_cut(rng)
        cut = cut.with_coefficients(1.0, 10.0 ** rng.uniform(-3, 3))
        basis = ife_basis(T, cut)
        C = dense_ife_basis(T, cut)
        for i, f in enumerate(basis.fields):
            got = np.r_[f.plus.coef, f.minus.coef]
            np.testing.assert_allclose(got, C[:, i], rtol=1e-8, atol=1e-8 * np.abs(C).max())


def test_interpolation_identities():
    T, cut = random_cut(np.random.default_rng(2))
    cut = cut.with_coefficients(3.0, 3.0)
    q = ife_interpolate(lambda x: np.broadcast_to([1.0, 1.0], x.shape), T, cut)
    np.testing.assert_allclose(q.plus.coef, [1.0, 1.0, 0.0], atol=1e-13)
    np.testing.assert_allclose(q.minus.coef, [1.0, 1.0, 0.0], atol=1e-13)


def test_nonpositive_coefficient():
    with pytest.raises(NonPositiveCoefficient):
        ife_basis(UNIT, cut_of(UNIT, 0, 0.5, 0.5, beta=(1.0, 0.0)))


@pytest.mark.parametrize("beta", [(100.0, 1.0), (1.0, 100.0), (2.0, 2.0)])
def test_auxiliary_function_conditions(beta):
    rng = np.random.default_rng(4)
    for _ in range(30):
        T, cut = random_cut(rng)
        cut = cut.with_coefficients(*beta)
        psi, ups, theta = auxiliary_functions(T, cut)
        for f in (psi, ups, theta):
            np.testing.assert_allclose(dofs(f, T), 0.0, atol=1e-11)
        np.testing.assert_allclose(irt_residuals(psi), (1, 1, 0, 0), atol=1e-11)
        np.testing.assert_allclose(irt_residuals(ups), (0, 0, 1, 0), atol=1e-11)
        np.testing.assert_allclose(irt_residuals(theta), (0, 0, 0, 1), atol=1e-11)


def test_decomposition_identity():
    rng = np.random.default_rng(8)
    for _ in range(40):
        T, cut = random_cut(rng)
        cut = cut.with_coefficients(10.0 ** rng.uniform(-2, 2), 10.0 ** rng.uniform(-2, 2))
        cp, cm = rng.normal(size=(2, 2, 3))

        def qp(x, c=cp):
            return np.stack([c[0, 0] + c[0, 1] * x[..., 0] * x[..., 1] + c[0, 2] * np.sin(x[..., 1]),
                             c[1, 0] * x[..., 0] ** 2 + c[1, 1] * x[..., 1] + c[1, 2]], axis=-1)

        def qm(x, c=cm):
            return qp(x, c)

        basis = ife_basis(T, cut)
        w = PiecewiseRTFunction(rt_interpolate(qp, T), rt_interpolate(qm, T), cut)
        q_ife = ife_interpolate((qp, qm), T, cut, basis)
        jn = w.normal_jump(cut.x_T)
        jt = w.tangential_jump()
        jd = w.divergence_jump
        g = dofs(w, T) - dofs((qp, qm), T, cut)
        psi, ups, theta = auxiliary_functions(T, cut, basis)
        rhs = psi * jn + ups * jt + theta * jd
        for gi, f in zip(g, basis.fields):
            rhs = rhs + f * gi
        lhs = w - q_ife
        np.testing.assert_allclose(lhs.plus.coef, rhs.plus.coef, atol=1e-10)
        np.testing.assert_allclose(lhs.minus.coef, rhs.minus.coef, atol=1e-10)


def test_sup_norm_bound_does_not_grow_with_contrast():
    worst = {}
    for kappa in (10.0, 1e3):
        rng = np.random.default_rng(3)
        m = 0.0
        for _ in range(500):
            T, cut = random_cut(rng)
            for r in (kappa, 1.0 / kappa):
                b = ife_basis(T, cut.with_coefficients(1.0, r))
                m = max(m, max(max(piece_sup_norm(f.plus, T), piece_sup_norm(f.minus, T)) for f in b.fields))
        worst[kappa] = m / kappa
    assert worst[1e3] <= 1.05 * worst[10.0]
