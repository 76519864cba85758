"""Interface problems with closed-form solutions on each side."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import LevelSet, circle, empty_interface

Array = np.ndarray


def _const(value: float) -> Callable[[Array], Array]:
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(value))

    return f


@dataclass(frozen=True)
class ProblemSpec:
    """-div(beta_tilde grad u) = f with [u] = 0 and [beta_tilde grad u . n] = 0 on the interface.

    Every callable takes points of shape (..., 2). The ``*_plus`` / ``*_minus``
    closed forms are valid on the whole domain, which makes them usable as
    smooth extensions across the interface.
    """

    name: str
    level_set: LevelSet
    beta_tilde_plus: Callable
    beta_tilde_minus: Callable
    exact_u_plus: Callable
    exact_u_minus: Callable
    exact_p_plus: Callable
    exact_p_minus: Callable
    f_plus: Callable
    f_minus: Callable
    boundary_g: Callable
    params: dict = field(default_factory=dict)

    # beta = 1 / beta_tilde weighs the flux in the mass term
    def beta_plus(self, x):
        return 1.0 / self.beta_tilde_plus(x)

    def beta_minus(self, x):
        return 1.0 / self.beta_tilde_minus(x)

    def side(self, x) -> Array:
        return np.where(np.asarray(self.level_set(x)) > 0, 1, -1)

    def _by_side(self, fp, fm, x):
        x = np.asarray(x, dtype=float)
        plus = self.side(x) > 0
        vp, vm = fp(x), fm(x)
        if np.ndim(vp) > plus.ndim:
            plus = plus[..., None]
        return np.where(plus, vp, vm)

    def u(self, x):
        return self._by_side(self.exact_u_plus, self.exact_u_minus, x)

    def p(self, x):
        return self._by_side(self.exact_p_plus, self.exact_p_minus, x)

    def f(self, x):
        return self._by_side(self.f_plus, self.f_minus, x)


def example1(r0: float = 0.5, beta_tilde_plus: float = 1e-2, beta_tilde_minus: float = 1.0) -> ProblemSpec:
    """u = r^3 / beta_tilde^- inside the circle, shifted r^3 / beta_tilde^+ outside.

    The flux p = 3 r x is the same closed form on both sides and f = -9 r.
    """
    bp, bm = float(beta_tilde_plus), float(beta_tilde_minus)
    shift = (1.0 / bm - 1.0 / bp) * r0 ** 3

    def r(x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def u_plus(x):
        return r(x) ** 3 / bp + shift

    def u_minus(x):
        return r(x) ** 3 / bm

    def p(x):
        x = np.asarray(x, dtype=float)
        return 3.0 * r(x)[..., None] * x

    def f(x):
        return -9.0 * r(x)

    return ProblemSpec(
        name="example1",
        level_set=circle(r0),
        beta_tilde_plus=_const(bp),
        beta_tilde_minus=_const(bm),
        exact_u_plus=u_plus,
        exact_u_minus=u_minus,
        exact_p_plus=p,
        exact_p_minus=p,
        f_plus=f,
        f_minus=f,
        boundary_g=u_plus,
        params=dict(r0=r0, beta_tilde_plus=bp, beta_tilde_minus=bm),
    )


def _bump(r, r0, width):
    """Compactly supported bump in r and its first two radial derivatives."""
    s = (r - r0) / width
    q = 1.0 - s * s
    # below 1e-3 the bump is exp(-1000) == 0.0 in double precision
    live = q > 1e-3
    qs = np.where(live, q, 1.0)
    ss = np.where(live, s, 0.0)
    j = np.where(live, np.exp(-1.0 / qs), 0.0)
    g1 = -2.0 * ss / qs ** 2
    g2 = -2.0 / qs ** 2 - 8.0 * ss ** 2 / qs ** 3
    dj = j * g1 / width
    d2j = j * (g1 ** 2 + g2) / width ** 2
    return j, dj, d2j


def example2(r0: float = 0.5, beta_tilde_plus: float = 1e-2, beta_tilde_minus: float = 1.0,
             bump_width: float = 0.45) -> ProblemSpec:
    """u = j(r) v(r) sin(theta): bump j times a side-dependent radial factor v.

    The tangential derivative of u does not vanish on the interface.
    """
    bp, bm = float(beta_tilde_plus), float(beta_tilde_minus)

    def radial(x, bt):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        rs = np.where(r > 0, r, 1.0)
        j, dj, d2j = _bump(r, r0, bump_width)
        v = 1.0 + (r * r - r0 * r0) / bt
        dv = 2.0 * r / bt
        d2v = 2.0 / bt
        w = j * v
        dw = dj * v + j * dv
        d2w = d2j * v + 2.0 * dj * dv + j * d2v
        return x, rs, w, dw, d2w

    def make_u(bt):
        def u(x):
            x, rs, w, _, _ = radial(x, bt)
            return w * x[..., 1] / rs

        return u

    def make_p(bt):
        def p(x):
            x, rs, w, dw, _ = radial(x, bt)
            x1, x2 = x[..., 0], x[..., 1]
            r2, r3 = rs ** 2, rs ** 3
            g1 = dw * x2 * x1 / r2 - w * x1 * x2 / r3
            g2 = dw * x2 * x2 / r2 + w * x1 * x1 / r3
            return bt * np.stack([g1, g2], axis=-1)

        return p

    def make_f(bt):
        def f(x):
            x, rs, w, dw, d2w = radial(x, bt)
            sin = x[..., 1] / rs
            return -bt * (d2w + dw / rs - w / rs ** 2) * sin

        return f

    u_plus = make_u(bp)
    return ProblemSpec(
        name="example2",
        level_set=circle(r0),
        beta_tilde_plus=_const(bp),
        beta_tilde_minus=_const(bm),
        exact_u_plus=u_plus,
        exact_u_minus=make_u(bm),
        exact_p_plus=make_p(bp),
        exact_p_minus=make_p(bm),
        f_plus=make_f(bp),
        f_minus=make_f(bm),
        boundary_g=u_plus,
        params=dict(r0=r0, beta_tilde_plus=bp, beta_tilde_minus=bm, bump_width=bump_width),
    )


def patch(beta_tilde: float = 1.0) -> ProblemSpec:
    """u = x1 with a constant coefficient and no interface; the flux is constant."""
    bt = float(beta_tilde)

    def u(x):
        return np.asarray(x, dtype=float)[..., 0]

    def p(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = bt
        return out

    zero = _const(0.0)
    return ProblemSpec("patch", empty_interface(), _const(bt), _const(bt), u, u, p, p, zero, zero, u,
                       params=dict(beta_tilde_plus=bt, beta_tilde_minus=bt))


def zero_problem(r0: float = 0.5, beta_tilde_plus: float = 1e-2, beta_tilde_minus: float = 1.0) -> ProblemSpec:
    zero = _const(0.0)

    def p(x):
        return np.zeros(np.asarray(x, dtype=float).shape)

    return ProblemSpec("zero", circle(r0), _const(beta_tilde_plus), _const(beta_tilde_minus),
                       zero, zero, p, p, zero, zero, zero,
                       params=dict(r0=r0, beta_tilde_plus=beta_tilde_plus, beta_tilde_minus=beta_tilde_minus))


def circle_problem(r0: float = 0.5, beta_tilde_plus: float = 1.0, beta_tilde_minus: float = 1.0) -> ProblemSpec:
    """Example-1 solution family with user-chosen constant coefficients."""
    p = example1(r0, beta_tilde_plus, beta_tilde_minus)
    return ProblemSpec(**{**p.__dict__, "name": "circle"})


PROBLEMS = {
    "example1": example1,
    "example2": example2,
    "patch": patch,
    "circle": circle_problem,
    "zero": zero_problem,
}


def get_problem(problem_id: str, r0=None, beta_tilde_plus=None, beta_tilde_minus=None) -> ProblemSpec:
    try:
        factory = PROBLEMS[problem_id]
    except KeyError:
        raise KeyError(f"unknown problem {problem_id!r}; choose from {sorted(PROBLEMS)}") from None
    kwargs = {}
    if problem_id == "patch":
        if beta_tilde_plus is not None:
            kwargs["beta_tilde"] = beta_tilde_plus
        return factory(**kwargs)
    if r0 is not None:
        kwargs["r0"] = r0
    if beta_tilde_plus is not None:
        kwargs["beta_tilde_plus"] = beta_tilde_plus
    if beta_tilde_minus is not None:
        kwargs["beta_tilde_minus"] = beta_tilde_minus
    return factory(**kwargs)
