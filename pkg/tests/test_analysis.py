import csv
import io
import math

import numpy as np
import pytest

from immersed_rt.analysis import (ErrorReport, ErrorRow, check_doubling, commuting_check, discretize,
                                  divergence_defect, flux_dofs, interpolation_study, l2_errors, rates,
                                  solve_problem)
from immersed_rt.assembly import local_bases
from immersed_rt.problems import example1, example2, patch, zero_problem
from immersed_rt.analysis import flux_l2_error

FULL = (8, 16, 32, 64, 128, 256)


def test_rates():
    assert rates([1.0, 0.5, 0.25]) == [None, 1.0, 1.0]
    r = rates([1.0, 0.5, 0.125], [8, 16, 64])
    assert r[1] == 1.0 and r[2] is None


@pytest.mark.parametrize("bad", [[8, 12], [16, 8], [8, 8], [0, 1], [8, 24]])
def test_check_doubling_rejects(bad):
    with pytest.raises(ValueError):
        check_doubling(bad)


def test_check_doubling_accepts_power_gaps():
    check_doubling([8, 16, 64])


def test_csv_rates_match_own_entries():
    report = ErrorReport([ErrorRow(8, 0.3, 0.3033, 2.0, 0.1), ErrorRow(16, 0.15, 0.1477, 1.01, 0.05),
                          ErrorRow(32, 0.075, 0.07322, 0.49, 0.02)])
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert list(rows[0]) == ["N", "err_p", "rate_p", "err_u", "rate_u", "jump_seminorm"]
    assert rows[0]["rate_p"] == ""
    for prev, cur in zip(rows, rows[1:]):
        for col in ("p", "u"):
            expected = math.log2(float(prev[f"err_{col}"]) / float(cur[f"err_{col}"]))
            assert abs(float(cur[f"rate_{col}"]) - expected) <= 1e-12


def test_table_uses_four_significant_digits():
    report = ErrorReport([ErrorRow(8, 0.3, 0.30330001, 2.0, 0.1)], title="t")
    assert "3.033E-01" in report.to_table()


@pytest.mark.parametrize("method", ["traditional", "immersed"])
@pytest.mark.parametrize("N", [4, 8, 16])
def test_patch_test_exact(method, N):
    prob = patch()
    system, sol = solve_problem(prob, N, method)
    err = l2_errors(sol, system, prob)
    assert err.err_p <= 1e-9
    assert divergence_defect(sol, system) <= 1e-9


@pytest.mark.parametrize("make", [example1, example2])
@pytest.mark.parametrize("method, eta", [("traditional", 0.0), ("immersed", 0.0), ("immersed", 1.0)])
def test_discrete_divergence_identity(make, method, eta):
    system, sol = solve_problem(make(), 16, method, eta)
    assert divergence_defect(sol, system) <= 1e-9


def test_reconstructed_divergence_matches_b():
    prob = example1()
    system, sol = solve_problem(prob, 8, "immersed", 1.0)
    from immersed_rt.analysis import element_pieces

    div = system.B @ sol.flux_coefficients / system.mesh.areas
    for t in system.cls.cuts:
        plus, minus = element_pieces(system, system.mesh, sol.flux_coefficients, t)
        assert plus.divergence == pytest.approx(div[t], abs=1e-10)
        assert minus.divergence == pytest.approx(div[t], abs=1e-10)


def test_energy_norm_definition():
    prob = example1()
    system, sol = solve_problem(prob, 8, "immersed", 2.0)
    e = l2_errors(sol, system, prob)
    assert e.energy == pytest.approx(math.sqrt(e.err_p ** 2 + 2.0 * e.jump ** 2))


def test_traditional_has_no_jumps():
    prob = example2()
    system, sol = solve_problem(prob, 16, "traditional")
    assert l2_errors(sol, system, prob).jump <= 1e-12


def test_commuting_simple_fields():
    mesh, cls = discretize(example1(), 16)
    lin = lambda x: np.asarray(x, dtype=float).copy()
    assert commuting_check(lin, lambda x: np.full(x.shape[:-1], 2.0), mesh, cls) <= 1e-12
    trig = lambda x: np.stack([np.sin(x[..., 1]), np.cos(x[..., 0])], axis=-1)
    assert commuting_check(trig, lambda x: np.zeros(x.shape[:-1]), mesh, cls) <= 1e-11


def test_zero_field_interpolation():
    prob = zero_problem()
    mesh, cls = discretize(prob, 8)
    assert flux_l2_error(mesh, cls, local_bases(mesh, cls, "immersed"), flux_dofs(mesh, cls, prob), prob.p) == 0.0


def test_interpolation_rate_example2():
    report = interpolation_study(example2(), [8, 16, 32, 64, 128])
    assert 0.85 <= report.rate_p[-1] <= 1.15


def test_reference_values_example1(table):
    trad = table("example1", "traditional", 0.0, (8, 16))
    assert 0.5 * 1.477e-01 <= trad.rows[1].err_p <= 2 * 1.477e-01
    assert trad.rate_p[1] == pytest.approx(1.04, abs=0.1)


@pytest.mark.xfail(strict=True, reason="the eta=1 jump seminorm of example 1 rises from N=16 to N=32 "
                                       "(0.204 -> 0.270) before decaying; see the decisions ledger")
def test_jump_seminorm_monotone_from_16(table):
    jumps = table("example1", "immersed", 1.0, FULL).column("jump")[1:]
    assert all(b <= 1.05 * a for a, b in zip(jumps, jumps[1:]))


def test_jump_seminorm_monotone_from_32(table):
    jumps = table("example1", "immersed", 1.0, FULL).column("jump")[2:]
    assert all(b <= 1.05 * a for a, b in zip(jumps, jumps[1:]))


def test_determinism():
    a = solve_problem(example2(), 16)[1]
    b = solve_problem(example2(), 16)[1]
    assert np.array_equal(a.flux_coefficients, b.flux_coefficients)
