import math

import numpy as np
import pytest

from halfkdv.energy import (
    EnergyRecord, InequalityReport, TestFunction, c1_constant, c2_constant,
    check_estimate_I, check_estimate_II, check_estimate_III, check_estimate_IV,
    check_estimates, check_interpolation_inequalities, cubic_exp_test_function, gronwall_rate,
    interpolation_suite, record, weak_residual,
)
from halfkdv.errors import ConfigurationError, PreconditionError, ShapeError
from halfkdv.grid_ops import build_grid
from halfkdv.model import FieldState, SolverParams, build_operators
from halfkdv.timestepper import Trajectory, solve_ibvp

from conftest import xgauss


def zero_records(n=5, dt=0.1):
    return [EnergyRecord(t=i * dt) for i in range(n)]


def test_c1_examples():
    assert c1_constant(1.0, 2.0) == 3.0
    assert c1_constant(0.0, 7.0) == 1.0
    assert c1_constant(2.0, 0.5) == 9.0
    with pytest.raises(ConfigurationError):
        c1_constant(-1.0, 1.0)


def test_c2_examples():
    assert c2_constant(0.0, 0.0, 1.0, 1.0) == 1.0
    assert c2_constant(1.0, 1.0, 1.0, 2.0) == 9.0
    a = c2_constant(0.7, 1.3, 1.0, 1.9) - 1
    b = c2_constant(0.7, 1.3, 2.0, 1.9) - 1
    assert b == pytest.approx(2 * a)
    with pytest.raises(ConfigurationError):
        c2_constant(1.0, -1.0, 1.0, 1.0)


def test_zero_record():
    g = build_grid(10.0, 129)
    p = SolverParams(k=1, eps=0.1, dt=0.01, T=1.0)
    r = record(FieldState(np.zeros(129)), build_operators(g, p), p)
    assert all(v == 0 for v in r.as_row())


def test_w1_oracle():
    g = build_grid(40.0, 4097)
    p = SolverParams(k=1, eps=0.0, dt=0.01, T=1.0)
    r = record(FieldState(g.x * np.exp(-g.x)), build_operators(g, p), p)
    assert r.w1 == pytest.approx(0.625, rel=1e-6)
    assert r.l2_sq == pytest.approx(0.25, rel=1e-6)
    assert r.l2_sq <= r.w1 <= r.w2


def test_record_shape_error():
    g = build_grid(10.0, 129)
    p = SolverParams(k=1, eps=0.0, dt=0.01, T=1.0)
    with pytest.raises(ShapeError):
        record(np.zeros(100), build_operators(g, p), p)


def test_record_trapezoid_integrals():
    g = build_grid(20.0, 257)
    p = SolverParams(k=1, eps=0.5, dt=0.01, T=1.0)
    ops = build_operators(g, p)
    u = xgauss(g.x)
    r0 = record(FieldState(u, 0.0), ops, p)
    r1 = record(FieldState(0.5 * u, 0.2), ops, p, r0)
    assert r1.int_h1x == pytest.approx(0.1 * (r0.h1x + r1.h1x))
    assert r1.int_eps_trace0 == pytest.approx(0.5 * 0.1 * (r0.trace0 + r1.trace0))
    assert r1.int_eps_w1xx == pytest.approx(0.5 * 0.1 * (r0.w1xx + r1.w1xx))


def test_zero_trajectory_estimates():
    p = SolverParams(k=2, eps=0.01, dt=0.1, T=0.4)
    rep = check_estimates(zero_records(), p)
    assert rep.passed
    assert all(e.margin == 1.0 for e in rep.entries)
    assert rep.C1 == 1.0 and rep.C2 == 1.0
    p0 = p.with_(eps=0.0)
    assert check_estimate_I(zero_records(), p0, 0.0).passed


@pytest.fixture(scope="module")
def bump_run():
    g = build_grid(40.0, 513)
    p = SolverParams(k=2, eps=1e-3, dt=2e-3, T=0.2)
    return solve_ibvp(xgauss(g.x, a=0.5), p, g), p


def test_estimates_pass_on_bump(bump_run):
    tr, p = bump_run
    rep = check_estimates(tr.records, p)
    for name in ("II", "III", "IV"):
        assert rep[name].passed and rep[name].margin >= 0, name
    assert rep["II"].extra["passed_coef3"]
    assert all(r.l2_sq <= r.w1 <= r.w2 for r in tr.records)


def test_forced_failures(bump_run):
    tr, p = bump_run
    r0 = tr.records[0]
    l2 = math.sqrt(r0.l2_sq)
    assert not check_estimate_II(tr.records, p, r0.w1, l2, rhs_scale=1e-3).passed
    assert not check_estimate_III(tr.records, p, r0.w2, l2, rhs_scale=1e-6).passed
    # records whose weighted u_t grows faster than the supplied rate
    fake = [EnergyRecord(t=0.1 * i, ut_w1=math.exp(3 * 0.1 * i)) for i in range(10)]
    bad = check_estimate_IV(fake, p, rate=np.ones(10))
    assert not bad.passed and bad.margin < 0
    good = check_estimate_IV(fake, p, rate=np.full(10, 3.5))
    assert good.passed


def test_estimate_I_detects_growth():
    p = SolverParams(k=2, eps=0.0, dt=0.1, T=0.4)
    recs = [EnergyRecord(t=0.1 * i, l2_sq=1.0 + 1e-6 * i) for i in range(5)]
    e = check_estimate_I(recs, p, 1.0)
    assert not e.passed and e.extra["max_increase"] == pytest.approx(1e-6)
    p1 = p.with_(eps=0.1)
    recs = [EnergyRecord(t=0.1 * i, l2_sq=1.0 - 0.01 * i, int_eps_trace0=0.01 * i) for i in range(5)]
    assert check_estimate_I(recs, p1, 1.0).margin == pytest.approx(1.0)


def test_gronwall_rate_shapes():
    recs = [EnergyRecord(t=0.1 * i, l2_sq=1.0, w1=2.0, h1x=0.5, w1x=1.0) for i in range(3)]
    np.testing.assert_allclose(gronwall_rate(recs, 2), 4 * 2 * (1 + 1) + 2 * (1 + 0.5))
    np.testing.assert_allclose(gronwall_rate(recs, 1), 0.5 * (2 + 0.5 + 2) + (1 + 1 + 0.5))
    assert np.all(gronwall_rate(recs, 3) > 0)


def test_test_function_checks():
    cubic_exp_test_function().check()
    bump = lambda x: np.exp(-((x - 2) ** 2))  # noqa: E731
    bad = TestFunction(lambda x: x ** 2 * bump(x), lambda x: 2 * x * bump(x),
                       lambda x: 2 * bump(x) + 0 * x, name="x^2 bump")
    with pytest.raises(PreconditionError, match="phi_xx"):
        bad.check()


def test_weak_residual_zero_and_precondition():
    g = build_grid(20.0, 129)
    p = SolverParams(k=2, eps=0.0, dt=0.01, T=0.05)
    tr = solve_ibvp(np.zeros(129), p, g, snapshot_every=1)
    assert weak_residual(tr, cubic_exp_test_function(), p) == 0.0
    assert weak_residual(Trajectory(grid=g), cubic_exp_test_function(), p) == 0.0
    bad = TestFunction(lambda x: x ** 2, lambda x: 2 * x, lambda x: 2 + 0 * x)
    with pytest.raises(PreconditionError):
        weak_residual(tr, bad, p)


def test_weak_residual_soliton_shrinks():
    from halfkdv.experiments import soliton_profile
    out = []
    for n, dt in ((513, 4e-3), (1025, 2e-3)):
        g = build_grid(40.0, n)
        p = SolverParams(k=1, eps=0.0, dt=dt, T=0.2)
        u0 = soliton_profile(1, 0.5, g.x, 0.0, 20.0)
        u0[0] = 0.0
        tr = solve_ibvp(u0, p, g, snapshot_every=5, record_energy=False)
        out.append(weak_residual(tr, cubic_exp_test_function(), p))
    assert out[1] < out[0] / 3


def test_interpolation_zero_and_xexp():
    g = build_grid(40.0, 2049)
    rep = check_interpolation_inequalities(np.zeros(2049), g)
    assert rep.passed and rep.passed_scaled
    rep = check_interpolation_inequalities(g.x * np.exp(-g.x), g)
    for forms in (rep.stated, rep.scaled):
        for lhs, rhs, ok in forms.values():
            assert ok and lhs < rhs
    with pytest.raises(PreconditionError):
        check_interpolation_inequalities(np.ones(2049), g)


def test_stated_l4_form_fails_for_wide_fields():
    # the stated L4/L8 forms are not dilation invariant; a wide profile breaks them
    g = build_grid(300.0, 30001)
    rep = check_interpolation_inequalities(g.x * np.exp(-g.x / 30.0), g)
    assert not rep.stated["L4"][2]
    assert rep.passed_scaled and rep.stated["sup"][2]


def test_interpolation_suite_small():
    g = build_grid(40.0, 1025)
    bad, bad_scaled, reports = interpolation_suite(g, 50, seed=3)
    assert bad == 0 and bad_scaled == 0 and len(reports) == 50
    assert isinstance(reports[0], InequalityReport)


def test_estimate_IV_small_data_envelope():
    # small data keeps the Gronwall envelope O(10), so the check has teeth
    g = build_grid(40.0, 513)
    p = SolverParams(k=2, eps=1e-2, dt=1e-3, T=0.2)
    tr = solve_ibvp(xgauss(g.x, a=0.1), p, g)
    e = check_estimate_IV(tr.records, p, tr.records[0].ut_w1)
    assert e.passed
    assert 1.0 < e.constants["C_emp"] < 100.0
    assert e.extra["max_ratio"] <= e.constants["C_emp"]
