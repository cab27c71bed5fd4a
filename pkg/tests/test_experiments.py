import numpy as np
import pytest
import sympy as sp

from halfkdv.errors import ConfigurationError, SetupError
from halfkdv.experiments import (
    Manufactured, eps_sweep, gronwall_uniqueness_test, manufactured_solution_test,
    soliton_benchmark, soliton_profile,
)
from halfkdv.grid_ops import build_grid
from halfkdv.model import SolverParams

from conftest import xgauss

X, T = sp.symbols("x t")


@pytest.mark.parametrize("k,c", [(1, 0.5), (1, 1.3), (2, 0.5), (2, 2.0)])
def test_soliton_closed_forms_solve_gkdv(k, c):
    x0 = sp.Rational(3)
    if k == 1:
        u = 12 * c ** 2 * sp.sech(c * (X - 4 * c ** 2 * T - x0)) ** 2
    else:
        u = sp.sqrt(6 * c) * sp.sech(sp.sqrt(c) * (X - c * T - x0))
    res = sp.diff(u, T) + u ** k * sp.diff(u, X) + sp.diff(u, X, 3)
    f = sp.lambdify((X, T), res, "numpy")
    xs = np.linspace(-5, 10, 61)
    assert np.max(np.abs(f(xs, 0.7))) < 1e-10
    np.testing.assert_allclose(
        soliton_profile(k, c, xs, 0.7, 3.0), sp.lambdify((X, T), u, "numpy")(xs, 0.7), rtol=1e-13)


def test_soliton_profile_rejects():
    with pytest.raises(ConfigurationError):
        soliton_profile(3, 0.5, np.zeros(3), 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        soliton_profile(1, -0.5, np.zeros(3), 0.0, 1.0)


@pytest.mark.parametrize("k,eps,m", [(1, 0.0, 1), (2, 0.01, 2), (3, 0.3, 2), (1, 0.0, 3)])
def test_manufactured_source_matches_sympy(k, eps, m):
    u = 0.7 * X ** m * sp.exp(-X) * sp.sin(T)
    f = sp.diff(u, T) + u ** k * sp.diff(u, X) + sp.diff(u, X, 3) - eps * sp.diff(u, X, 5)
    fs = sp.lambdify((X, T), f, "numpy")
    ms = Manufactured(k, eps, m, 0.7)
    xs = np.linspace(0, 12, 97)
    np.testing.assert_allclose(ms.source(xs, 0.4), fs(xs, 0.4), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(ms.u(xs, 0.4), sp.lambdify((X, T), u, "numpy")(xs, 0.4))


def test_mms_zero_solution():
    rep = manufactured_solution_test(SolverParams(k=1, eps=0.0, dt=0.01, T=1.0), amplitude=0.0)
    assert rep.errors == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("k,eps", [(1, 0.0), (1, 0.01), (2, 1e-4)])
def test_mms_second_order(k, eps):
    rep = manufactured_solution_test(SolverParams(k=k, eps=eps, dt=0.01, T=1.0))
    assert rep.min_order >= 1.8


def test_mms_fourth_order_stencils_more_accurate():
    p = SolverParams(k=1, eps=0.0, dt=0.01, T=1.0)
    e2 = manufactured_solution_test(p).errors[-1]
    e4 = manufactured_solution_test(p.with_(stencil_order=4)).errors[-1]
    assert e4 < e2 / 10


def test_sweep_validation():
    g = build_grid(20.0, 129)
    p = SolverParams(k=2, eps=0.0, dt=0.01, T=0.05)
    for bad in ([1e-3, 1e-2], [], [2.0], [1e-2, 1e-2]):
        with pytest.raises(ConfigurationError):
            eps_sweep(np.zeros(129), p, g, bad)


def test_sweep_zero_data():
    g = build_grid(20.0, 129)
    p = SolverParams(k=2, eps=0.0, dt=0.01, T=0.05)
    res = eps_sweep(np.zeros(129), p, g, [1e-2, 1e-3])
    assert all(e.sup_dist == 0 and e.terminal_dist == 0 for e in res.entries)
    assert res.complete and res.eps == [1e-2, 1e-3]


def test_sweep_records_member_failure():
    g = build_grid(40.0, 257)
    p = SolverParams(k=2, eps=0.0, dt=0.01, T=0.05, picard_max_iters=1, newton_max_iters=0)
    res = eps_sweep(xgauss(g.x), p, g, [1e-2])
    assert not res.complete and res.entries[0].error
    assert not res.passed


def test_sweep_process_pool_matches_serial():
    g = build_grid(40.0, 257)
    p = SolverParams(k=2, eps=0.0, dt=0.01, T=0.05)
    a = eps_sweep(xgauss(g.x), p, g, [1e-2, 1e-3])
    b = eps_sweep(xgauss(g.x), p, g, [1e-2, 1e-3], workers=2)
    assert [e.sup_dist for e in a.entries] == [e.sup_dist for e in b.entries]


def test_gronwall_zero_perturbation():
    g = build_grid(40.0, 257)
    p = SolverParams(k=2, eps=0.0, dt=0.01, T=0.1)
    res = gronwall_uniqueness_test(xgauss(g.x), np.zeros(257), p, g)
    assert res.identically_zero and res.passed
    assert np.all(res.w1_z == 0)


def test_gronwall_forces_k2_and_small_perturbation():
    g = build_grid(40.0, 513)
    p = SolverParams(k=1, eps=0.0, dt=0.005, T=0.1)
    pert = 1e-6 * xgauss(g.x, x0=5.0)
    res = gronwall_uniqueness_test(xgauss(g.x), pert, p, g)
    assert res.w1_z[0] > 0 and not res.identically_zero
    assert res.passed and res.fitted_rate <= res.bound_rate


def test_gronwall_different_dt_is_discretization_level():
    g = build_grid(40.0, 513)
    p = SolverParams(k=2, eps=0.0, dt=0.005, T=0.1)
    u0 = xgauss(g.x)
    res = gronwall_uniqueness_test(u0, np.zeros(513), p, g, params2=p.with_(dt=0.0025))
    w1_u0 = np.sum((1 + g.x) * u0 ** 2) * g.dx
    assert res.w1_z[0] == 0 and 0 < res.w1_z.max() < 1e-6 * w1_u0
    assert len(res.times) > 2


def test_soliton_setup_error():
    g = build_grid(40.0, 513)
    p = SolverParams(k=1, eps=0.0, dt=0.01, T=1.0)
    with pytest.raises(SetupError):
        soliton_benchmark(1, 0.5, p, g, x0=5.0)
    with pytest.raises(SetupError):
        soliton_benchmark(1, 0.5, p, g, x0=35.0)


def test_soliton_benchmark_small():
    g = build_grid(40.0, 1025)
    p = SolverParams(k=2, eps=0.0, dt=1e-3, T=0.5)
    rep = soliton_benchmark(2, 0.5, p, g, x0=15.0)
    assert len(rep.levels) == 2
    assert 1.8 <= rep.orders[0] <= 2.2
    assert rep.levels[-1].l2_drift < 1e-4
