from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from halfkdv.errors import ConfigurationError, ShapeError
from halfkdv.grid_ops import (
    BoundaryConditions, GridSpec, boundary_trace_uxx, build_grid, centered_weights, combine,
    d_op, ghost_rule, one_sided_weights, second_derivative, weighted_inner,
)
from halfkdv.model import FieldState


def test_grid_basics():
    g = build_grid(2.0, 33)
    assert g.dx == 0.0625
    assert g.x[0] == 0.0 and g.x[-1] == 2.0
    assert len(g.x) == 33


@pytest.mark.parametrize("L,n", [(0.0, 64), (-1.0, 64), (float("inf"), 64), (1.0, 10), (1.0, 40.5)])
def test_grid_rejects_bad_input(L, n):
    with pytest.raises(ConfigurationError):
        GridSpec(L, n)


def test_centered_weights_frozen():
    assert centered_weights(1, 2)[1] == (Fraction(-1, 2), 0, Fraction(1, 2))
    assert centered_weights(3, 2)[1] == (Fraction(-1, 2), 1, 0, -1, Fraction(1, 2))
    r, w = centered_weights(5, 2)
    assert r == 3
    assert w == (Fraction(-1, 2), 2, Fraction(-5, 2), 0, Fraction(5, 2), -2, Fraction(1, 2))


def test_one_sided_trace_weights():
    w = one_sided_weights(2, 6)
    assert [v * 12 for v in w] == [45, -154, 214, -156, 61, -10]


def test_ghost_rules_frozen():
    assert ghost_rule(1, 4, 0) == ((5, -10, 10, -5, 1),)
    rows = ghost_rule(2, 6, 1)
    assert rows[0] == tuple(Fraction(v) for v in ("-77/10", "15", "-10", "5", "-3/2", "1/5"))
    assert rows[1] == tuple(Fraction(v) for v in ("-749/10", "140", "-105", "56", "-35/2", "12/5"))


@pytest.mark.parametrize("order,lower", [(1, 2), (3, 4), (5, 6)])
def test_bandwidths(order, lower):
    op = d_op(build_grid(2.0, 65), order)
    assert op.lower == op.upper == lower


def test_d_op_rejects_order():
    with pytest.raises(ConfigurationError):
        d_op(build_grid(1.0, 64), 2)
    with pytest.raises(ConfigurationError):
        d_op(build_grid(1.0, 64), 3, accuracy=6)


def test_operator_is_cached_and_read_only():
    g = build_grid(4.0, 129)
    a, b = d_op(g, 3), d_op(g, 3)
    assert a is b
    with pytest.raises(ValueError):
        a.data[0, 0] = 1.0


def test_dense_matches_apply():
    g = build_grid(4.0, 65)
    rng = np.random.default_rng(1)
    u = rng.normal(size=65)
    for order in (1, 3, 5):
        op = d_op(g, order, BoundaryConditions(True))
        np.testing.assert_allclose(op.to_dense() @ u, op.apply(u), rtol=1e-13, atol=1e-9)
        np.testing.assert_allclose(op.row(10), op.to_dense()[10])


def test_combine_and_scaled():
    g = build_grid(4.0, 65)
    u = np.sin(g.x)
    d3, d5 = d_op(g, 3), d_op(g, 5)
    c = combine((1.0, d3), (-0.1, d5))
    np.testing.assert_allclose(c.apply(u), d3.apply(u) - 0.1 * d5.apply(u), atol=1e-9)
    np.testing.assert_allclose(d3.scaled(2.0).apply(u), 2 * d3.apply(u))


def test_shape_error():
    g = build_grid(4.0, 65)
    with pytest.raises(ShapeError):
        d_op(g, 1).apply(np.zeros(64))


@pytest.mark.parametrize("order", [1, 3, 5])
def test_second_order_convergence_interior(order):
    # u = sin(x) on [0, 4]; error in the max norm over x in [1, 3]; coarse
    # enough that roundoff (~1e-16/dx**order) stays negligible
    errs = []
    for n in (129, 257):
        g = build_grid(4.0, n)
        exact = {1: np.cos(g.x), 3: -np.cos(g.x), 5: np.cos(g.x)}[order]
        mask = (g.x > 1) & (g.x < 3)
        errs.append(np.max(np.abs(d_op(g, order).apply(np.sin(g.x)) - exact)[mask]))
    assert 3.7 < errs[0] / errs[1] < 4.3


def test_fourth_order_stencils_converge_faster():
    errs = []
    for n in (129, 257):
        g = build_grid(4.0, n)
        mask = (g.x > 1) & (g.x < 3)
        errs.append(np.max(np.abs(d_op(g, 3, accuracy=4).apply(np.sin(g.x)) + np.cos(g.x))[mask]))
    assert errs[0] / errs[1] > 14


def test_boundary_trace():
    g = build_grid(2.0, 33)
    assert boundary_trace_uxx(g.x ** 2, g) == pytest.approx(2.0, abs=1e-10)
    # fourth order: sin has u_xx(0) = 0, exp has u_xx(0) = 1
    errs = [abs(boundary_trace_uxx(np.exp(gg.x), gg) - 1.0)
            for gg in (build_grid(1.0, 65), build_grid(1.0, 129))]
    assert errs[0] / errs[1] > 14
    st = FieldState(np.sin(g.x), 0.0)
    assert abs(boundary_trace_uxx(st, g)) < 1e-4


def test_second_derivative_operator():
    g = build_grid(2.0, 65)
    np.testing.assert_allclose(second_derivative(g).apply(g.x ** 3), 6 * g.x, atol=1e-9)


def test_weighted_inner_oracle():
    g = build_grid(40.0, 4097)
    u = g.x * np.exp(-g.x)
    oracle = integrate.quad(lambda x: (1 + x) * x ** 2 * np.exp(-2 * x), 0, 40.0)[0]
    assert weighted_inner(u, u, 1, g) == pytest.approx(oracle, rel=1e-6)
    assert oracle == pytest.approx(0.625, rel=1e-12)


def test_weighted_inner_errors():
    g = build_grid(4.0, 65)
    with pytest.raises(ConfigurationError):
        weighted_inner(g.x, g.x, 3, g)
    with pytest.raises(ShapeError):
        weighted_inner(g.x, g.x[:-1], 0, g)
