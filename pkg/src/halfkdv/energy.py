"""Energy functionals along trajectories and checks of the a priori estimates.

Every record holds instantaneous functionals of u and u_t plus cumulative
time integrals (trapezoid rule in t). The ``check_estimate_*`` functions are
reporters: they never raise on a failed bound, they return an entry with a
negative margin.

Notation: ``(f, g)_p`` is the integral of (1+x)**p f g over [0, L].
"""

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigurationError, PreconditionError, ShapeError
from .grid_ops import boundary_trace_uxx, weighted_inner
from .model import u_t_residual

# --- records ---------------------------------------------------------------

ENERGY_COLUMNS = (
    "t", "l2_sq", "w1", "w2", "h1x", "w1x", "trace0", "ut_w1", "ut_l2", "sup_u_sq",
    "int_eps_trace0", "int_h1x", "int_w1x", "int_eps_uxx", "int_uxt",
)
EXTRA_COLUMNS = ("uxx_sq", "w1xx", "uxt_sq", "int_eps_w1xx")


@dataclass(frozen=True)
class EnergyRecord:
    """Functionals of one field state.

    Columns past ``int_uxt`` are extra diagnostics: ``uxx_sq`` = ||u_xx||^2,
    ``w1xx`` = ((1+x), u_xx^2), ``uxt_sq`` = ||u_xt||^2 and the running
    integral of eps*w1xx needed by the second weighted estimate.
    """

    t: float = 0.0
    l2_sq: float = 0.0
    w1: float = 0.0
    w2: float = 0.0
    h1x: float = 0.0
    w1x: float = 0.0
    trace0: float = 0.0
    ut_w1: float = 0.0
    ut_l2: float = 0.0
    sup_u_sq: float = 0.0
    int_eps_trace0: float = 0.0
    int_h1x: float = 0.0
    int_w1x: float = 0.0
    int_eps_uxx: float = 0.0
    int_uxt: float = 0.0
    uxx_sq: float = 0.0
    w1xx: float = 0.0
    uxt_sq: float = 0.0
    int_eps_w1xx: float = 0.0

    def as_row(self):
        return tuple(getattr(self, f.name) for f in fields(self))

    def as_dict(self):
        return asdict(self)


RECORD_COLUMNS = tuple(f.name for f in fields(EnergyRecord))

# integral column -> (integrand column, multiply by eps)
_INTEGRALS = {
    "int_eps_trace0": ("trace0", True),
    "int_h1x": ("h1x", False),
    "int_w1x": ("w1x", False),
    "int_eps_uxx": ("uxx_sq", True),
    "int_uxt": ("uxt_sq", False),
    "int_eps_w1xx": ("w1xx", True),
}


def record(state, ops, params, prev=None, source=None):
    """EnergyRecord of ``state``; integrals extend ``prev`` by one trapezoid.

    ``u_t`` comes from the PDE residual, not from differencing in time.
    """
    grid = ops.grid
    u = grid.check_field(getattr(state, "u", state), "state")
    t = float(getattr(state, "t", 0.0))
    ux = ops.d1.apply(u)
    uxx = ops.d2.apply(u)
    ut = u_t_residual(state, params, ops, source)
    uxt = ops.d1.apply(ut)
    vals = dict(
        t=t,
        l2_sq=weighted_inner(u, u, 0, grid),
        w1=weighted_inner(u, u, 1, grid),
        w2=weighted_inner(u, u, 2, grid),
        h1x=weighted_inner(ux, ux, 0, grid),
        w1x=weighted_inner(ux, ux, 1, grid),
        trace0=boundary_trace_uxx(u, grid) ** 2,
        ut_w1=weighted_inner(ut, ut, 1, grid),
        ut_l2=weighted_inner(ut, ut, 0, grid),
        sup_u_sq=float(np.max(u * u)),
        uxx_sq=weighted_inner(uxx, uxx, 0, grid),
        w1xx=weighted_inner(uxx, uxx, 1, grid),
        uxt_sq=weighted_inner(uxt, uxt, 0, grid),
    )
    eps = params.eps
    for name, (src, scaled) in _INTEGRALS.items():
        if prev is None:
            vals[name] = 0.0
            continue
        dt = t - prev.t
        c = eps if scaled else 1.0
        vals[name] = getattr(prev, name) + 0.5 * dt * c * (getattr(prev, src) + vals[src])
    return EnergyRecord(**vals)


# --- constants -------------------------------------------------------------

def _nonneg(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v)) or v < 0:
            raise ConfigurationError(f"{k} must be a finite non-negative real, got {v!r}")


def c1_constant(l2_u0, T):
    """1 + T*||u0||**4, with ``l2_u0`` the (unsquared) L2 norm."""
    _nonneg(l2_u0=l2_u0, T=T)
    return 1.0 + T * l2_u0 ** 4


def c2_constant(l2_u0, w2_u0, T, C1):
    """1 + 2*C1**2*T*||u0||**2*w2_u0."""
    _nonneg(l2_u0=l2_u0, w2_u0=w2_u0, T=T, C1=C1)
    return 1.0 + 2.0 * C1 ** 2 * T * l2_u0 ** 2 * w2_u0


# --- reports ---------------------------------------------------------------

@dataclass
class EstimateEntry:
    """Outcome of one bound along a trajectory.

    ``lhs`` and ``rhs`` are taken at ``worst_time``, the record with the
    smallest margin (rhs - lhs)/rhs.
    """

    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    worst_time: float
    constants: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass
class EstimateReport:
    entries: list = field(default_factory=list)
    C1: float = float("nan")
    C2: float = float("nan")

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def _margins(lhs, rhs):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(rhs != 0, (rhs - lhs) / np.where(rhs != 0, rhs, 1.0),
                     np.where(lhs <= 0, 1.0, -np.inf))
    return m


def _entry(name, times, lhs, rhs, tol=0.0, constants=None, extra=None):
    m = _margins(lhs, rhs)
    if m.size == 0:
        return EstimateEntry(name, 0.0, 0.0, 1.0, True, 0.0, constants or {}, extra or {})
    i = int(np.argmin(m))
    lhs_i = float(np.broadcast_to(lhs, m.shape)[i])
    rhs_i = float(np.broadcast_to(rhs, m.shape)[i])
    return EstimateEntry(name, lhs_i, rhs_i, float(m[i]), bool(m[i] >= -tol),
                         float(times[i]), constants or {}, extra or {})


def _col(records, name):
    return np.array([getattr(r, name) for r in records], dtype=float)


def check_estimate_I(records, params, l2_u0_sq, rel_tol=1e-3, step_tol=1e-8):
    """L2 identity ||u||^2 + eps*int trace0 = ||u0||^2 (eps > 0) or decay (eps = 0).

    For eps > 0 the left-hand value is the maximum relative identity residual
    and the bound is ``rel_tol``. For eps = 0 it is the largest increase of
    ||u||^2 between consecutive records relative to ||u0||^2, bounded by
    ``step_tol``.
    """
    t = _col(records, "t")
    l2 = _col(records, "l2_sq")
    scale = l2_u0_sq if l2_u0_sq > 0 else 1.0
    if params.eps > 0:
        resid = np.abs(l2 + _col(records, "int_eps_trace0") - l2_u0_sq) / scale
        return _entry("I", t, resid, rel_tol, extra={"mode": "identity",
                                                     "max_residual": float(resid.max(initial=0.0))})
    inc = np.diff(l2, prepend=l2[:1]) / scale if l2.size else l2
    return _entry("I", t, inc, step_tol, extra={"mode": "decay",
                                                "max_increase": float(inc.max(initial=0.0))})


def check_estimate_II(records, params, w1_u0, l2_u0=None, T=None, rhs_scale=1.0, ux_coef=1.0):
    """w1(t) + int(eps*trace0 + c*||u_x||^2 + 5 eps ||u_xx||^2) <= C1 w1(0).

    ``ux_coef`` is the coefficient c on the ||u_x||^2 integral (1 by
    default; the un-absorbed form uses 3, also reported in ``extra``).
    ``rhs_scale`` multiplies the bound (checker self-tests).
    """
    if l2_u0 is None:
        l2_u0 = math.sqrt(records[0].l2_sq) if records else 0.0
    T = params.T if T is None else T
    C1 = c1_constant(l2_u0, T)
    t = _col(records, "t")
    base = _col(records, "w1") + _col(records, "int_eps_trace0") + 5.0 * _col(records, "int_eps_uxx")
    rhs = rhs_scale * C1 * w1_u0
    lhs = base + ux_coef * _col(records, "int_h1x")
    alt = _entry("II(c=3)", t, base + 3.0 * _col(records, "int_h1x"), rhs)
    return _entry("II", t, lhs, rhs, constants={"C1": C1},
                  extra={"margin_coef3": alt.margin, "passed_coef3": alt.passed})


def check_estimate_III(records, params, w2_u0, l2_u0=None, T=None, rhs_scale=1.0):
    """w2(t) + int(2 w1x + 10 eps ((1+x), u_xx^2)) <= C2 w2(0)."""
    if l2_u0 is None:
        l2_u0 = math.sqrt(records[0].l2_sq) if records else 0.0
    T = params.T if T is None else T
    C1 = c1_constant(l2_u0, T)
    C2 = c2_constant(l2_u0, w2_u0, T, C1)
    t = _col(records, "t")
    lhs = _col(records, "w2") + 2.0 * _col(records, "int_w1x") + 10.0 * _col(records, "int_eps_w1xx")
    return _entry("III", t, lhs, rhs_scale * C2 * w2_u0, constants={"C1": C1, "C2": C2})


def gronwall_rate(records, k, l2_u0_sq=None):
    """Rate g(t) bounding d/dt ((1+x), u_t^2) <= g ((1+x), u_t^2).

    Assembled from the recorded w1 = ((1+x),u^2), ||u||^2, ||u_x||^2 and
    ((1+x),u_x^2); the sup-norm factors are removed with sup u^2 <= ||u||^2
    + ||u_x||^2.
    """
    l2 = _col(records, "l2_sq")
    w1 = _col(records, "w1")
    h1x = _col(records, "h1x")
    w1x = _col(records, "w1x")
    if l2_u0_sq is None:
        l2_u0_sq = l2[0] if l2.size else 0.0
    if k == 1:
        return 0.5 * (w1 + 0.5 * l2 + 2.0 * w1x) + (1.0 + l2 + h1x)
    if k == 2:
        return 4.0 * w1 * (l2 + w1x) + 2.0 * (l2_u0_sq + h1x)
    if k == 3:
        s = l2 + h1x
        return 0.5 * (w1 + 0.5 * l2 + 2.0 * w1x) * s ** 2 + 2.0 * s ** 1.5
    raise ConfigurationError(f"no Gronwall rate for k={k}")


def _cumtrapz(y, t):
    out = np.zeros_like(y)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def check_estimate_IV(records, params, ut0_w1=None, rate=None):
    """((1+x), u_t^2)(t) <= exp(int_0^t g) ((1+x), u_t^2)(0).

    ``rate`` overrides the assembled Gronwall rate (an array aligned with
    ``records``); used by checker self-tests.
    """
    t = _col(records, "t")
    ut = _col(records, "ut_w1")
    if ut0_w1 is None:
        ut0_w1 = ut[0] if ut.size else 0.0
    g = gronwall_rate(records, params.k) if rate is None else np.asarray(rate, dtype=float)
    log_env = _cumtrapz(g, t)
    ratio = ut / ut0_w1 if ut0_w1 > 0 else np.zeros_like(ut)
    # compare in log space: the envelope overflows for O(1) data
    with np.errstate(divide="ignore"):
        log_ratio = np.log(ratio)
    margin = np.where(ratio > 0, -np.expm1(np.minimum(log_ratio - log_env, 700.0)), 1.0) + 0.0
    if ut0_w1 == 0:
        margin = np.where(ut > 0, -np.inf, 1.0)
    log_c = float(log_env[-1]) if log_env.size else 0.0
    consts = {"log_C_emp": log_c, "C_emp": math.exp(min(log_c, 700.0))}
    extra = {"max_ratio": float(ratio.max(initial=0.0))}
    if margin.size == 0:
        return EstimateEntry("IV", 0.0, 0.0, 1.0, True, 0.0, consts, extra)
    i = int(np.argmin(margin))
    rhs_i = ut0_w1 * math.exp(min(float(log_env[i]), 700.0))
    return EstimateEntry("IV", float(ut[i]), rhs_i, float(margin[i]), bool(margin[i] >= 0),
                         float(t[i]), consts, extra)


def check_estimates(records, params, u0_record=None):
    """Run the four checks with inputs taken from the first record."""
    r0 = u0_record or records[0]
    l2_u0 = math.sqrt(r0.l2_sq)
    entries = [
        check_estimate_I(records, params, r0.l2_sq),
        check_estimate_II(records, params, r0.w1, l2_u0),
        check_estimate_III(records, params, r0.w2, l2_u0),
        check_estimate_IV(records, params, r0.ut_w1),
    ]
    C1 = c1_constant(l2_u0, params.T)
    return EstimateReport(entries, C1, c2_constant(l2_u0, r0.w2, params.T, C1))


# --- weak form -------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Test function phi with its first three derivatives, as callables of x."""

    __test__ = False  # not a pytest class

    phi: object
    phi_x: object
    phi_xx: object
    phi_xxx: object = None
    name: str = "phi"

    def check(self, atol=1e-12):
        for label, f in (("phi", self.phi), ("phi_x", self.phi_x), ("phi_xx", self.phi_xx)):
            v = float(np.asarray(f(np.array([0.0])))[0])
            if abs(v) > atol:
                raise PreconditionError(f"test function {self.name}: {label}(0) = {v:.3e} != 0")


def cubic_exp_test_function():
    """phi = x**3 exp(-x)."""
    e = np.exp
    return TestFunction(
        phi=lambda x: x ** 3 * e(-x),
        phi_x=lambda x: (3 * x ** 2 - x ** 3) * e(-x),
        phi_xx=lambda x: (6 * x - 6 * x ** 2 + x ** 3) * e(-x),
        phi_xxx=lambda x: (6 - 18 * x + 9 * x ** 2 - x ** 3) * e(-x),
        name="x^3 exp(-x)",
    )


def weak_residual_at(state, testfn, params, ops, include_eps=True):
    """(u_t, phi) + (u_x, phi_xx) - (u**(k+1), phi_x)/(k+1) at one state.

    With ``include_eps`` and eps > 0 the regularizing term
    eps*(u_xx, phi_xxx) is added, so the residual targets the regularized
    problem.
    """
    grid = ops.grid
    x = grid.x
    u = grid.check_field(getattr(state, "u", state))
    ut = u_t_residual(state, params, ops)
    ux = ops.d1.apply(u)
    k = params.k
    r = (weighted_inner(ut, testfn.phi(x), 0, grid)
         + weighted_inner(ux, testfn.phi_xx(x), 0, grid)
         - weighted_inner(u ** (k + 1), testfn.phi_x(x), 0, grid) / (k + 1))
    if include_eps and params.eps > 0:
        if testfn.phi_xxx is None:
            raise PreconditionError("eps > 0 needs phi_xxx")
        r += params.eps * weighted_inner(ops.d2.apply(u), testfn.phi_xxx(x), 0, grid)
    return abs(r)


def weak_residual(trajectory, testfn, params, ops=None, include_eps=True):
    """Max over the stored snapshots of the weak-form residual."""
    from .model import build_operators

    testfn.check()
    if not trajectory.snapshots:
        return 0.0
    ops = ops or build_operators(trajectory.grid, params)
    return max(weak_residual_at(s, testfn, params, ops, include_eps) for s in trajectory.snapshots)


# --- interpolation inequalities ---------------------------------------------

@dataclass
class InequalityReport:
    """Left/right sides of the embedding inequalities for one field.

    ``stated`` holds the forms L4 <= 2^(1/2)|u_x|^(1/2)|u|^(1/2),
    L8 <= 4^(3/4)|u_x|^(3/4)|u|^(1/4) and sup u^2 <= 2|u||u_x|; ``scaled``
    holds the dilation-consistent forms L4 <= 2^(1/4)|u|^(3/4)|u_x|^(1/4)
    and L8 <= 8^(1/8)|u|^(5/8)|u_x|^(3/8). Each value is (lhs, rhs, ok).
    """

    stated: dict
    scaled: dict
    slack: float

    @property
    def passed(self):
        return all(v[2] for v in self.stated.values())

    @property
    def passed_scaled(self):
        return all(v[2] for v in self.scaled.values())


def check_interpolation_inequalities(state, grid, slack=None):
    u = grid.check_field(getattr(state, "u", state))
    if u[0] != 0.0:
        raise PreconditionError(f"u(0) must vanish, got {u[0]!r}")
    slack = 1.0 + 10.0 * grid.dx if slack is None else slack
    w = grid.quadrature_weights(0)
    ux = np.gradient(u, grid.dx, edge_order=2)
    a = math.sqrt(float(w @ u ** 2))
    b = math.sqrt(float(w @ ux ** 2))
    l4 = float(w @ u ** 4) ** 0.25
    l8 = float(w @ u ** 8) ** 0.125
    sup2 = float(np.max(u * u))

    def item(lhs, rhs):
        return (lhs, rhs, bool(lhs <= slack * rhs))

    stated = {
        "L4": item(l4, math.sqrt(2.0) * b ** 0.5 * a ** 0.5),
        "L8": item(l8, 4.0 ** 0.75 * b ** 0.75 * a ** 0.25),
        "sup": item(sup2, 2.0 * a * b),
    }
    scaled = {
        "L4": item(l4, 2.0 ** 0.25 * a ** 0.75 * b ** 0.25),
        "L8": item(l8, 8.0 ** 0.125 * a ** 0.625 * b ** 0.375),
        "sup": stated["sup"],
    }
    return InequalityReport(stated, scaled, slack)


def random_smooth_field(grid, rng, max_terms=4, width=(0.2, 5.0), center=(0.0, 10.0)):
    """x * sum_j a_j exp(-((x - c_j)/s_j)**2): smooth and zero at x=0."""
    x = grid.x
    m = int(rng.integers(1, max_terms + 1))
    a = rng.normal(size=m)
    s = rng.uniform(*width, size=m)
    c = rng.uniform(*center, size=m)
    u = x * np.sum(a[:, None] * np.exp(-((x[None, :] - c[:, None]) / s[:, None]) ** 2), axis=0)
    u[0] = 0.0
    return u


def interpolation_suite(grid, n_fields=1000, seed=0):
    """Check the inequalities on ``n_fields`` random fields.

    Returns (violations of stated forms, violations of scaled forms, reports).
    """
    rng = np.random.default_rng(seed)
    reports = [check_interpolation_inequalities(random_smooth_field(grid, rng), grid)
               for _ in range(n_fields)]
    bad = sum(not r.passed for r in reports)
    bad_scaled = sum(not r.passed_scaled for r in reports)
    return bad, bad_scaled, reports
