"""Numerical studies: vanishing-eps limit, uniqueness, solitons, MMS."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .energy import cubic_exp_test_function
from .errors import ConfigurationError, HalfKdVError, PreconditionError, SetupError
from .grid_ops import build_grid, weighted_inner
from .model import SolverParams, build_operators
from .timestepper import solve_ibvp

log = logging.getLogger(__name__)


def _l2(grid, v):
    return math.sqrt(weighted_inner(v, v, 0, grid))


def _cadence(params, n_out=100):
    return max(1, params.n_steps // n_out)


# --- eps sweep -------------------------------------------------------------

@dataclass
class SweepEntry:
    eps: float
    terminal_dist: float
    sup_dist: float
    max_eps_half_uxx: float = float("nan")
    vanishing: float = float("nan")
    error: str = ""


@dataclass
class SweepResult:
    """Distances of each eps run to the eps=0 run, sampled at common times.

    ``max_eps_half_uxx`` is the max over t of eps**0.5 ||u_xx||;
    ``vanishing`` is eps * max_t ||u_xx|| * ||phi_xxx|| for phi = x^3 e^-x.
    """

    entries: list = field(default_factory=list)
    reference_error: str = ""

    @property
    def eps(self):
        return [e.eps for e in self.entries]

    @property
    def complete(self):
        return not self.reference_error and all(not e.error for e in self.entries)

    @property
    def monotone(self):
        d = [e.sup_dist for e in self.entries]
        return self.complete and all(a > b for a, b in zip(d, d[1:]))

    @property
    def bounded(self):
        """eps**0.5 ||u_xx|| does not grow as eps decreases."""
        b = [e.max_eps_half_uxx for e in self.entries]
        return self.complete and all(v <= b[0] * (1 + 1e-12) for v in b)

    @property
    def passed(self):
        return self.monotone and self.bounded


def _sweep_member(u0, params, grid, every):
    """Snapshots and max ||u_xx|| of one run (top level so it pickles)."""
    ops = build_operators(grid, params)
    uxx = lambda s: _l2(grid, ops.d2.apply(s.u))  # noqa: E731
    tr = solve_ibvp(u0, params, grid, snapshot_every=every, record_energy=False,
                    ops=ops, monitor=uxx)
    return np.array([s.u for s in tr.snapshots]), max(tr.monitor)


def eps_sweep(u0, params, grid, eps_list, workers=1, snapshot_every=None):
    """Run the eps=0 reference and one run per eps in ``eps_list``.

    Member failures are recorded in the entry's ``error`` field rather than
    raised.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ConfigurationError("eps_list is empty")
    if any(not 0 < e <= 1 for e in eps_list):
        raise ConfigurationError("sweep eps values must lie in (0, 1]")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError(f"eps_list must be strictly decreasing, got {eps_list}")
    every = snapshot_every or _cadence(params)
    runs = [params.with_(eps=0.0)] + [params.with_(eps=e) for e in eps_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_sweep_member, u0, p, grid, every) for p in runs]
            outcomes = [_outcome(f.result) for f in futs]
    else:
        outcomes = [_outcome(lambda p=p: _sweep_member(u0, p, grid, every)) for p in runs]

    result = SweepResult()
    ref, ref_err = outcomes[0]
    result.reference_error = ref_err
    phi3 = _l2(grid, cubic_exp_test_function().phi_xxx(grid.x))
    w = grid.quadrature_weights(0)
    for e, (out, err) in zip(eps_list, outcomes[1:]):
        if err or ref_err:
            result.entries.append(SweepEntry(e, float("nan"), float("nan"),
                                             error=err or "reference run failed"))
            continue
        snaps, uxx_max = out
        d = np.sqrt(((snaps - ref[0]) ** 2) @ w)
        result.entries.append(SweepEntry(
            e, float(d[-1]), float(d.max()), math.sqrt(e) * uxx_max, e * uxx_max * phi3,
        ))
    return result


def _outcome(call):
    try:
        return call(), ""
    except HalfKdVError as exc:
        log.warning("sweep member failed: %s", exc)
        return None, str(exc)


# --- uniqueness ------------------------------------------------------------

GRONWALL_COEFFICIENT = 10.0 / 3.0


@dataclass
class GronwallResult:
    """Growth of w1_z = ((1+x), z^2) for z = u1 - u2.

    ``bound_rate`` is max_t C (|u1|_H2^2 + |u2|_H2^2) with C = 10/3 and
    |u|_H2^2 = |u|^2 + |u_x|^2 + |u_xx|^2.
    """

    times: np.ndarray
    w1_z: np.ndarray
    fitted_rate: float
    bound_rate: float
    zero_tol: float = 1e-12

    @property
    def identically_zero(self):
        return bool(np.all(self.w1_z <= self.zero_tol))

    @property
    def passed(self):
        if self.identically_zero:
            return True
        return bool(self.fitted_rate <= self.bound_rate)


def _h2_sq(ops, grid, u):
    ux = ops.d1.apply(u)
    uxx = ops.d2.apply(u)
    return (weighted_inner(u, u, 0, grid) + weighted_inner(ux, ux, 0, grid)
            + weighted_inner(uxx, uxx, 0, grid))


def gronwall_uniqueness_test(u0, perturbation, params, grid, snapshot_every=None,
                             params2=None):
    """Evolve u0 and u0 + perturbation (k=2) and fit the growth of w1_z.

    ``params2`` optionally runs the second trajectory with different
    numerical parameters (same T); times are matched by value.
    """
    if params.k != 2:
        log.info("uniqueness test runs with k=2 (got k=%d)", params.k)
        params = params.with_(k=2)
    params2 = (params2 or params).with_(k=2)
    u0 = grid.check_field(u0, "u0")
    pert = grid.check_field(perturbation, "perturbation")
    if u0[0] != 0 or pert[0] != 0:
        raise PreconditionError("both initial fields must vanish at x=0")
    every = snapshot_every or _cadence(params, 200)
    ops1 = build_operators(grid, params)
    ops2 = ops1 if params2 == params else build_operators(grid, params2)
    h1 = lambda s: _h2_sq(ops1, grid, s.u)  # noqa: E731
    h2 = lambda s: _h2_sq(ops2, grid, s.u)  # noqa: E731
    tr1 = solve_ibvp(u0, params, grid, snapshot_every=every, record_energy=False,
                     ops=ops1, monitor=h1)
    every2 = max(1, int(round(every * params.dt / params2.dt)))
    tr2 = solve_ibvp(u0 + pert, params2, grid, snapshot_every=every2, record_energy=False,
                     ops=ops2, monitor=h2)
    s2 = {round(s.t, 9): s.u for s in tr2.snapshots}
    times, w1z = [], []
    for s in tr1.snapshots:
        other = s2.get(round(s.t, 9))
        if other is None:
            continue
        z = s.u - other
        times.append(s.t)
        w1z.append(weighted_inner(z, z, 1, grid))
    times, w1z = np.array(times), np.array(w1z)
    bound = GRONWALL_COEFFICIENT * (max(tr1.monitor) + max(tr2.monitor))
    pos = w1z > 0
    if pos.sum() >= 2 and np.all(pos):
        rate = float(np.polyfit(times, np.log(w1z), 1)[0])
    else:
        rate = 0.0
    return GronwallResult(times, w1z, rate, bound)


# --- solitons --------------------------------------------------------------

def soliton_profile(k, c, x, t, x0):
    """Exact traveling wave: 12c^2 sech^2(c(x-4c^2 t-x0)) (k=1), sqrt(6c) sech(sqrt(c)(x-ct-x0)) (k=2)."""
    x = np.asarray(x, dtype=float)
    if c <= 0:
        raise ConfigurationError("soliton speed parameter must be positive")
    if k == 1:
        return 12.0 * c ** 2 / np.cosh(c * (x - 4.0 * c ** 2 * t - x0)) ** 2
    if k == 2:
        return math.sqrt(6.0 * c) / np.cosh(math.sqrt(c) * (x - c * t - x0))
    raise ConfigurationError(f"closed-form soliton only for k in (1, 2), got {k}")


def soliton_speed_width(k, c):
    if k == 1:
        return 4.0 * c ** 2, 1.0 / c
    return c, 1.0 / math.sqrt(c)


@dataclass
class SolitonLevel:
    n_nodes: int
    dt: float
    l2_error: float
    sup_error: float
    l2_drift: float


@dataclass
class SolitonReport:
    k: int
    c: float
    levels: list

    @property
    def l2_error(self):
        return self.levels[-1].l2_error

    @property
    def orders(self):
        e = [lv.l2_error for lv in self.levels]
        return [math.log2(a / b) for a, b in zip(e, e[1:])]


def soliton_benchmark(k, c, params, grid, x0=30.0, coarse_levels=1, widths=5.0):
    """Evolve the exact soliton and compare with the closed form at T.

    ``grid``/``params`` give the finest level; ``coarse_levels`` extra runs
    halve the resolution in x and t successively (for the order estimate).
    ``l2_drift`` is the max relative change of ||u||^2 over the run.
    """
    params = params.with_(k=k, eps=0.0)
    speed, width = soliton_speed_width(k, c)
    L, T = grid.length, params.T
    if x0 - widths * width < 0 or x0 + speed * T + widths * width > L:
        raise SetupError(
            f"soliton must stay {widths} widths ({widths * width:.3g}) inside [0, {L}] "
            f"over [0, {T}]: x0={x0}, final centre {x0 + speed * T:.3g}"
        )
    levels = []
    for lev in range(coarse_levels, -1, -1):
        f = 2 ** lev
        n = (grid.n_nodes - 1) // f + 1
        g = build_grid(L, n)
        p = params.with_(dt=params.dt * f)
        u0 = soliton_profile(k, c, g.x, 0.0, x0)
        u0[0] = 0.0
        every = max(1, p.n_steps // 20)
        tr = solve_ibvp(u0, p, g, snapshot_every=every, record_energy=False)
        m = np.array([weighted_inner(s.u, s.u, 0, g) for s in tr.snapshots])
        err = tr.final.u - soliton_profile(k, c, g.x, tr.final.t, x0)
        levels.append(SolitonLevel(n, p.dt, _l2(g, err), float(np.max(np.abs(err))),
                                   float(np.max(np.abs(m / m[0] - 1.0)))))
    return SolitonReport(k, c, levels)


# --- manufactured solutions --------------------------------------------------

def _xm_exp_derivative(m, j, x):
    """j-th derivative of x**m exp(-x)."""
    s = sum(comb(j, i) * (-1) ** (j - i) * factorial(m) / factorial(m - i) * x ** (m - i)
            for i in range(min(j, m) + 1))
    return s * np.exp(-x)


@dataclass(frozen=True)
class Manufactured:
    """u(x, t) = a x^m exp(-x) sin t and the source that makes it exact."""

    k: int
    eps: float
    m: int = 1
    a: float = 1.0

    def u(self, x, t):
        return self.a * _xm_exp_derivative(self.m, 0, np.asarray(x, float)) * math.sin(t)

    def source(self, x, t):
        x = np.asarray(x, dtype=float)
        d = [self.a * _xm_exp_derivative(self.m, j, x) for j in range(6)]
        s, c = math.sin(t), math.cos(t)
        return (d[0] * c + (d[0] * s) ** self.k * d[1] * s + d[3] * s
                - self.eps * d[5] * s)


@dataclass
class MMSReport:
    levels: list  # (n_nodes, dt, l2 error)

    @property
    def errors(self):
        return [e for _, _, e in self.levels]

    @property
    def orders(self):
        e = self.errors
        return [math.log2(a / b) if b > 0 else float("inf") for a, b in zip(e, e[1:])]

    @property
    def min_order(self):
        return min(self.orders) if self.orders else float("nan")


MMS_LEVELS = ((401, 0.02), (801, 0.01), (1601, 0.005))


def manufactured_solution_test(params, L=30.0, levels=MMS_LEVELS, T=1.0, m=None, amplitude=1.0):
    """Refinement study against u = a x^m e^-x sin t with simultaneous dx, dt halving.

    ``m`` defaults to 1 for eps=0 and 2 for eps>0 (the Kawahara problem also
    needs u_x(0)=0).
    """
    if m is None:
        m = 1 if params.eps == 0 else 2
    ms = Manufactured(params.k, params.eps, m, amplitude)
    out = []
    for n, dt in levels:
        g = build_grid(L, n)
        p = params.with_(dt=dt, T=T)
        u0 = ms.u(g.x, 0.0)
        tr = solve_ibvp(u0, p, g, source=ms.source, record_energy=False)
        out.append((n, dt, _l2(g, tr.final.u - ms.u(g.x, tr.final.t))))
    return MMSReport(out)
