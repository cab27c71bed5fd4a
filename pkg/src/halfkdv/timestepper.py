"""Implicit midpoint (Crank-Nicolson) time stepping with Picard iteration.

One step solves

    (I + dt/2 A) u1 = (I - dt/2 A) u0 - dt N((u0 + u1)/2) + dt f(t + dt/2)

for u1, where A = D3 - eps D5 and N is the discrete u**k u_x.  Rows 0 and
n-1 are identity rows, so u1 vanishes at both ends exactly.  The left matrix
is factored once per run by LAPACK's banded LU; each Picard sweep is a pair
of banded triangular solves.
"""

import logging
import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import (
    DivergenceError, LinearAlgebraError, PreconditionError, StepError, StepFailure,
)
from .grid_ops import BandedOperator, boundary_trace_uxx
from .model import FieldState, build_operators, nonlinear_term

log = logging.getLogger(__name__)


# --- banded linear algebra -------------------------------------------------

def _lu_layout(data, lower, upper):
    """Copy band storage into the (2*lower + upper + 1, n) layout gbtrf wants."""
    ab = np.zeros((2 * lower + upper + 1, data.shape[1]))
    ab[lower:] = data
    return ab


class BandedLU:
    """LU factorization of a banded matrix, reusable across right-hand sides."""

    def __init__(self, data, lower, upper):
        n = data.shape[1]
        lu, piv, info = lapack.dgbtrf(_lu_layout(data, lower, upper), lower, upper, n, n)
        if info > 0:
            raise LinearAlgebraError(f"zero pivot in banded LU at row {info - 1}", row=info - 1)
        if info < 0:
            raise LinearAlgebraError(f"dgbtrf: illegal argument {-info}")
        self.lu, self.piv, self.lower, self.upper, self.n = lu, piv, lower, upper, n

    @classmethod
    def from_operator(cls, op):
        return cls(op.data, op.lower, op.upper)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise ValueError(f"right-hand side of shape {b.shape}, expected ({self.n},)")
        x, info = lapack.dgbtrs(self.lu, self.lower, self.upper, b, self.piv)
        if info != 0:
            raise LinearAlgebraError(f"dgbtrs failed (info={info})")
        return x


def banded_solve(A, b):
    """Solve ``A x = b`` for a :class:`BandedOperator` ``A``.

    Uses LU with partial pivoting confined to the band. A zero pivot raises
    :class:`LinearAlgebraError` carrying the offending row index.
    """
    b = np.asarray(b, dtype=float)
    return BandedLU(A.data, A.lower, A.upper).solve(b)


def _identity_plus(op, alpha):
    """Band data of I + alpha*op with identity rows 0 and n-1."""
    data = alpha * np.asarray(op.data, dtype=float)
    data[op.upper] += 1.0
    return data


def _row_scale(data, upper, lower, v):
    """Band data of diag(v) @ M."""
    out = np.array(data, dtype=float)
    n = out.shape[1]
    for d in range(-upper, lower + 1):  # d = i - j
        r = upper + d
        if d >= 0:
            out[r, : n - d] *= v[d:]
            out[r, n - d:] = 0.0
        else:
            out[r, -d:] *= v[: n + d]
            out[r, : -d] = 0.0
    return out


def _nonlinear_jacobian(u, k, ops, form):
    """Band data (bandwidths of D1) of dN/du at u, rows 0 and n-1 zero."""
    d1 = ops.d1
    du = d1.apply(u)
    if form == "conservative":
        J = np.asarray(d1.data) * (u ** k)[None, :]
    else:
        col = np.asarray(d1.data) * ((k + 1) * u ** k)[None, :]
        J = col + _row_scale(d1.data, d1.upper, d1.lower, u ** k)
        J[d1.upper] += k * u ** (k - 1) * du if k > 1 else du
        J /= k + 2
    J = _row_scale(J, d1.upper, d1.lower, np.r_[0.0, np.ones(len(u) - 2), 0.0])
    return J


# --- stepping --------------------------------------------------------------

@dataclass(frozen=True)
class StepInfo:
    iterations: int
    residual: float
    newton: bool = False
    wall: float = 0.0


class Stepper:
    """Holds the factored system for one (grid, params) pair."""

    def __init__(self, grid, params, ops=None, source=None):
        self.grid, self.params = grid, params
        self.ops = ops or build_operators(grid, params)
        self.source = source
        lin = self.ops.linear
        half = 0.5 * params.dt
        self._lhs = _identity_plus(lin, half)
        self._lu = BandedLU(self._lhs, lin.lower, lin.upper)
        self._rhs_op = BandedOperator(
            _identity_plus(lin, -half), lin.lower, lin.upper, 0, lin.accuracy, lin.dx,
        )

    def _explicit_part(self, u, t):
        base = self._rhs_op.apply(u)
        if self.source is not None:
            f = np.asarray(self.source(self.grid.x, t + 0.5 * self.params.dt), dtype=float)
            base[1:-1] += self.params.dt * f[1:-1]
        return base

    def _N(self, v):
        return nonlinear_term(v, self.params.k, self.ops, self.params.nonlinear_form)

    def step(self, state):
        p = self.params
        t0 = _time.perf_counter()
        u = np.asarray(getattr(state, "u", state), dtype=float)
        t = float(getattr(state, "t", 0.0))
        if u[0] != 0.0:
            raise PreconditionError(f"u(0) must vanish, got u[0]={u[0]!r}")
        base = self._explicit_part(u, t)
        un = u.copy()
        history = []
        for it in range(1, p.picard_max_iters + 1):
            new = self._lu.solve(base - p.dt * self._N(0.5 * (u + un)))
            new[0] = new[-1] = 0.0
            change = float(np.max(np.abs(new - un)))
            history.append(change)
            un = new
            if not np.isfinite(change):
                raise DivergenceError("non-finite iterate", time=t + p.dt)
            if change < p.picard_tol:
                info = StepInfo(it, change, False, _time.perf_counter() - t0)
                return FieldState(un, t + p.dt), info
        log.debug("Picard stalled at t=%.6g (last change %.3e); trying Newton", t, history[-1])
        un = self._newton(u, un, base, history)
        info = StepInfo(len(history), history[-1], True, _time.perf_counter() - t0)
        return FieldState(un, t + p.dt), info

    def _newton(self, u, un, base, history):
        p, lin = self.params, self.ops.linear
        lower = max(lin.lower, self.ops.d1.lower)
        upper = max(lin.upper, self.ops.d1.upper)
        for _ in range(p.newton_max_iters):
            G = self._lhs_apply(un) + p.dt * self._N(0.5 * (u + un)) - base
            G[0] = un[0]
            G[-1] = un[-1]
            J = np.zeros((lower + upper + 1, len(u)))
            J[upper - lin.upper: upper + lin.lower + 1] += self._lhs
            d1 = self.ops.d1
            J[upper - d1.upper: upper + d1.lower + 1] += 0.5 * p.dt * _nonlinear_jacobian(
                0.5 * (u + un), p.k, self.ops, p.nonlinear_form)
            delta = BandedLU(J, lower, upper).solve(G)
            un = un - delta
            un[0] = un[-1] = 0.0
            change = float(np.max(np.abs(delta)))
            history.append(change)
            if not np.isfinite(change):
                raise DivergenceError("non-finite Newton iterate")
            if change < p.picard_tol:
                return un
        raise StepFailure(
            f"nonlinear solve did not converge (last change {history[-1]:.3e})",
            residual_history=tuple(history),
        )

    def _lhs_apply(self, v):
        lin = self.ops.linear
        return BandedOperator(self._lhs, lin.lower, lin.upper, 0, lin.accuracy, lin.dx).apply(v)


def step(state, params, ops, source=None):
    """Advance ``state`` by one step of size ``params.dt``.

    Convenience wrapper that refactors the system each call; use
    :class:`Stepper` for repeated steps.
    """
    new, _ = Stepper(ops.grid, params, ops, source).step(state)
    return new


# --- trajectories ----------------------------------------------------------

@dataclass
class Trajectory:
    """Snapshots at output times plus per-step metadata."""

    snapshots: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    records: list = field(default_factory=list)
    monitor: list = field(default_factory=list)
    params: object = None
    grid: object = None
    notes: dict = field(default_factory=dict)

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    @property
    def final(self):
        return self.snapshots[-1]

    def max_picard_iterations(self):
        return max((s.iterations for s in self.steps), default=0)


def compatibility(u0, grid, params):
    """One-sided estimate of u0_x(0) and whether it passes ``compat_tol``."""
    from .grid_ops import one_sided_weights

    w = np.array([float(v) for v in one_sided_weights(1, 5)])
    ux0 = float(w @ np.asarray(u0)[:5]) / grid.dx
    ok = params.eps == 0 or abs(ux0) < params.compat_tol
    return ux0, ok


def solve_ibvp(u0, params, grid, source=None, energy_every=1, snapshot_every=None,
               record_energy=True, ops=None, monitor=None):
    """Integrate from t=0 to T.

    Parameters
    ----------
    u0 : array
        Initial field on ``grid`` with ``u0[0] == 0``.
    params : SolverParams
    grid : GridSpec
    source : callable, optional
        ``source(x, t)`` added to the right-hand side (manufactured solutions).
    energy_every : int
        Record an :class:`EnergyRecord` every this many steps. Cumulative time
        integrals are only exact (trapezoid in t) for cadence 1.
    snapshot_every : int, optional
        Snapshot cadence in steps; by default only t=0 and t=T are stored.
    record_energy : bool
        Skip the energy records when False (faster benchmarks).
    monitor : callable, optional
        ``monitor(state)`` is called at t=0 and after every step; return
        values are collected in ``Trajectory.monitor``.

    Returns
    -------
    Trajectory
    """
    from .energy import record as energy_record

    u0 = grid.check_field(u0, "u0")
    if u0[0] != 0.0:
        raise PreconditionError(f"compatibility u0(0)=0 violated: u0[0]={u0[0]!r}")
    ux0, ok = compatibility(u0, grid, params)
    if not ok:
        raise PreconditionError(
            f"compatibility u0_x(0)~0 violated for eps>0: estimate {ux0:.3e} >= {params.compat_tol}"
        )
    if energy_every < 1:
        raise ValueError("energy_every must be positive")
    stepper = Stepper(grid, params, ops, source)
    ops = stepper.ops
    n_steps = params.n_steps
    snap = snapshot_every or n_steps
    state = FieldState(u0, 0.0)
    traj = Trajectory(params=params, grid=grid)
    traj.notes["ux0_estimate"] = ux0
    traj.snapshots.append(state)
    if monitor is not None:
        traj.monitor.append(monitor(state))
    rec = energy_record(state, ops, params, None, source) if record_energy else None
    if rec is not None:
        traj.records.append(rec)
    for i in range(1, n_steps + 1):
        try:
            state, info = stepper.step(state)
        except StepError as exc:
            raise exc.annotate(i, state.t + params.dt)
        state = FieldState(state.u, i * params.dt)
        traj.steps.append(info)
        if monitor is not None:
            traj.monitor.append(monitor(state))
        if rec is not None:
            new = energy_record(state, ops, params, rec, source)
            rec = new
            if i % energy_every == 0 or i == n_steps:
                traj.records.append(rec)
        if i % snap == 0 or i == n_steps:
            traj.snapshots.append(state)
    traj.notes["uxx0_final"] = boundary_trace_uxx(state, grid)
    # size of the solution near the artificial boundary x=L
    traj.notes["right_tail_max"] = float(np.max(np.abs(state.u[-max(8, grid.n_nodes // 50):])))
    return traj
