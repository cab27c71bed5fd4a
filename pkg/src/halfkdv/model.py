"""Generalized KdV / Kawahara right-hand side on the truncated half-line.

The evolution equation is

    u_t + u**k u_x + u_xxx - eps u_xxxxx = 0,   u(0,t) = 0  (and u_x(0,t) = 0 if eps > 0)

with eps = 0 giving the generalized KdV equation itself.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DivergenceError, PreconditionError, ShapeError
from .grid_ops import BoundaryConditions, combine, d_op, second_derivative

log = logging.getLogger(__name__)

SUPPORTED_K = (1, 2, 3)
NONLINEAR_FORMS = ("skew", "conservative")


@dataclass(frozen=True)
class SolverParams:
    """Physical and numerical parameters of one run."""

    k: int
    eps: float
    dt: float
    T: float
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    newton_max_iters: int = 8
    stencil_order: int = 2
    nonlinear_form: str = "skew"
    compat_tol: float = 1e-2

    def __post_init__(self):
        if self.k == 4:
            raise ConfigurationError(
                "k=4 is the critical case (finite-time blow-up for large data); not supported"
            )
        if self.k not in SUPPORTED_K:
            raise ConfigurationError(f"k must be one of {SUPPORTED_K}, got {self.k!r}")
        for name in ("eps", "dt", "T", "picard_tol", "compat_tol"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigurationError(f"{name} must be a finite real, got {v!r}")
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigurationError(f"eps must lie in [0, 1], got {self.eps}")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigurationError("dt and T must be positive")
        if self.dt >= self.T:
            raise ConfigurationError(f"dt={self.dt} must be smaller than T={self.T}")
        if self.picard_tol <= 0 or self.compat_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.picard_max_iters < 1 or self.newton_max_iters < 0:
            raise ConfigurationError("iteration limits must be positive")
        if self.stencil_order not in (2, 4):
            raise ConfigurationError(f"stencil_order must be 2 or 4, got {self.stencil_order}")
        if self.nonlinear_form not in NONLINEAR_FORMS:
            raise ConfigurationError(
                f"nonlinear_form must be one of {NONLINEAR_FORMS}, got {self.nonlinear_form!r}"
            )

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def regime(self):
        """'global' for k in {1, 2}; 'local-theory' for k = 3."""
        return "global" if self.k <= 2 else "local-theory"

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class FieldState:
    """Nodal values u_j at time t."""

    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 1:
            raise ShapeError("FieldState.u must be one-dimensional")
        if not np.all(np.isfinite(u)):
            raise DivergenceError("non-finite values in field", time=self.t)
        if u[0] != 0.0:
            raise PreconditionError(f"u(0) must vanish, got u[0]={u[0]!r}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class OperatorSet:
    """Operators for one (grid, eps, stencil order) triple.

    ``linear`` is D3 - eps*D5 with the Dirichlet rows 0 and n-1 zeroed, so
    that u_t = -linear(u) - N(u) on the unknowns.
    """

    grid: object
    eps: float
    d1: object
    d2: object
    d3: object
    d5: object
    linear: object
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)


def build_operators(grid, params):
    bc = BoundaryConditions.for_eps(params.eps)
    q = params.stencil_order
    d1 = d_op(grid, 1, bc, q)
    d3 = d_op(grid, 3, bc, q)
    d5 = d_op(grid, 5, bc, q)
    if params.eps > 0:
        lin = combine((1.0, d3), (-params.eps, d5))
    else:
        lin = combine((1.0, d3))
    data = lin.data.copy()
    up, n = lin.upper, lin.n
    # zero rows 0 and n-1: entry (i, j) lives at data[up + i - j, j]
    for i in (0, n - 1):
        for j in range(max(0, i - lin.lower), min(n, i + lin.upper + 1)):
            data[up + i - j, j] = 0.0
    data.setflags(write=False)
    lin = type(lin)(data, lin.lower, lin.upper, 0, q, grid.dx, lin.boundary_rows, lin.interior)
    return OperatorSet(grid, params.eps, d1, second_derivative(grid, q), d3, d5, lin, bc)


def nonlinear_flux(u, k):
    """Conservative flux u**(k+1)/(k+1); its x-derivative is u**k u_x."""
    if k not in SUPPORTED_K:
        raise ConfigurationError(f"k must be one of {SUPPORTED_K}, got {k!r}")
    u = np.asarray(u, dtype=float)
    return u ** (k + 1) / (k + 1)


def nonlinear_term(u, k, ops, form="skew"):
    """Discrete u**k u_x.

    ``form='skew'`` uses (D(u**(k+1)) + u**k D u)/(k+2), whose inner product
    with u vanishes identically when u(0) = u(L) = 0 (central D is skew on
    the unknowns).  ``form='conservative'`` is D(u**(k+1)/(k+1)).
    """
    if form == "conservative":
        out = ops.d1.apply(nonlinear_flux(u, k))
    else:
        uk = u ** k
        out = (ops.d1.apply(uk * u) + uk * ops.d1.apply(u)) / (k + 2)
    out[0] = 0.0
    out[-1] = 0.0
    return out


def _field(state, ops):
    u = getattr(state, "u", state)
    u = ops.grid.check_field(u)
    if u[0] != 0.0:
        raise PreconditionError(f"u(0) must vanish, got u[0]={u[0]!r}")
    return u, getattr(state, "t", None)


def rhs(state, params, ops, source=None):
    """u_t = -N(u) - D3 u + eps D5 u (+ source), zero at the Dirichlet nodes."""
    u, t = _field(state, ops)
    with np.errstate(over="ignore", invalid="ignore"):
        out = -nonlinear_term(u, params.k, ops, params.nonlinear_form) - ops.linear.apply(u)
        if source is not None:
            f = np.asarray(source(ops.grid.x, t), dtype=float)
            out[1:-1] += f[1:-1]
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite right-hand side", time=t)
    return out


def u_t_residual(state, params, ops, source=None):
    """u_t evaluated from the PDE residual (same values as :func:`rhs`)."""
    return rhs(state, params, ops, source)
