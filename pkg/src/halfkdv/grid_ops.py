"""Truncated half-line mesh and banded finite-difference operators.

The half-line x > 0 is truncated to [0, L] on a uniform mesh. Derivative
operators use centered stencils in the interior; rows whose stencil would
reach past x=0 or x=L take ghost values from a polynomial that interpolates
nearby nodes and honors the boundary conditions attached to that operator.
The ghost polynomial has degree m + q - 1 (m the derivative order, q the
accuracy), so boundary-adjacent rows keep formal order q.

Boundary conditions per operator (u(0) = u(L) = 0 is implicit everywhere):

========  ===========================  ==========================
order     left (x = 0)                 right (x = L)
========  ===========================  ==========================
1, 2      extrapolation only           extrapolation only
3         extrapolation only           u_x = 0
5         u_x = 0 when requested       u_x = u_xx = 0
========  ===========================  ==========================

The third-derivative closure never uses u_x(0) = 0; that condition enters
the Kawahara system only through the fifth-derivative rows.  Sharing a
constrained ghost between the two operators overdetermines the dispersive
part and is unstable once eps/dx**2 drops below O(1).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from math import factorial, isfinite

import numpy as np

from .errors import ConfigurationError, ShapeError

MIN_NODES = 32


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh x_j = j*dx, j = 0..n_nodes-1, on [0, length]."""

    length: float
    n_nodes: int

    def __post_init__(self):
        if not isinstance(self.length, (int, float)) or not isfinite(self.length):
            raise ConfigurationError(f"grid length must be finite, got {self.length!r}")
        if self.length <= 0:
            raise ConfigurationError(f"grid length must be positive, got {self.length}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < MIN_NODES:
            raise ConfigurationError(
                f"n_nodes must be an integer >= {MIN_NODES}, got {self.n_nodes}"
            )
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "n_nodes", int(self.n_nodes))

    @property
    def dx(self):
        return self.length / (self.n_nodes - 1)

    @cached_property
    def x(self):
        x = np.arange(self.n_nodes) * self.dx
        x[-1] = self.length
        x.setflags(write=False)
        return x

    @cached_property
    def _trapezoid(self):
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def quadrature_weights(self, p=0):
        """Trapezoid weights for the integral of (1+x)**p * f over [0, L]."""
        return _weights_cache(self, p)

    def check_field(self, u, name="field"):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_nodes,):
            raise ShapeError(f"{name} has shape {u.shape}, grid expects ({self.n_nodes},)")
        return u


@lru_cache(maxsize=64)
def _weights_cache(grid, p):
    w = grid._trapezoid * (1.0 + grid.x) ** p
    w.setflags(write=False)
    return w


def build_grid(L, n_nodes):
    """Build the uniform mesh on [0, L] with ``n_nodes`` nodes."""
    try:
        L = float(L)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"grid length must be a real number, got {L!r}") from exc
    return GridSpec(L, n_nodes)


@dataclass(frozen=True)
class BoundaryConditions:
    """Left boundary conditions of the regularized problem.

    ``left_ux_zero`` adds u_x(0) = 0 (the Kawahara case eps > 0).
    """

    left_ux_zero: bool = False

    @classmethod
    def for_eps(cls, eps):
        return cls(left_ux_zero=eps > 0)


@dataclass(frozen=True)
class BandedOperator:
    """Square operator stored in LAPACK band layout.

    ``data[upper + i - j, j]`` holds entry (i, j). ``boundary_rows`` lists rows
    using one-sided closures or ghost elimination; rows ``interior`` (a slice)
    apply the plain centered stencil.
    """

    data: np.ndarray
    lower: int
    upper: int
    order: int
    accuracy: int
    dx: float
    boundary_rows: tuple = ()
    interior: slice = field(default=slice(0, 0))

    @property
    def n(self):
        return self.data.shape[1]

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ShapeError(f"operator of size {self.n} applied to shape {u.shape}")
        out = self.data[self.upper] * u
        for d in range(1, self.upper + 1):
            out[:-d] += self.data[self.upper - d, d:] * u[d:]
        for d in range(1, self.lower + 1):
            out[d:] += self.data[self.upper + d, :-d] * u[:-d]
        return out

    __call__ = apply

    def __matmul__(self, u):
        return self.apply(u)

    def to_dense(self):
        n = self.n
        A = np.zeros((n, n))
        for d in range(-self.lower, self.upper + 1):
            row = self.data[self.upper - d]
            if d >= 0:
                idx = np.arange(0, n - d)
                A[idx, idx + d] = row[d:]
            else:
                idx = np.arange(-d, n)
                A[idx, idx + d] = row[: n + d]
        return A

    def row(self, i):
        """Dense copy of row ``i``."""
        return self.to_dense()[i]

    def scaled(self, factor):
        return BandedOperator(
            self.data * factor, self.lower, self.upper, self.order, self.accuracy,
            self.dx, self.boundary_rows, self.interior,
        )


def combine(*terms):
    """Linear combination of banded operators on the same mesh.

    ``terms`` are ``(coefficient, operator)`` pairs.
    """
    lower = max(op.lower for _, op in terms)
    upper = max(op.upper for _, op in terms)
    n = terms[0][1].n
    data = np.zeros((lower + upper + 1, n))
    rows = set()
    for c, op in terms:
        data[upper - op.upper: upper + op.lower + 1] += c * op.data
        rows.update(op.boundary_rows)
    first = terms[0][1]
    start = max(op.interior.start for _, op in terms)
    stop = min(op.interior.stop for _, op in terms)
    return BandedOperator(data, lower, upper, 0, first.accuracy, first.dx,
                          tuple(sorted(rows)), slice(start, stop))


# --- stencil weights (exact rational arithmetic) ---------------------------

def _solve_rational(A, b):
    """Gauss-Jordan elimination over Fractions; A is square."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(bv)] for row, bv in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ArithmeticError("singular stencil system")
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


@lru_cache(maxsize=None)
def centered_weights(m, q):
    """Centered stencil for the m-th derivative with accuracy q (unit spacing).

    Returns ``(radius, weights)`` with weights indexed by offset + radius.
    """
    r = (m + 1) // 2 + q // 2 - 1
    offsets = range(-r, r + 1)
    A = [[Fraction(o) ** p for o in offsets] for p in range(2 * r + 1)]
    b = [factorial(m) if p == m else 0 for p in range(2 * r + 1)]
    return r, tuple(_solve_rational(A, b))


@lru_cache(maxsize=None)
def one_sided_weights(m, npts):
    """Forward stencil at node 0 for the m-th derivative on nodes 0..npts-1."""
    A = [[Fraction(j) ** p for j in range(npts)] for p in range(npts)]
    b = [factorial(m) if p == m else 0 for p in range(npts)]
    return tuple(_solve_rational(A, b))


@lru_cache(maxsize=None)
def ghost_rule(n_ghost, degree, n_zero_derivs):
    """Ghost values beyond a boundary node as combinations of inner nodes.

    The polynomial P of the given degree matches u_0 (the boundary node), has
    P^(d)(0) = 0 for d = 1..n_zero_derivs and interpolates u_1, u_2, ...
    Returns a tuple of rows; row i-1 gives u_{-i} in terms of u_0..u_M.
    """
    n_interp = degree - n_zero_derivs  # inner nodes besides u_0
    if n_interp < 0:
        raise ConfigurationError("ghost polynomial degree too low for constraints")
    npar = degree + 1
    C = [[Fraction(j) ** p for p in range(npar)] for j in range(n_interp + 1)]
    for d in range(1, n_zero_derivs + 1):
        C.append([Fraction(factorial(d)) if p == d else Fraction(0) for p in range(npar)])
    # coefficients c = C^{-1} [u_0..u_M, 0..0]; ghost = V c
    cols = []
    for i in range(1, n_ghost + 1):
        v = [Fraction(-i) ** p for p in range(npar)]
        # ghost = v . C^{-1} e  ->  solve C^T y = v, take y[:M+1]
        CT = [[C[r][c] for r in range(npar)] for c in range(npar)]
        y = _solve_rational(CT, v)
        cols.append(tuple(y[: n_interp + 1]))
    return tuple(cols)


_ZERO_DERIVS = {
    # order: (left zero-derivative count without/with u_x(0)=0, right count)
    1: ((0, 0), 0),
    2: ((0, 0), 0),
    3: ((0, 0), 1),
    5: ((0, 1), 2),
}


def _build(grid, m, q, left_zero, right_zero):
    n = grid.n_nodes
    h = grid.dx
    r, w = centered_weights(m, q)
    if n < 2 * (m + q + r) + 2:
        raise ConfigurationError(f"grid too small for derivative order {m}")
    degree = m + q - 1
    lrule = ghost_rule(r, degree, left_zero)
    rrule = ghost_rule(r, degree, right_zero)
    special = {}
    # boundary nodes: one-sided estimates
    os = one_sided_weights(m, m + q)
    special[0] = {j: os[j] for j in range(m + q)}
    sign = -1 if m % 2 else 1
    special[n - 1] = {n - 1 - j: sign * os[j] for j in range(m + q)}
    for j in range(1, r):
        row = {}
        for k, wk in enumerate(w):
            idx = j + k - r
            if idx >= 0:
                row[idx] = row.get(idx, 0) + wk
            else:
                for c, g in enumerate(lrule[-idx - 1]):
                    row[c] = row.get(c, 0) + wk * g
        special[j] = row
        row = {}
        jj = n - 1 - j
        for k, wk in enumerate(w):
            idx = jj + k - r
            if idx <= n - 1:
                row[idx] = row.get(idx, 0) + wk
            else:
                for c, g in enumerate(rrule[idx - n]):
                    row[n - 1 - c] = row.get(n - 1 - c, 0) + wk * g
        special[jj] = row
    lower, upper = r, r
    for i, row in special.items():
        cols = [c for c, v in row.items() if v != 0]
        lower = max(lower, i - min(cols))
        upper = max(upper, max(cols) - i)
    data = np.zeros((lower + upper + 1, n))
    scale = 1.0 / h ** m
    idx = np.arange(r, n - r)
    for k, wk in enumerate(w):
        d = k - r
        if wk != 0:
            data[upper - d, idx + d] = float(wk) * scale
    for i, row in special.items():
        for c, v in row.items():
            data[upper + i - c, c] = float(v) * scale
    return BandedOperator(
        data, lower, upper, m, q, h,
        boundary_rows=tuple(sorted(special)), interior=slice(r, n - r),
    )


def d_op(grid, order, bc=None, accuracy=2):
    """Banded derivative operator of order 1, 3 or 5 on ``grid``.

    Parameters
    ----------
    grid : GridSpec
    order : int
        Derivative order, one of 1, 3, 5.
    bc : BoundaryConditions, optional
        Only the fifth-derivative closure reads ``bc.left_ux_zero``.
    accuracy : int
        Formal order of the centered stencil, 2 (default) or 4.
    """
    if order not in (1, 3, 5):
        raise ConfigurationError(f"derivative order must be 1, 3 or 5, got {order}")
    return _operator(grid, order, bc or BoundaryConditions(), accuracy)


def second_derivative(grid, accuracy=2):
    """u_xx operator used for diagnostics (no boundary conditions assumed)."""
    return _operator(grid, 2, BoundaryConditions(), accuracy)


def _operator(grid, order, bc, accuracy):
    if accuracy not in (2, 4):
        raise ConfigurationError(f"stencil accuracy must be 2 or 4, got {accuracy}")
    (lz_free, lz_bc), rz = _ZERO_DERIVS[order]
    lz = lz_bc if bc.left_ux_zero else lz_free
    return _cached_build(grid, order, accuracy, lz, rz)


@lru_cache(maxsize=128)
def _cached_build(grid, m, q, lz, rz):
    op = _build(grid, m, q, lz, rz)
    op.data.setflags(write=False)
    return op


_TRACE_WEIGHTS = np.array([float(v) for v in one_sided_weights(2, 6)])


def boundary_trace_uxx(state, grid):
    """One-sided estimate of u_xx(0, t), fourth-order accurate.

    ``state`` is a FieldState or a plain array of nodal values.
    """
    u = grid.check_field(getattr(state, "u", state))
    return float(_TRACE_WEIGHTS @ u[:6]) / grid.dx ** 2


def weighted_inner(f, g, p, grid):
    """Trapezoid approximation of the integral of (1+x)**p f g over [0, L]."""
    if p not in (0, 1, 2):
        raise ConfigurationError(f"weight exponent must be 0, 1 or 2, got {p}")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ShapeError(f"mismatched field lengths {f.shape} and {g.shape}")
    grid.check_field(f)
    return float(np.dot(grid.quadrature_weights(p), f * g))
