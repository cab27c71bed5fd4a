"""Flat ``key = value`` run configuration and initial-data families.

One key per line; ``#`` starts a comment. Values are typed per key
(integer, real or string). Unknown keys, type mismatches and constraint
violations raise :class:`ParseError` naming the key and line.

Example::

    k = 1
    eps = 0
    L = 40
    n = 2049
    dt = 1e-4
    T = 1
    data = soliton
    data_c = 0.5
"""

import logging
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParseError, PreconditionError
from .grid_ops import GridSpec
from .model import NONLINEAR_FORMS, SolverParams

log = logging.getLogger(__name__)

EXPERIMENTS = ("solve", "eps-sweep", "gronwall", "soliton-bench", "mms", "check-ineq")
REQUIRED = ("k", "eps", "L", "n", "dt", "T")


@dataclass(frozen=True)
class RunConfig:
    k: int = 1
    eps: float = 0.0
    L: float = 40.0
    n: int = 2049
    dt: float = 1e-4
    T: float = 1.0
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    newton_max_iters: int = 8
    stencil_order: int = 2
    nonlinear_form: str = "skew"
    compat_tol: float = 1e-2
    data: str = "xgauss"
    data_a: float = 1.0
    data_s: float = 1.5
    data_x0: float = 4.0
    data_c: float = 0.5
    data_k: int = 0
    data_file: str = ""
    mollify: int = 0
    experiment: str = "solve"
    out_dir: str = "out"
    energy_every: int = 1
    snapshot_every: int = 0
    seed: int = 0
    sweep_eps: str = "1e-2,1e-3,1e-4"
    pert_amp: float = 1e-6
    pert_x0: float = 5.0
    soliton_x0: float = 30.0
    n_fields: int = 1000
    workers: int = 1

    def solver_params(self):
        return SolverParams(
            k=self.k, eps=self.eps, dt=self.dt, T=self.T, picard_tol=self.picard_tol,
            picard_max_iters=self.picard_max_iters, newton_max_iters=self.newton_max_iters,
            stencil_order=self.stencil_order, nonlinear_form=self.nonlinear_form,
            compat_tol=self.compat_tol,
        )

    def grid(self):
        return GridSpec(self.L, self.n)

    def data_spec(self):
        return DataSpec(self.data, self.data_a, self.data_s, self.data_x0, self.data_c,
                        self.data_k or self.k, self.data_file, self.mollify)

    def sweep_list(self):
        return parse_real_list(self.sweep_eps, "sweep_eps")

    def with_(self, **changes):
        return replace(self, **changes)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_DEFAULTS = {f.name: f.default for f in fields(RunConfig)}


def parse_real_list(text, key=None, line=None):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"expected comma-separated reals, got {text!r}", key, line) from exc


def _convert(key, raw, line):
    typ = _TYPES[key]
    if typ in (int, "int"):
        try:
            return int(raw, 10)
        except ValueError:
            raise ParseError(f"expected an integer, got {raw!r}", key, line) from None
    if typ in (float, "float"):
        try:
            v = float(raw)
        except ValueError:
            raise ParseError(f"expected a real number, got {raw!r}", key, line) from None
        if not math.isfinite(v):
            raise ParseError(f"expected a finite real, got {raw!r}", key, line)
        return v
    return raw


def _checks(cfg):
    """(key, ok, message) triples; ordered so the most specific fires first."""
    return (
        ("k", cfg.k != 4, "k=4 is the critical case and is not supported"),
        ("k", cfg.k in (1, 2, 3), f"k must be 1, 2 or 3, got {cfg.k}"),
        ("eps", 0.0 <= cfg.eps <= 1.0, f"eps must lie in [0, 1], got {cfg.eps}"),
        ("L", cfg.L > 0, "L must be positive"),
        ("n", cfg.n >= 32, "n must be at least 32"),
        ("dt", cfg.dt > 0, "dt must be positive"),
        ("T", cfg.T > 0, "T must be positive"),
        ("dt", cfg.dt < cfg.T, f"dt={cfg.dt} must be smaller than T={cfg.T}"),
        ("picard_tol", cfg.picard_tol > 0, "must be positive"),
        ("picard_max_iters", cfg.picard_max_iters >= 1, "must be at least 1"),
        ("newton_max_iters", cfg.newton_max_iters >= 0, "must be non-negative"),
        ("stencil_order", cfg.stencil_order in (2, 4), "must be 2 or 4"),
        ("nonlinear_form", cfg.nonlinear_form in NONLINEAR_FORMS,
         f"must be one of {', '.join(NONLINEAR_FORMS)}"),
        ("compat_tol", cfg.compat_tol > 0, "must be positive"),
        ("data", cfg.data in FAMILIES, f"unknown family; known: {', '.join(sorted(FAMILIES))}"),
        ("data_file", cfg.data != "file" or bool(cfg.data_file), "required when data = file"),
        ("data_s", cfg.data_s > 0, "must be positive"),
        ("data_c", cfg.data_c > 0, "must be positive"),
        ("data_k", cfg.data_k in (0, 1, 2), "must be 0 (use k), 1 or 2"),
        ("mollify", cfg.mollify >= 0, "must be non-negative"),
        ("experiment", cfg.experiment in EXPERIMENTS, f"must be one of {', '.join(EXPERIMENTS)}"),
        ("energy_every", cfg.energy_every >= 1, "must be at least 1"),
        ("snapshot_every", cfg.snapshot_every >= 0, "must be non-negative (0 = endpoints)"),
        ("n_fields", cfg.n_fields >= 1, "must be at least 1"),
        ("workers", cfg.workers >= 1, "must be at least 1"),
    )


def validate(cfg, lines=None):
    lines = lines or {}
    for key, ok, msg in _checks(cfg):
        if not ok:
            raise ParseError(msg, key, lines.get(key))
    try:
        eps_list = cfg.sweep_list()
    except ParseError as exc:
        raise ParseError(str(exc), "sweep_eps", lines.get("sweep_eps")) from None
    if any(not 0 < e <= 1 for e in eps_list) or any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ParseError("must be strictly decreasing values in (0, 1]", "sweep_eps",
                         lines.get("sweep_eps"))
    try:
        cfg.solver_params()
        cfg.grid()
    except ConfigurationError as exc:
        raise ParseError(str(exc)) from None
    return cfg


def parse_config(text, overrides=()):
    """Parse a configuration document into a validated :class:`RunConfig`.

    ``overrides`` are extra ``key=value`` strings applied after the document;
    errors in them carry no line number.
    """
    values, lines = {}, {}
    items = [(i, ln) for i, ln in enumerate(text.splitlines(), 1)]
    items += [(None, o) for o in overrides]
    for lineno, raw in items:
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", line=lineno)
        key, value = (p.strip() for p in body.split("=", 1))
        if key not in _TYPES:
            raise ParseError("unknown key", key, lineno)
        if key in values and lineno is not None:
            raise ParseError("duplicate key", key, lineno)
        values[key] = _convert(key, value, lineno)
        lines[key] = lineno
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ParseError(f"missing required keys: {', '.join(missing)}")
    return validate(RunConfig(**values), lines)


def load_config(path, overrides=()):
    return parse_config(Path(path).read_text(), overrides)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def echo(cfg):
    """Every key with its value, defaults included, in declaration order."""
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


# --- initial data ----------------------------------------------------------

@dataclass(frozen=True)
class DataSpec:
    family: str = "zero"
    a: float = 1.0
    s: float = 1.0
    x0: float = 4.0
    c: float = 0.5
    k: int = 1
    path: str = ""
    mollify: int = 0


FAMILIES = {}
_ORIGIN_TOL = 1e-6


def register_family(name, fn, probe=None):
    """Add a named initial-data family ``fn(x, spec) -> array``.

    The family is evaluated at x=0 with ``probe`` (a DataSpec; default
    parameters if omitted) and rejected if the value there is not
    numerically zero. Pass ``probe=False`` to skip the check.
    """
    if probe is not False:
        v = float(np.asarray(fn(np.zeros(1), probe or DataSpec(name)))[0])
        if abs(v) > _ORIGIN_TOL:
            raise ConfigurationError(f"family {name!r} violates u0(0)=0 (value {v:.3e})")
    FAMILIES[name] = fn


def _soliton(x, d):
    from .experiments import soliton_profile
    return soliton_profile(d.k, d.c, x, 0.0, d.x0)


def _file(x, d):
    arr = np.loadtxt(d.path, delimiter="," if str(d.path).endswith(".csv") else None, ndmin=2)
    if arr.shape[1] == 1:
        if arr.shape[0] != len(x):
            raise ConfigurationError(
                f"{d.path}: {arr.shape[0]} samples for a {len(x)}-node grid (give x,u columns)"
            )
        return arr[:, 0]
    return np.interp(x, arr[:, 0], arr[:, 1], left=0.0, right=0.0)


register_family("zero", lambda x, d: np.zeros_like(x))
register_family("xgauss", lambda x, d: d.a * x * np.exp(-((x - d.x0) / d.s) ** 2))
register_family("xexp", lambda x, d: d.a * x * np.exp(-x))
register_family("soliton", _soliton, DataSpec("soliton", x0=20.0))
register_family("file", _file, probe=False)


def mollify(u, passes):
    """``passes`` sweeps of the (1, 2, 1)/4 filter on interior nodes."""
    u = np.array(u, dtype=float)
    for _ in range(passes):
        u[1:-1] = 0.25 * u[:-2] + 0.5 * u[1:-1] + 0.25 * u[2:]
    return u


def initial_data(spec, grid, return_clamp=False):
    """Sample a family on ``grid`` and set node 0 to exactly zero.

    The size of the value removed at node 0 is logged (and returned with
    ``return_clamp``).
    """
    if spec.family not in FAMILIES:
        raise ConfigurationError(f"unknown initial-data family {spec.family!r}")
    u = np.array(FAMILIES[spec.family](grid.x, spec), dtype=float)
    if u.shape != (grid.n_nodes,):
        raise ConfigurationError(f"family {spec.family!r} returned shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise PreconditionError(f"family {spec.family!r} produced non-finite values")
    u = mollify(u, spec.mollify)
    clamp = abs(float(u[0]))
    if clamp:
        log.info("initial data: clamped u0(0) = %.3e to 0", u[0])
    u[0] = 0.0
    return (u, clamp) if return_clamp else u
