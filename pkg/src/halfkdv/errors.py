"""Exception hierarchy shared by every module of the package."""


class HalfKdVError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HalfKdVError, ValueError):
    """Invalid grid, solver parameter or run configuration."""


class ParseError(ConfigurationError):
    """A configuration document could not be parsed or validated.

    Carries the offending ``key`` and 1-based ``line`` when known.
    """

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class ShapeError(HalfKdVError, ValueError):
    """Field arrays do not match the grid or each other."""


class PreconditionError(HalfKdVError, ValueError):
    """An input violates a documented precondition (e.g. u(0) != 0)."""


class SetupError(HalfKdVError, ValueError):
    """An experiment cannot be set up as requested."""


class LinearAlgebraError(HalfKdVError, ArithmeticError):
    """Singular pivot met during a banded LU factorization."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class StepError(HalfKdVError, RuntimeError):
    """Base for failures raised while advancing a trajectory.

    ``step_index`` and ``time`` are filled in by the driver loop.
    """

    def __init__(self, message, time=None, step_index=None):
        super().__init__(message)
        self.time = time
        self.step_index = step_index

    def annotate(self, step_index, time):
        self.step_index = step_index
        if self.time is None:
            self.time = time
        self.args = (f"step {step_index} (t={time:.6g}): {self.args[0]}",)
        return self


class DivergenceError(StepError):
    """Non-finite values appeared in the solution or its right-hand side."""


class StepFailure(StepError):
    """The nonlinear iteration inside one time step failed to converge."""

    def __init__(self, message, residual_history=(), time=None, step_index=None):
        super().__init__(message, time=time, step_index=step_index)
        self.residual_history = list(residual_history)
