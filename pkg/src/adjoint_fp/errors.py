"""Exception types shared across the package."""


class AdjointFpError(Exception):
    """Base class for all package errors."""


class GridMismatchError(AdjointFpError):
    """Two grid functions on different grids were combined."""


class NonFiniteError(AdjointFpError):
    """NaN or Inf appeared in the evolving state."""

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"non-finite state detected at t={time:.6g}")


class StepUnderflowError(AdjointFpError):
    """Automatic step control collapsed below the resolvable step size."""

    def __init__(self, time: float, dt: float):
        self.time = time
        self.dt = dt
        super().__init__(f"auto time step underflow at t={time:.6g} (dt={dt:.3e})")


class NoConvergenceError(AdjointFpError):
    """An iterative sub-solver hit its iteration cap."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )


class ConfigError(AdjointFpError):
    """Base class for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(ConfigError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
