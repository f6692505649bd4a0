"""Exception hierarchy shared by the engine, the discovery loop and the CLI."""

from __future__ import annotations


class HomeostasisError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(HomeostasisError, ValueError):
    """Input contains non-finite entries or has the wrong shape."""


class DomainError(HomeostasisError, ValueError):
    """Argument lies outside the domain of the function (e.g. not SPD)."""


class TensorRangeError(HomeostasisError, ArithmeticError):
    """Result would overflow double precision."""


class DegenerateMaterialError(HomeostasisError, ArithmeticError):
    """Elastic moduli cannot be formed because 3*kappa + mu vanishes."""


class ConvergenceError(HomeostasisError, ArithmeticError):
    """Local Newton iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(ConvergenceError):
    """Derivative of the homeostatic residual vanished during the Newton update."""


class StepFailure(HomeostasisError, ArithmeticError):
    """A single material-point step could not be completed."""


class SimulationError(HomeostasisError):
    """A trajectory aborted; carries the failing step index and the cause."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"step {index} failed: {cause}")
        self.index = index
        self.cause = cause


class NumericalFailure(HomeostasisError, ArithmeticError):
    """A gradient component came out non-finite."""

    def __init__(self, message: str, component: int | None = None):
        super().__init__(message)
        self.component = component


class ParseError(HomeostasisError, ValueError):
    """A data, weights or config file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class TrainingAborted(HomeostasisError):
    """Training stopped because a loss or gradient evaluation failed."""

    def __init__(self, epoch: int, cause: Exception):
        super().__init__(f"epoch {epoch}: {cause}")
        self.epoch = epoch
        self.cause = cause
