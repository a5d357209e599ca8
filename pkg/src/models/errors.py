"""
Exception hierarchy for the SA lab.
"""

from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


class InvalidArgumentError(LabError, ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedConfigurationError(InvalidArgumentError):
    """The combination of settings is valid on its own but not supported by the operation."""


class UnsupportedSizeError(InvalidArgumentError):
    """The input is larger than the configured cap of an exact estimator."""


class ConfigError(InvalidArgumentError):
    """
    An experiment configuration failed to parse or validate.

    Attributes:
        field: Dotted path of the offending field (if known)
        line: Line number in the config file (for syntax errors)
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class MdpFormatError(InvalidArgumentError):
    """An MDP text file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class DivergenceError(LabError, ArithmeticError):
    """
    A chain produced a non-finite iterate or left the divergence guard.

    Attributes:
        step: Index of the first offending iterate
        replica: Replica index within the experiment (None for a single chain)
        stepsize: Stepsize of the offending chain
    """

    def __init__(self, step: int, stepsize: float, replica: Optional[int] = None):
        self.step = step
        self.stepsize = stepsize
        self.replica = replica
        where = f" in replica {replica}" if replica is not None else ""
        super().__init__(f"chain diverged at step {step}{where} (stepsize {stepsize})")


class NonConvergenceError(LabError, ArithmeticError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
