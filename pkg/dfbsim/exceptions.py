"""
Custom exceptions for the dfbsim simulator.

This module defines all custom exception classes used by the solver and the
analysis toolkit for better error handling and differentiation.
"""

from typing import Optional


class DFBSimException(Exception):
    """
    Base exception for all dfbsim-related errors.

    This is the parent class for all custom exceptions raised by the package.
    """
    pass


class ConfigException(DFBSimException):
    """
    Exception raised when a configuration is malformed or violates a constraint.

    Raised by the config parser (unknown key, missing key, unparsable number)
    and by configuration validation (non-positive extents, bad coefficient
    bounds, array shapes that do not match the grid).

    Attributes:
        line (int | None): 1-based line number of the offending key, if known.
    """

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LinearSolverException(DFBSimException):
    """
    Exception raised when a linear solve cannot be attempted.

    Raised when the right-hand side contains NaN or Inf values.
    """
    pass


class SolverConvergenceException(LinearSolverException):
    """
    Exception raised when conjugate gradients does not reach the tolerance.

    Attributes:
        iterations (int): Iterations performed before giving up.
        residual (float): Final relative residual.
    """

    def __init__(self, iterations: int, residual: float) -> None:
        super().__init__(
            f"CG did not converge after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class InstabilityException(DFBSimException):
    """
    Exception raised when a time step produces non-finite values.

    Attributes:
        reason (str): What went wrong, without step and dt.
        step (int | None): Index of the failing step, when known.
        dt (float): Step size that was used.
    """

    def __init__(self, message: str, dt: float, step: Optional[int] = None) -> None:
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"{message}{where} (dt={dt:g})")
        self.reason = message
        self.step = step
        self.dt = dt


class BlowUpDetected(DFBSimException):
    """
    Exception raised when the concentration blows up inside a time step.

    Attributes:
        cell (tuple[int, int]): Cell index (i, j) of the first offending cell.
        t_local (float): Critical time measured from the start of the step.
        t_start (float): Absolute time at the start of the step.
    """

    def __init__(self, cell: tuple[int, int], t_local: float, t_start: float = 0.0) -> None:
        super().__init__(
            f"concentration blow-up in cell {cell} at t={t_start + t_local:.6g}"
        )
        self.cell = cell
        self.t_local = t_local
        self.t_start = t_start

    @property
    def time(self) -> float:
        """Absolute blow-up time."""
        return self.t_start + self.t_local


class HypothesisViolation(DFBSimException):
    """
    Exception raised when the input lies outside the hypotheses of an analytic bound.

    For example a decay rate requested for M0 >= 1, or a lower-bound curve
    evaluated at or past the blow-up time.
    """
    pass


class NoBlowupGuarantee(HypothesisViolation):
    """
    Exception raised when the blow-up bound cannot be formed.

    Raised when the initial mass does not exceed the domain measure, i.e. the
    mean initial concentration is not above the reaction threshold 1.
    """
    pass


class VerificationFailure(DFBSimException):
    """
    Exception raised when an observed convergence order is below threshold.

    Attributes:
        table (object): The order table that failed.
    """

    def __init__(self, message: str, table: object) -> None:
        super().__init__(message)
        self.table = table


class CsvIOException(DFBSimException):
    """
    Exception raised when a CSV file cannot be written or read.

    Attributes:
        path (str): The path that failed.
    """

    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
