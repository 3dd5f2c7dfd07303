"""
Custom error classes for clearer error reporting.
"""

from typing import Any, List, Optional


class NetVarianceError(Exception):
    """
    Root of every error raised deliberately by `netvariance`.

    Args:
        message: a custom error message providing details of the failure.
    """

    def __init__(self, message: str) -> "NetVarianceError":
        super(NetVarianceError, self).__init__(message)


class InvalidUsageError(NetVarianceError):
    """
    You have violated the `netvariance` API in a way that has been caught
        by validation checks (bad orders, unknown signal tags, malformed
        configuration files and the like).

    Args:
        message: a custom error message providing details of the API
            violation.
    """


class InvalidTransferError(InvalidUsageError):
    """
    A transfer function is degenerate, e.g. its denominator is the zero
        polynomial or has a vanishing constant term (not proper).
    """


class PoleOnUnitCircleError(NetVarianceError):
    """
    A transfer function was evaluated at a frequency where its denominator
        vanishes.

    Args:
        omega: the offending radian frequency.
    """

    def __init__(self, omega: float) -> "PoleOnUnitCircleError":
        super().__init__(f"pole on unit circle at omega={omega:.6g} rad/sample")
        self.omega = omega


class UnstableFilterError(NetVarianceError):
    """
    An unstable filter was asked to run a long simulation.
    """


class AlgebraicLoopError(NetVarianceError):
    """
    The network contains a cycle with zero total delay, which the
        simulator refuses to solve implicitly.

    Args:
        cycle: the node ids along the delay-free cycle.
    """

    def __init__(self, cycle: List[int]) -> "AlgebraicLoopError":
        path = " -> ".join(str(node) for node in cycle)
        super().__init__(f"algebraic loop (delay-free cycle): {path}")
        self.cycle = cycle


class IllPosedNetworkError(NetVarianceError):
    """
    `I - G` (or the block of eliminated nodes) is numerically singular at
        some frequency.

    Args:
        message: description of the failing matrix.
        omega: the offending radian frequency, when known.
    """

    def __init__(
        self, message: str, omega: Optional[float] = None
    ) -> "IllPosedNetworkError":
        if omega is not None:
            message = f"{message} at omega={omega:.6g} rad/sample"
        super().__init__(message)
        self.omega = omega


class ConsistencyError(NetVarianceError):
    """
    A predictor set violates the parallel-path or loop conditions required
        for a consistent estimate of the target module.
    """


class PredictorUnstableError(NetVarianceError):
    """
    The one-step-ahead predictor of a Box-Jenkins model is unstable
        (a root of `C` or of some `F_k` lies on or outside the unit circle).
    """


class OptimizationError(NetVarianceError):
    """
    Every start of the prediction-error minimisation diverged.

    Args:
        message: summary of the failure.
        diagnostics: one entry per start describing how it failed.
    """

    def __init__(
        self, message: str, diagnostics: Optional[List[Any]] = None
    ) -> "OptimizationError":
        details = "; ".join(str(item) for item in diagnostics or [])
        super().__init__(f"{message}: {details}" if details else message)
        self.diagnostics = diagnostics or []


class UnidentifiableError(NetVarianceError):
    """
    The information matrix is singular, so the parameterization cannot be
        identified from the data.

    Args:
        direction: unit vector spanning (numerically) the null space.
    """

    def __init__(self, direction: Any) -> "UnidentifiableError":
        values = ", ".join(f"{value:.4g}" for value in direction)
        super().__init__(
            f"unidentifiable parameterization, null-space direction [{values}]"
        )
        self.direction = direction


class NoExcitationMarginError(NetVarianceError):
    """
    The Schur complement `Phi_w1 - Gamma Upsilon^-1 Gamma^H` is not positive,
        i.e. the target input carries no information beyond the other channels.

    Args:
        omega: the offending radian frequency.
    """

    def __init__(self, omega: float) -> "NoExcitationMarginError":
        super().__init__(f"no excitation margin at omega={omega:.6g} rad/sample")
        self.omega = omega
