import numpy as np
import pytest

from netvariance.errors import (
    AlgebraicLoopError,
    IllPosedNetworkError,
    InvalidTransferError,
    InvalidUsageError,
    NetVarianceError,
    OptimizationError,
    PoleOnUnitCircleError,
    UnidentifiableError,
)
from netvariance.lti import RationalTransfer


def test_invalid_usage_exception() -> None:
    with pytest.raises(InvalidUsageError):
        RationalTransfer([1.0], [0.0, 1.0])


def test_invalid_transfer_is_invalid_usage() -> None:
    assert issubclass(InvalidTransferError, InvalidUsageError)
    assert issubclass(InvalidUsageError, NetVarianceError)


def test_pole_on_unit_circle_message() -> None:
    transfer = RationalTransfer([1.0], [1.0, -1.0])
    with pytest.raises(PoleOnUnitCircleError) as error:
        transfer.freq_response(np.array([0.0]))
    assert error.value.omega == 0.0
    assert "omega=0 rad/sample" in str(error.value)


def test_algebraic_loop_message() -> None:
    error = AlgebraicLoopError([1, 2, 1])
    assert error.cycle == [1, 2, 1]
    assert str(error) == "algebraic loop (delay-free cycle): 1 -> 2 -> 1"


def test_ill_posed_message() -> None:
    assert str(IllPosedNetworkError("I - G is singular", omega=0.5)).endswith(
        "at omega=0.5 rad/sample"
    )
    assert IllPosedNetworkError("I - G is singular").omega is None


def test_optimization_error_lists_diagnostics() -> None:
    error = OptimizationError("every start failed", ["start 0: boom", "start 1: bang"])
    assert str(error) == "every start failed: start 0: boom; start 1: bang"
    assert str(OptimizationError("every start failed")) == "every start failed"


def test_unidentifiable_direction() -> None:
    error = UnidentifiableError(np.array([0.7071, -0.7071]))
    assert "[0.7071, -0.7071]" in str(error)
