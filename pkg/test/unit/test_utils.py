import numpy as np
import pytest

from netvariance.errors import InvalidUsageError
from netvariance.utils import (
    as_signal,
    coerce_to_list,
    parse_float_list,
    parse_int_list,
    validate_float,
    validate_int,
)


def test_coerce_to_list_single_item() -> None:
    assert coerce_to_list(3, class_=int) == [3]


def test_coerce_to_list_tuple() -> None:
    assert coerce_to_list((1, 2, 3), class_=int) == [1, 2, 3]


def test_coerce_to_list_wrong_class() -> None:
    with pytest.raises(InvalidUsageError):
        assert coerce_to_list([1, "a"], class_=int)


def test_coerce_to_list_allow_none() -> None:
    assert coerce_to_list(None, class_=int, allow_none=True) is None


def test_coerce_to_list_disallow_none() -> None:
    with pytest.raises(InvalidUsageError):
        assert coerce_to_list(None, class_=int)


def test_coerce_to_list_bounds() -> None:
    with pytest.raises(InvalidUsageError):
        assert coerce_to_list([1], class_=int, min_size=2)
    with pytest.raises(InvalidUsageError):
        assert coerce_to_list([1, 2], class_=int, max_size=1)


def test_validate_int() -> None:
    assert validate_int(np.int64(4), field_name="runs", min_value=1) == 4
    assert validate_int(None, allow_none=True) is None
    with pytest.raises(InvalidUsageError):
        validate_int(True)
    with pytest.raises(InvalidUsageError):
        validate_int(2.0)
    with pytest.raises(InvalidUsageError):
        validate_int(0, min_value=1)
    with pytest.raises(InvalidUsageError):
        validate_int(5, max_value=4)


def test_validate_float() -> None:
    assert validate_float(1, field_name="power") == 1.0
    assert validate_float(0.0, min_value=0.0) == 0.0
    with pytest.raises(InvalidUsageError):
        validate_float(0.0, min_value=0.0, strict=True)
    with pytest.raises(InvalidUsageError):
        validate_float(float("nan"))
    with pytest.raises(InvalidUsageError):
        validate_float("abc")
    with pytest.raises(InvalidUsageError):
        validate_float(2.0, max_value=1.0)


def test_as_signal() -> None:
    assert as_signal([1, 2, 3]).dtype == np.float64
    with pytest.raises(InvalidUsageError):
        as_signal([[1.0, 2.0]])
    with pytest.raises(InvalidUsageError):
        as_signal([1.0], min_length=2)
    with pytest.raises(InvalidUsageError):
        as_signal([1.0, np.inf])


def test_parse_float_list() -> None:
    assert parse_float_list("[1,-0.5, 0.25]") == [1.0, -0.5, 0.25]
    assert parse_float_list("[]") == []
    with pytest.raises(InvalidUsageError):
        parse_float_list("1,2")
    with pytest.raises(InvalidUsageError):
        parse_float_list("[1,x]")


def test_parse_int_list() -> None:
    assert parse_int_list("1,3,4") == [1, 3, 4]
    assert parse_int_list("[2,1]") == [2, 1]
    assert parse_int_list("") == []
    with pytest.raises(InvalidUsageError):
        parse_int_list("1,a")
