"""
This module collects various utility functions used for validating
the input to transfers, networks, estimators and experiment configurations.
"""

import re
from typing import Any, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from .errors import InvalidUsageError

T = TypeVar("T")

_FLOAT_LIST = re.compile(r"^\[(.*)\]$")


def coerce_to_list(
    object_or_objects: Union[T, Sequence[T]],
    class_: Union[Any, Tuple[Any, ...]],
    allow_none: bool = False,
    min_size: Optional[int] = None,
    max_size: Optional[int] = None,
) -> Optional[List[T]]:
    """
    Takes an object or list of objects and validates its contents, ensuring that the
    resulting object is a list.

    Args:
        object_or_objects: the Python object or objects to validate and convert to a list.
        class_: the Python type (or tuple of types) of objects expected in the list.
        allow_none: whether or not None is a valid input (and thus output) option.
        min_size: if provided, the length of `object_or_objects` cannot be smaller than this.
        max_size: if provided, the length of `object_or_objects` cannot be larger than this.

    Returns:
        `object_or_objects` if it was a valid list, `[object_or_objects]` if it was a valid
            object, or `None` if provided and allowed.

    Throws:
        InvalidUsageError: if any of the validation checks fail.
    """
    if object_or_objects is None:
        if allow_none:
            return None
        raise InvalidUsageError(f"Expected value(s) of type `{class_}`, got None.")

    if isinstance(object_or_objects, (list, tuple, set, frozenset)):
        items = list(object_or_objects)
    else:
        items = [object_or_objects]

    if not isinstance(class_, tuple):
        class_ = (class_,)
    for item in items:
        if not isinstance(item, class_):
            raise InvalidUsageError(
                f"Type of {item} ({type(item)}) inconsistent with expected type {class_}."
            )

    length = len(items)
    if min_size is not None and length < min_size:
        raise InvalidUsageError(
            f"Size ({length}) of list of {class_} is less than `min_size` ({min_size})"
        )
    if max_size is not None and length > max_size:
        raise InvalidUsageError(
            f"Size ({length}) of list of {class_} exceeds `max_size` ({max_size})"
        )
    return items


def validate_int(
    num: Optional[int],
    field_name: str = "num",
    min_value: Optional[int] = None,
    max_value: Optional[int] = None,
    allow_none: bool = False,
) -> Optional[int]:
    """
    Performs basic validation checks against a given integer.

    Args:
        num: the number to validate.
        field_name: the name of the field the number belongs to (for error reporting).
        min_value: if `num` is less than this value, an error will be thrown.
        max_value: if `num` is greater than this value, an error will be thrown.
        allow_none: whether `None` is a valid value for `num`.

    Returns:
        The original value of `num` (as a plain `int`) if it passes all validation checks.

    Throws:
        InvalidUsageError: if any of the validation checks fail.
    """
    if num is None:
        if allow_none:
            return None
        raise InvalidUsageError(f"`{field_name}` is None, which is disallowed.")
    if isinstance(num, bool) or not isinstance(num, (int, np.integer)):
        raise InvalidUsageError(f"`{field_name}` must be an integer, not {type(num)}.")
    if min_value is not None and num < min_value:
        raise InvalidUsageError(f"`{field_name}` ({num}) is less than the minimum {min_value}")
    if max_value is not None and num > max_value:
        raise InvalidUsageError(f"`{field_name}` ({num}) exceeds the maximum {max_value}")
    return int(num)


def validate_float(
    num: Optional[float],
    field_name: str = "num",
    min_value: Optional[float] = None,
    max_value: Optional[float] = None,
    strict: bool = False,
    allow_none: bool = False,
) -> Optional[float]:
    """
    Performs basic validation checks against a given real number.

    Args:
        num: the number to validate.
        field_name: the name of the field the number belongs to (for error reporting).
        min_value: lower bound for `num`.
        max_value: upper bound for `num`.
        strict: if `True` the bounds are exclusive.
        allow_none: whether `None` is a valid value for `num`.

    Returns:
        `num` as a finite Python `float`.

    Throws:
        InvalidUsageError: if any of the validation checks fail.
    """
    if num is None:
        if allow_none:
            return None
        raise InvalidUsageError(f"`{field_name}` is None, which is disallowed.")
    try:
        value = float(num)
    except (TypeError, ValueError):
        raise InvalidUsageError(f"`{field_name}` must be a real number, not {num!r}.")
    if not np.isfinite(value):
        raise InvalidUsageError(f"`{field_name}` must be finite, got {value}.")
    if min_value is not None:
        if value < min_value or (strict and value == min_value):
            raise InvalidUsageError(
                f"`{field_name}` ({value}) is below the allowed minimum {min_value}"
            )
    if max_value is not None:
        if value > max_value or (strict and value == max_value):
            raise InvalidUsageError(
                f"`{field_name}` ({value}) is above the allowed maximum {max_value}"
            )
    return value


def as_signal(
    values: Any, field_name: str = "signal", min_length: int = 1
) -> np.ndarray:
    """
    Converts a sequence of samples into a one-dimensional, finite float array.

    Args:
        values: anything `numpy.asarray` accepts.
        field_name: the name of the field (for error reporting).
        min_length: the minimum number of samples required.

    Returns:
        A 1-D `numpy.ndarray` of dtype float64.

    Throws:
        InvalidUsageError: if the samples are not one-dimensional, finite or long enough.
    """
    signal = np.asarray(values, dtype=float)
    if signal.ndim != 1:
        raise InvalidUsageError(f"`{field_name}` must be one-dimensional.")
    if signal.size < min_length:
        raise InvalidUsageError(
            f"`{field_name}` has {signal.size} samples, at least {min_length} required."
        )
    if not np.all(np.isfinite(signal)):
        raise InvalidUsageError(f"`{field_name}` contains non-finite samples.")
    return signal


def parse_float_list(text: str, field_name: str = "list") -> List[float]:
    """
    Parses a bracketed, comma separated list of reals, e.g. `[1,-0.5,0.25]`.

    Throws:
        InvalidUsageError: if `text` is not such a list.
    """
    match = _FLOAT_LIST.match(text.strip())
    if match is None:
        raise InvalidUsageError(f"`{field_name}` must look like [a,b,...], got {text!r}")
    body = match.group(1).strip()
    if not body:
        return []
    try:
        return [float(item) for item in body.split(",")]
    except ValueError:
        raise InvalidUsageError(f"`{field_name}` contains a non-numeric entry: {text!r}")


def parse_int_list(text: str, field_name: str = "list") -> List[int]:
    """
    Parses a comma separated list of integers, optionally bracketed, e.g. `1,3,4`.

    Throws:
        InvalidUsageError: if an entry is not an integer.
    """
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    try:
        return [int(item) for item in body.split(",") if item.strip()]
    except ValueError:
        raise InvalidUsageError(f"`{field_name}` contains a non-integer entry: {text!r}")
