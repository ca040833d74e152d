from collections.abc import Callable
from os import PathLike
from pathlib import Path
from typing import Any

import numpy as np
from pydantic.v1 import validators as v
from pydantic.v1.errors import PydanticTypeError, PydanticValueError

from genrl._utils.utils import coalesce
from genrl.errors import InvalidInputError


def wrap_error(validator: Callable, key: str, value: Any) -> Any:
    """
    Wrap the error in an InvalidInputError, with a nicer message.

    :param validator: A pydantic validator function.
    :param key: The variable name to use in the error message.
    :param value: The variable value.
    """
    try:
        return validator(value)
    except (PydanticTypeError, PydanticValueError) as err:
        msg = f"{key}: {err!s}"
        raise InvalidInputError(msg) from err


def validate_int(*args: int, key: str, minimum: int | None = None) -> int:
    raw = coalesce(*args)
    if isinstance(raw, np.integer):
        raw = int(raw)
    value = wrap_error(
        validator=v.strict_int_validator,
        key=key,
        value=raw,
    )
    if minimum is not None and value < minimum:
        raise InvalidInputError(f"{key}: must be >= {minimum}, got {value}.")
    return value


def validate_float(*args: float, key: str) -> float:
    value = wrap_error(
        validator=v.float_validator,
        key=key,
        value=coalesce(*args),
    )
    if not np.isfinite(value):
        raise InvalidInputError(f"{key}: must be finite, got {value}.")
    return value


def validate_file_path(*args: PathLike | str, key: str = "file_path") -> Path:
    def validate_fp(f):
        p = v.path_validator(f)
        return v.path_exists_validator(p)

    return wrap_error(validator=validate_fp, key=key, value=coalesce(*args))


def validate_vector(value: Any, key: str, dim: int | None = None) -> np.ndarray:
    """
    Coerce to a finite 1-D float64 array, optionally of a given length.
    """
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as err:
        raise InvalidInputError(f"{key}: not a real vector.") from err
    if arr.ndim != 1:
        raise InvalidInputError(f"{key}: expected a 1-D vector, got shape {arr.shape}.")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"{key}: expected length {dim}, got {arr.shape[0]}.")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{key}: contains non-finite values.")
    return arr
