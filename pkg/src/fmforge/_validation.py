"""Argument checks shared by the estimator API and the CLI."""
import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_offsets(X, n_modes, name="X"):
    """2-D float array of offset vectors, one row per sample, ``n_modes`` columns.

    ``None`` means a single nominal (all-zero) offset.
    """
    if X is None:
        return np.zeros((1, n_modes))
    X = check_array(X, dtype=float, ensure_2d=False, input_name=name)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n_modes:
        raise ValueError(f"{name} has {X.shape[1]} columns; expected one per mode ({n_modes})")
    return X


def check_pair(pair, n_ions):
    """Two distinct 0-based ion indices inside the chain."""
    try:
        j1, j2 = (int(j) for j in pair)
    except (TypeError, ValueError):
        raise ValueError(f"pair must hold two ion indices, got {pair!r}") from None
    if j1 == j2:
        raise ValueError("pair must contain two distinct ions")
    if not (0 <= j1 < n_ions and 0 <= j2 < n_ions):
        raise ValueError(f"pair {pair!r} outside a chain of {n_ions} ions")
    return j1, j2


def check_positive(value, name, integer=False, allow_zero=False):
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero) or not np.isfinite(value):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, "
                         f"got {value!r}")
    return value
