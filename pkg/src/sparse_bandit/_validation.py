"""Input checking shared by the estimators and the simulation code."""
import numbers

import numpy as np
from sklearn.utils import check_array


def check_action_matrix(X, name="actions"):
    """Return ``X`` as a finite 2-d float array with entries in [-1, 1]."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if np.any(np.abs(X) > 1.0 + 1e-12):
        raise ValueError(f"{name} must satisfy max |x_j| <= 1")
    return X


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_probability(value, name):
    value = check_positive(value, name)
    if value >= 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    return value
