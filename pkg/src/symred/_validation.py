"""Small input-validation helpers shared across estimators and functions."""

from __future__ import annotations

import numbers

import numpy as np


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one row")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_vector(y, name: str = "y", length: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float64 array with finite entries."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    if length is not None and y.shape[0] != length:
        raise ValueError(
            f"{name} has length {y.shape[0]}, expected {length}"
        )
    return y


def check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = check_matrix(X)
    y = check_vector(y, length=X.shape[0])
    return X, y


def check_count(value, name: str, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def as_generator(random_state) -> np.random.Generator:
    """Turn ``None``, an int seed, or a Generator into a Generator."""
    if random_state is None:
        return np.random.default_rng()
    if isinstance(random_state, np.random.Generator):
        return random_state
    if isinstance(random_state, numbers.Integral):
        return np.random.default_rng(int(random_state))
    raise TypeError(
        "random_state must be None, an integer seed, or a numpy Generator, "
        f"got {type(random_state).__name__}"
    )
