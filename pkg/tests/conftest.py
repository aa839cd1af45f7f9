import csv

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20250808)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)


def linear_data(n=100, seed=0, noise=0.0):
    """y = 2*x0 - x1 + 3 (+ optional noise)."""
    gen = np.random.default_rng(seed)
    X = gen.uniform(-3, 3, (n, 2))
    y = 2 * X[:, 0] - X[:, 1] + 3
    if noise:
        y = y + gen.normal(0, noise, n)
    return X, y


def interaction_data(n=300, seed=0, noise=0.0, n_test=1000):
    """y = x0*x1 + sin(x2); returns (X, y, X_test, y_test)."""
    gen = np.random.default_rng(seed)

    def make(rows):
        X = gen.uniform(-3, 3, (rows, 3))
        y = X[:, 0] * X[:, 1] + np.sin(X[:, 2])
        if noise:
            y = y + gen.normal(0, noise, rows)
        return X, y

    X, y = make(n)
    X_test, y_test = make(n_test)
    return X, y, X_test, y_test


def two_blobs(n=200, seed=0, separation=10.0):
    gen = np.random.default_rng(seed)
    half = n // 2
    a = gen.normal(0.0, 1.0, (half, 2))
    b = gen.normal(separation, 1.0, (n - half, 2))
    return np.vstack([a, b])


def dataset_from_arrays(X, y, target_name="y"):
    from symred.dataset import Dataset

    X = np.asarray(X, dtype=np.float64)
    return Dataset(
        X=X,
        y=np.asarray(y, dtype=np.float64),
        feature_names=tuple(f"x{i}" for i in range(X.shape[1])),
        target_name=target_name,
    )
