"""Baseline learners: linear regression and a subsample random forest.

The forest follows a fixed recipe: each of the 50 trees trains on 30% of the
instances and 50% of the features, both sampled without replacement per
tree, and grows greedily on the weighted-variance criterion with no depth
limit. Linear regression is the ordinary least-squares lower bound, solved
minimum-norm so rank-deficient (e.g. heavily reduced) training sets still
fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ._validation import as_generator, check_count, check_X_y

__all__ = [
    "ForestConfig",
    "LinearRegression",
    "RandomForestRegressor",
    "fit_linear",
    "fit_forest",
    "predict_linear",
    "predict_forest",
]


def _as_X(data) -> np.ndarray:
    X = getattr(data, "X", data)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


class LinearRegression(BaseEstimator, RegressorMixin):
    """Ordinary least squares with intercept.

    Rank-deficient systems are solved via the minimum-norm solution, so
    duplicated features or fewer rows than features still produce finite
    coefficients.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        A = np.column_stack([X, np.ones(X.shape[0])])
        coefs, *_ = np.linalg.lstsq(A, y, rcond=None)
        self.weights_ = coefs[:-1]
        self.intercept_ = float(coefs[-1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, data):
        if not hasattr(self, "weights_"):
            raise NotFittedError("LinearRegression is not fitted")
        X = _as_X(data)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.weights_ + self.intercept_


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters of the subsample forest."""

    n_trees: int = 50
    instance_fraction: float = 0.30
    feature_fraction: float = 0.50
    min_leaf_size: int = 2
    seed: int = 0

    def __post_init__(self):
        check_count(self.n_trees, "n_trees")
        check_count(self.min_leaf_size, "min_leaf_size")
        for name, frac in (
            ("instance_fraction", self.instance_fraction),
            ("feature_fraction", self.feature_fraction),
        ):
            if not 0.0 < frac <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {frac}")


def best_split(X, y, features, min_leaf_size: int):
    """Exhaustive greedy split: the (feature, threshold) minimising the
    children's summed squared error.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Ties break toward the lower feature index, then the lower
    threshold. Returns ``None`` when no split leaves ``min_leaf_size`` rows
    on both sides.
    """
    n = y.shape[0]
    if n < 2 * min_leaf_size:
        return None
    yc = y - y.mean()  # shift-invariant SSE, better conditioned
    best = None
    for f in features:
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = yc[order]
        csum = np.cumsum(ys)
        csum2 = np.cumsum(ys * ys)
        total, total2 = csum[-1], csum2[-1]
        left_n = np.arange(1, n)
        valid = xs[:-1] < xs[1:]
        valid &= (left_n >= min_leaf_size) & (n - left_n >= min_leaf_size)
        if not np.any(valid):
            continue
        idx = np.flatnonzero(valid)
        ln = left_n[idx]
        sse = (
            csum2[idx]
            - csum[idx] ** 2 / ln
            + (total2 - csum2[idx])
            - (total - csum[idx]) ** 2 / (n - ln)
        )
        k = int(np.argmin(sse))
        j = int(idx[k])
        score = float(sse[k])
        if best is None or score < best[0]:
            lo, hi = xs[j], xs[j + 1]
            thr = (lo + hi) / 2.0
            if thr >= hi:  # midpoint rounded up to the right value
                thr = lo
            best = (score, int(f), float(thr))
    if best is None:
        return None
    return best[1], best[2]


class _RegressionTree:
    """Axis-aligned threshold tree, mean-target leaves, no depth limit."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_node_samples: list[int] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.n_node_samples.append(0)
        return len(self.feature) - 1

    def fit(self, X, y, features, min_leaf_size: int) -> "_RegressionTree":
        stack = [(np.arange(X.shape[0]), self._new_node())]
        while stack:
            idx, nid = stack.pop()
            ys = y[idx]
            self.value[nid] = float(ys.mean())
            self.n_node_samples[nid] = idx.shape[0]
            if np.all(ys == ys[0]):
                continue
            found = best_split(X[idx], ys, features, min_leaf_size)
            if found is None:
                continue
            f, thr = found
            self.feature[nid] = f
            self.threshold[nid] = thr
            mask = X[idx, f] <= thr
            lid = self._new_node()
            rid = self._new_node()
            self.left[nid] = lid
            self.right[nid] = rid
            stack.append((idx[mask], lid))
            stack.append((idx[~mask], rid))
        return self

    def predict(self, X) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(np.arange(X.shape[0]), 0)]
        while stack:
            idx, nid = stack.pop()
            if idx.shape[0] == 0:
                continue
            f = self.feature[nid]
            if f < 0:
                out[idx] = self.value[nid]
                continue
            mask = X[idx, f] <= self.threshold[nid]
            stack.append((idx[mask], self.left[nid]))
            stack.append((idx[~mask], self.right[nid]))
        return out

    def leaf_sizes(self) -> list[int]:
        return [
            n
            for f, n in zip(self.feature, self.n_node_samples)
            if f < 0
        ]

    def used_features(self) -> set[int]:
        return {f for f in self.feature if f >= 0}


class RandomForestRegressor(BaseEstimator, RegressorMixin):
    """Forest of greedy variance-split trees on per-tree row/feature subsets.

    Per-tree randomness is derived by spawning child generators from the
    seed, so results do not depend on any execution order.
    """

    def __init__(
        self,
        n_trees: int = 50,
        instance_fraction: float = 0.30,
        feature_fraction: float = 0.50,
        min_leaf_size: int = 2,
        random_state=None,
    ):
        self.n_trees = n_trees
        self.instance_fraction = instance_fraction
        self.feature_fraction = feature_fraction
        self.min_leaf_size = min_leaf_size
        self.random_state = random_state

    def fit(self, X, y):
        config = ForestConfig(
            n_trees=self.n_trees,
            instance_fraction=self.instance_fraction,
            feature_fraction=self.feature_fraction,
            min_leaf_size=self.min_leaf_size,
        )
        X, y = check_X_y(X, y)
        if X.shape[0] < 2:
            raise ValueError("forest training requires at least 2 rows")
        n, p = X.shape
        n_sub = math.ceil(config.instance_fraction * n)
        p_sub = math.ceil(config.feature_fraction * p)
        rng = as_generator(self.random_state)
        self.trees_ = []
        self.feature_subsets_ = []
        for child in rng.spawn(config.n_trees):
            rows = child.choice(n, size=n_sub, replace=False)
            feats = np.sort(child.choice(p, size=p_sub, replace=False))
            tree = _RegressionTree().fit(
                X[rows], y[rows], feats, config.min_leaf_size
            )
            self.trees_.append(tree)
            self.feature_subsets_.append(feats)
        self.n_features_in_ = p
        return self

    def predict(self, data):
        if not hasattr(self, "trees_"):
            raise NotFittedError("RandomForestRegressor is not fitted")
        X = _as_X(data)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total += tree.predict(X)
        return total / len(self.trees_)


def fit_linear(train) -> LinearRegression:
    """Least-squares fit of a Dataset (or (X, y) pair)."""
    X, y = _unpack(train)
    return LinearRegression().fit(X, y)


def fit_forest(train, config: ForestConfig | None = None) -> RandomForestRegressor:
    if config is None:
        config = ForestConfig()
    X, y = _unpack(train)
    return RandomForestRegressor(
        n_trees=config.n_trees,
        instance_fraction=config.instance_fraction,
        feature_fraction=config.feature_fraction,
        min_leaf_size=config.min_leaf_size,
        random_state=config.seed,
    ).fit(X, y)


def predict_linear(model: LinearRegression, data) -> np.ndarray:
    return model.predict(data)


def predict_forest(model: RandomForestRegressor, data) -> np.ndarray:
    return model.predict(data)


def _unpack(train):
    if hasattr(train, "X") and hasattr(train, "y"):
        return train.X, train.y
    return train
