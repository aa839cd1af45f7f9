"""CSV regression data: loading, ordered train/test splitting, z-score scaling.

All values are parsed as float64. Rows containing non-numeric or non-finite
cells abort the load with a diagnostic naming the offending row and column;
silently dropping rows would corrupt fixed train/test splits, so it is never
done.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_count

__all__ = ["Dataset", "Normalizer", "load_csv", "split"]


@dataclass(frozen=True)
class Dataset:
    """An immutable regression dataset: feature matrix, target vector, names.

    ``target_index`` records the target's position in the original CSV header
    so a dataset can be written back with the same column order.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    target_name: str
    target_index: int = field(default=-1)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1:
            raise ValueError(f"targets must be 1-D, got shape {y.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"row mismatch: {X.shape[0]} feature rows vs {y.shape[0]} targets"
            )
        if X.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} feature names for {X.shape[1]} columns"
            )
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset contains non-finite values")
        tix = self.target_index
        if tix == -1:
            tix = X.shape[1]
        if not 0 <= tix <= X.shape[1]:
            raise ValueError(f"target_index {tix} out of range")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "target_index", tix)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def columns(self) -> tuple[str, ...]:
        """Column names in original file order (target included)."""
        names = list(self.feature_names)
        names.insert(self.target_index, self.target_name)
        return tuple(names)

    def take(self, indices) -> "Dataset":
        """New Dataset made of the given rows, in the given order."""
        indices = np.asarray(indices, dtype=np.intp)
        return self.replace(X=self.X[indices], y=self.y[indices])

    def replace(self, X=None, y=None) -> "Dataset":
        return Dataset(
            X=self.X if X is None else X,
            y=self.y if y is None else y,
            feature_names=self.feature_names,
            target_name=self.target_name,
            target_index=self.target_index,
        )

    def joint_matrix(self) -> np.ndarray:
        """Features and target as one (n_rows, n_features + 1) matrix."""
        return np.column_stack([self.X, self.y])

    @classmethod
    def from_joint_matrix(cls, joint, like: "Dataset") -> "Dataset":
        joint = np.asarray(joint, dtype=np.float64)
        return like.replace(X=joint[:, :-1], y=joint[:, -1])

    def to_csv(self, path) -> None:
        """Write as CSV with the original header order."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for i in range(self.n_rows):
                row = [repr(float(v)) for v in self.X[i]]
                row.insert(self.target_index, repr(float(self.y[i])))
                writer.writerow(row)


def load_csv(path, target_column: str) -> Dataset:
    """Load an RFC-4180-style CSV with a header row into a Dataset.

    The ``target_column`` is extracted as the target; all remaining columns
    become features in header order and must be numeric and finite.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty, expected a header row")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise ValueError(
                f"{path}: target column {target_column!r} not in header {header}"
            )
        target_index = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != target_index]
        rows = []
        targets = []
        for row_number, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: data row {row_number} has {len(row)} values, "
                    f"expected {len(header)}"
                )
            parsed = []
            for col_name, cell in zip(header, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric value {cell.strip()!r} at data row "
                        f"{row_number}, column {col_name!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ValueError(
                        f"{path}: non-finite value {cell.strip()!r} at data row "
                        f"{row_number}, column {col_name!r}"
                    )
                parsed.append(value)
            targets.append(parsed.pop(target_index))
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows after the header")
    return Dataset(
        X=np.array(rows, dtype=np.float64),
        y=np.array(targets, dtype=np.float64),
        feature_names=tuple(feature_names),
        target_name=target_column,
        target_index=target_index,
    )


def split(data: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    """First ``n_train`` rows (file order, no shuffle) vs the remainder."""
    n_train = check_count(n_train, "n_train", minimum=1)
    if n_train >= data.n_rows:
        raise ValueError(
            f"n_train must be < n_rows ({data.n_rows}), got {n_train}"
        )
    idx = np.arange(data.n_rows)
    return data.take(idx[:n_train]), data.take(idx[n_train:])


class Normalizer(BaseEstimator):
    """Per-column z-score scaler over features and target jointly.

    Fitted on training data only; the same statistics are then applied to the
    test set. Uses the population (divide-by-n) standard deviation. Columns
    with zero spread are flagged constant and keep a scale of 1 so the
    transform stays invertible.

    Attributes
    ----------
    columns_ : tuple of str
        Column names, features first, target last.
    means_, stds_ : ndarray of shape (n_features + 1,)
        Per-column mean and population standard deviation.
    scales_ : ndarray of shape (n_features + 1,)
        Effective divisor: ``stds_`` with constant columns replaced by 1.
    is_constant_ : ndarray of bool
    """

    def fit(self, data: Dataset) -> "Normalizer":
        joint = data.joint_matrix()
        self.columns_ = tuple(data.feature_names) + (data.target_name,)
        self.means_ = joint.mean(axis=0)
        self.stds_ = joint.std(axis=0)
        self.is_constant_ = self.stds_ == 0.0
        self.scales_ = np.where(self.is_constant_, 1.0, self.stds_)
        return self

    def _check_fitted_shape(self, data: Dataset) -> None:
        if not hasattr(self, "means_"):
            raise RuntimeError("Normalizer is not fitted")
        if data.n_features + 1 != self.means_.shape[0]:
            raise ValueError(
                f"column mismatch: normalizer fitted on {self.means_.shape[0]} "
                f"columns, data has {data.n_features + 1}"
            )

    def transform(self, data: Dataset) -> Dataset:
        self._check_fitted_shape(data)
        joint = (data.joint_matrix() - self.means_) / self.scales_
        return Dataset.from_joint_matrix(joint, like=data)

    def inverse_transform(self, data: Dataset) -> Dataset:
        self._check_fitted_shape(data)
        joint = data.joint_matrix() * self.scales_ + self.means_
        return Dataset.from_joint_matrix(joint, like=data)

    def to_csv(self, path) -> None:
        """Audit dump: one (column, mean, std) row per column."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["column", "mean", "std"])
            for name, mean, std in zip(self.columns_, self.means_, self.stds_):
                writer.writerow([name, repr(float(mean)), repr(float(std))])

    @classmethod
    def from_csv(cls, path) -> "Normalizer":
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["column", "mean", "std"]:
                raise ValueError(f"{path}: not a normalizer file")
            names, means, stds = [], [], []
            for row in reader:
                names.append(row[0])
                means.append(float(row[1]))
                stds.append(float(row[2]))
        norm = cls()
        norm.columns_ = tuple(names)
        norm.means_ = np.array(means)
        norm.stds_ = np.array(stds)
        norm.is_constant_ = norm.stds_ == 0.0
        norm.scales_ = np.where(norm.is_constant_, 1.0, norm.stds_)
        return norm
