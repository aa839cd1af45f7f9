import math

import numpy as np
import pytest

from symred.dataset import Dataset, Normalizer, load_csv, split

from conftest import dataset_from_arrays, write_csv


@pytest.fixture
def simple_csv(tmp_path):
    return write_csv(
        tmp_path / "simple.csv",
        ["x1", "x2", "y"],
        [[1.0, 10.0, 100.0], [2.0, 20.0, 200.0], [3.0, 30.0, 300.0]],
    )


class TestLoadCsv:
    def test_three_row_file(self, simple_csv):
        data = load_csv(simple_csv, "y")
        assert data.n_rows == 3
        assert data.n_features == 2
        assert data.feature_names == ("x1", "x2")
        assert data.target_name == "y"
        np.testing.assert_array_equal(data.y, [100.0, 200.0, 300.0])
        np.testing.assert_array_equal(data.X[:, 1], [10.0, 20.0, 30.0])

    def test_target_in_middle_preserves_header_order(self, tmp_path):
        path = write_csv(
            tmp_path / "mid.csv", ["a", "y", "b"], [[1, 2, 3], [4, 5, 6]]
        )
        data = load_csv(path, "y")
        assert data.feature_names == ("a", "b")
        assert data.columns == ("a", "y", "b")
        np.testing.assert_array_equal(data.y, [2.0, 5.0])

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = write_csv(
            tmp_path / "bad.csv", ["x1", "y"], [[1, 2], [3, "abc"], [5, 6]]
        )
        with pytest.raises(ValueError, match=r"row 2.*'y'"):
            load_csv(path, "y")

    def test_non_finite_cell_rejected(self, tmp_path):
        path = write_csv(tmp_path / "inf.csv", ["x1", "y"], [[1, 2], ["inf", 4]])
        with pytest.raises(ValueError, match=r"non-finite.*row 2.*'x1'"):
            load_csv(path, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", "y")

    def test_missing_target_column(self, simple_csv):
        with pytest.raises(ValueError, match="'z' not in header"):
            load_csv(simple_csv, "z")

    def test_empty_body(self, tmp_path):
        path = write_csv(tmp_path / "empty.csv", ["x1", "y"], [])
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(path, "y")

    def test_ragged_row(self, tmp_path):
        path = write_csv(tmp_path / "ragged.csv", ["x1", "y"], [[1, 2], [3]])
        with pytest.raises(ValueError, match="row 2 has 1 values"):
            load_csv(path, "y")

    def test_eight_feature_file(self, tmp_path, rng):
        # 8 inputs + target, the shape of a typical benchmark CSV
        header = [f"in{i}" for i in range(8)] + ["target"]
        rows = rng.normal(size=(20, 9)).tolist()
        path = write_csv(tmp_path / "bench.csv", header, rows)
        data = load_csv(path, "target")
        assert data.n_features == 8
        assert data.n_rows == 20

    def test_to_csv_round_trip(self, tmp_path):
        path = write_csv(
            tmp_path / "mid.csv",
            ["a", "y", "b"],
            [[1.5, 2.25, -3.125], [4.0, 5.5, 6.75]],
        )
        data = load_csv(path, "y")
        out = tmp_path / "out.csv"
        data.to_csv(out)
        again = load_csv(out, "y")
        assert again.columns == data.columns
        np.testing.assert_array_equal(again.X, data.X)
        np.testing.assert_array_equal(again.y, data.y)


class TestSplit:
    def test_counts(self):
        data = dataset_from_arrays(np.arange(20.0).reshape(10, 2), np.arange(10.0))
        train, test = split(data, 7)
        assert train.n_rows == 7
        assert test.n_rows == 3

    def test_order_preserved_and_concatenation_reproduces(self, rng):
        X = rng.normal(size=(12, 3))
        y = rng.normal(size=12)
        data = dataset_from_arrays(X, y)
        train, test = split(data, 5)
        np.testing.assert_array_equal(np.vstack([train.X, test.X]), X)
        np.testing.assert_array_equal(np.concatenate([train.y, test.y]), y)

    @pytest.mark.parametrize("n_train", [0, 10, 11])
    def test_out_of_range(self, n_train):
        data = dataset_from_arrays(np.zeros((10, 1)), np.arange(10.0))
        with pytest.raises(ValueError):
            split(data, n_train)


class TestNormalizer:
    def test_single_column_stats(self):
        # mean 4, population std sqrt(8/3)
        data = dataset_from_arrays(np.array([[2.0], [4.0], [6.0]]), [0.0, 0.0, 1.0])
        norm = Normalizer().fit(data)
        assert norm.means_[0] == pytest.approx(4.0)
        assert norm.stds_[0] == pytest.approx(math.sqrt(8.0 / 3.0), abs=1e-12)

    def test_constant_column_flagged_with_unit_scale(self):
        data = dataset_from_arrays(np.array([[5.0], [5.0], [5.0]]), [1.0, 2.0, 3.0])
        norm = Normalizer().fit(data)
        assert norm.means_[0] == 5.0
        assert norm.is_constant_[0]
        assert norm.scales_[0] == 1.0
        out = norm.transform(data)
        np.testing.assert_array_equal(out.X[:, 0], [0.0, 0.0, 0.0])

    def test_training_set_maps_to_zero_mean_unit_std(self, rng):
        data = dataset_from_arrays(rng.normal(3, 7, (50, 4)), rng.normal(size=50))
        norm = Normalizer().fit(data)
        out = norm.transform(data)
        joint = out.joint_matrix()
        np.testing.assert_allclose(joint.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(joint.std(axis=0), 1.0, atol=1e-9)

    def test_already_normalized_is_idempotent_in_stats(self, rng):
        data = dataset_from_arrays(rng.normal(size=(200, 2)), rng.normal(size=200))
        once = Normalizer().fit(data).transform(data)
        norm2 = Normalizer().fit(once)
        np.testing.assert_allclose(norm2.means_, 0.0, atol=1e-9)
        np.testing.assert_allclose(norm2.stds_, 1.0, atol=1e-9)

    def test_test_value_uses_training_stats(self):
        train = dataset_from_arrays(np.array([[2.0], [4.0], [6.0]]), [0.0, 1.0, 2.0])
        test = dataset_from_arrays(np.array([[6.0]]), [0.0])
        norm = Normalizer().fit(train)
        out = norm.transform(test)
        assert out.X[0, 0] == pytest.approx(2.0 / math.sqrt(8.0 / 3.0), abs=1e-12)

    def test_value_equal_to_mean_maps_to_zero(self):
        train = dataset_from_arrays(np.array([[2.0], [4.0], [6.0]]), [0.0, 1.0, 2.0])
        norm = Normalizer().fit(train)
        out = norm.transform(
            dataset_from_arrays(np.array([[4.0]]), [norm.means_[-1]])
        )
        assert out.X[0, 0] == 0.0
        assert out.y[0] == 0.0

    def test_test_set_mean_generally_nonzero(self, rng):
        data = dataset_from_arrays(rng.normal(size=(100, 2)), rng.normal(size=100))
        train, test = split(data, 60)
        norm = Normalizer().fit(train)
        out = norm.transform(test)
        # statistics never recomputed on test data
        assert abs(out.joint_matrix().mean()) > 1e-6

    def test_round_trip_inverse(self, rng):
        data = dataset_from_arrays(
            rng.normal(5, 3, (30, 3)), rng.normal(-2, 10, 30)
        )
        norm = Normalizer().fit(data)
        back = norm.inverse_transform(norm.transform(data))
        np.testing.assert_allclose(back.X, data.X, rtol=1e-9)
        np.testing.assert_allclose(back.y, data.y, rtol=1e-9)

    def test_shape_mismatch(self, rng):
        norm = Normalizer().fit(
            dataset_from_arrays(rng.normal(size=(5, 3)), rng.normal(size=5))
        )
        with pytest.raises(ValueError, match="column mismatch"):
            norm.transform(
                dataset_from_arrays(rng.normal(size=(5, 2)), rng.normal(size=5))
            )

    def test_csv_round_trip(self, tmp_path, rng):
        data = dataset_from_arrays(rng.normal(size=(20, 2)), rng.normal(size=20))
        norm = Normalizer().fit(data)
        path = tmp_path / "norm.csv"
        norm.to_csv(path)
        loaded = Normalizer.from_csv(path)
        assert loaded.columns_ == norm.columns_
        np.testing.assert_array_equal(loaded.means_, norm.means_)
        np.testing.assert_array_equal(loaded.stds_, norm.stds_)


class TestDatasetInvariants:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            dataset_from_arrays(np.array([[np.nan]]), [1.0])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            dataset_from_arrays(np.zeros((0, 2)), [])

    def test_rejects_row_mismatch(self):
        with pytest.raises(ValueError, match="row mismatch"):
            Dataset(
                X=np.zeros((3, 1)),
                y=np.zeros(2),
                feature_names=("a",),
                target_name="y",
            )

    def test_arrays_are_read_only(self):
        data = dataset_from_arrays(np.ones((2, 2)), [1.0, 2.0])
        with pytest.raises(ValueError):
            data.X[0, 0] = 9.0

    def test_take_preserves_values_bitwise(self, rng):
        data = dataset_from_arrays(rng.normal(size=(10, 2)), rng.normal(size=10))
        sub = data.take([3, 1, 7])
        np.testing.assert_array_equal(sub.X, data.X[[3, 1, 7]])
        np.testing.assert_array_equal(sub.y, data.y[[3, 1, 7]])
