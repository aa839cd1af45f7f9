import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from symred.expressions import ExpressionTree, evaluate
from symred.gp import (
    GpConfig,
    SymbolicRegressor,
    fitness,
    offspring_threshold,
    run_gp,
)
from symred.metrics import pearson_r2

from conftest import linear_data


def small_config(**overrides):
    base = dict(
        population_size=30,
        max_selection_pressure=8.0,
        constant_opt_iterations=3,
        seed=11,
    )
    base.update(overrides)
    return GpConfig(**base)


class TestFitness:
    def test_exact_tree_scores_one(self, rng):
        X = rng.uniform(-2, 2, (40, 2))
        y = X[:, 0] + X[:, 1]
        assert fitness(ExpressionTree.from_prefix("(+ x0 x1)"), (X, y)) == 1.0

    def test_constant_tree_scores_zero(self, rng):
        X = rng.normal(size=(20, 1))
        y = rng.normal(size=20)
        assert fitness(ExpressionTree.from_prefix("3.5"), (X, y)) == 0.0

    def test_affine_error_absorbed(self, rng):
        X = rng.uniform(-2, 2, (30, 1))
        y = rng.normal(size=30)
        # a tree predicting 2*y + 6 has perfect correlation with y
        tree = ExpressionTree.from_prefix("(+ (* 2.0 x0) 6.0)")
        assert fitness(tree, (X, 2 * X[:, 0] + 6)) == pytest.approx(1.0)
        assert fitness(tree, (X, X[:, 0])) == pytest.approx(1.0)


class TestRunGp:
    def test_linear_target_reaches_high_r2(self):
        X, y = linear_data(n=100, seed=0)
        y = 3 * X[:, 0] + 2
        model, stats = run_gp(X, y, small_config())
        assert pearson_r2(model.predict(X), y) >= 0.999
        assert stats.stop_reason == "selection_pressure"

    def test_pressure_one_terminates_fast(self):
        X, y = linear_data(n=50, seed=1, noise=1.0)
        model, stats = run_gp(
            X, y, GpConfig(population_size=20, max_selection_pressure=1.0, seed=2)
        )
        assert stats.generations <= 3
        assert stats.stop_reason == "selection_pressure"

    def test_determinism(self):
        X, y = linear_data(n=60, seed=2, noise=0.3)
        cfg = small_config(seed=33)
        m1, s1 = run_gp(X, y, cfg)
        m2, s2 = run_gp(X, y, cfg)
        assert m1.tree == m2.tree
        assert (m1.offset, m1.slope) == (m2.offset, m2.slope)
        assert s1.generations == s2.generations
        assert s1.evaluations == s2.evaluations
        assert s1.selection_pressures == s2.selection_pressures

    def test_different_seeds_differ(self):
        X, y = linear_data(n=60, seed=2, noise=0.3)
        m1, _ = run_gp(X, y, small_config(seed=1))
        m2, _ = run_gp(X, y, small_config(seed=2))
        assert m1.tree != m2.tree or m1.offset != m2.offset

    def test_pressure_series_at_least_one_and_run_terminates(self):
        X, y = linear_data(n=50, seed=4, noise=0.5)
        _, stats = run_gp(X, y, small_config(seed=5))
        assert all(p >= 1.0 for p in stats.selection_pressures)
        assert stats.stop_reason

    def test_final_pressure_exceeds_max_on_pressure_stop(self):
        X, y = linear_data(n=50, seed=4)
        cfg = small_config(seed=6)
        _, stats = run_gp(X, y, cfg)
        assert stats.stop_reason == "selection_pressure"
        assert stats.selection_pressures[-1] > cfg.max_selection_pressure

    def test_best_fitness_non_decreasing(self):
        X, y = linear_data(n=80, seed=5, noise=1.0)
        _, stats = run_gp(X, y, small_config(seed=7))
        series = stats.best_fitness_per_generation
        assert all(b >= a for a, b in zip(series, series[1:]))

    def test_evaluation_count_identity(self):
        X, y = linear_data(n=50, seed=6, noise=0.5)
        cfg = small_config(seed=8)
        _, stats = run_gp(X, y, cfg)
        attempts = sum(
            round(p * cfg.population_size) - cfg.elites
            for p in stats.selection_pressures
        )
        assert stats.evaluations == cfg.population_size + attempts

    def test_best_model_respects_limits(self):
        X, y = linear_data(n=60, seed=7, noise=0.2)
        cfg = small_config(seed=9, max_tree_size=20, max_tree_depth=6)
        model, _ = run_gp(X, y, cfg)
        assert model.tree.size <= 20
        assert model.tree.depth <= 6

    def test_max_generations_stop(self):
        X, y = linear_data(n=50, seed=8, noise=2.0)
        _, stats = run_gp(X, y, small_config(seed=10, max_generations=2))
        assert stats.generations <= 2

    def test_time_limit_stop(self):
        X, y = linear_data(n=200, seed=9, noise=0.5)
        cfg = GpConfig(
            population_size=100,
            max_selection_pressure=1000.0,
            time_limit=0.3,
            seed=11,
        )
        _, stats = run_gp(X, y, cfg)
        assert stats.stop_reason == "time_limit"
        assert stats.wall_clock_seconds < 5.0

    def test_prediction_formula_matches_scaled_tree(self):
        X, y = linear_data(n=40, seed=10)
        model, _ = run_gp(X, y, small_config(seed=12))
        np.testing.assert_allclose(
            model.predict(X),
            model.offset + model.slope * evaluate(model.tree, X),
            rtol=1e-12,
        )

    def test_requires_two_rows(self):
        with pytest.raises(ValueError):
            run_gp(np.zeros((1, 1)), np.zeros(1), small_config())

    def test_constant_target_survives(self):
        X = np.random.default_rng(0).normal(size=(30, 2))
        y = np.full(30, 4.2)
        model, stats = run_gp(X, y, small_config(seed=13))
        assert stats.stop_reason == "selection_pressure"
        np.testing.assert_allclose(model.predict(X), 4.2, atol=1e-9)


class TestOffspringSelectionSemantics:
    def test_strict_threshold_is_better_parent(self):
        assert offspring_threshold(0.3, 0.8, 1.0) == 0.8
        assert offspring_threshold(0.8, 0.3, 1.0) == 0.8

    def test_zero_factor_threshold_is_worse_parent(self):
        assert offspring_threshold(0.3, 0.8, 0.0) == 0.3

    def test_blend_interpolates(self):
        assert offspring_threshold(0.2, 0.6, 0.5) == pytest.approx(0.4)

    def test_equal_parents(self):
        assert offspring_threshold(0.5, 0.5, 1.0) == 0.5

    def test_comparison_factor_validated(self):
        with pytest.raises(ValueError):
            GpConfig(comparison_factor=1.5)

    def test_elites_validated(self):
        with pytest.raises(ValueError):
            GpConfig(population_size=10, elites=10)

    def test_pressure_validated(self):
        with pytest.raises(ValueError):
            GpConfig(max_selection_pressure=0.5)


class TestSymbolicRegressorEstimator:
    def test_fit_predict_roundtrip(self):
        X, y = linear_data(n=60, seed=0)
        est = SymbolicRegressor(
            population_size=50,
            max_selection_pressure=30.0,
            constant_opt_iterations=3,
            random_state=0,
        )
        est.fit(X, y)
        assert pearson_r2(est.predict(X), y) >= 0.99
        assert est.stats_.evaluations > 0
        assert est.model_.tree.size <= 50

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            SymbolicRegressor().predict(np.zeros((2, 2)))

    def test_clone_and_get_params(self):
        est = SymbolicRegressor(population_size=44, random_state=5)
        params = est.get_params()
        assert params["population_size"] == 44
        assert clone(est).get_params() == params

    def test_estimator_determinism(self):
        X, y = linear_data(n=50, seed=3, noise=0.2)
        kwargs = dict(
            population_size=25,
            max_selection_pressure=6.0,
            constant_opt_iterations=2,
            random_state=42,
        )
        a = SymbolicRegressor(**kwargs).fit(X, y)
        b = SymbolicRegressor(**kwargs).fit(X, y)
        np.testing.assert_array_equal(a.predict(X), b.predict(X))
