"""Symbolic regression by genetic programming with strict offspring selection.

Each offspring slot draws one parent fitness-proportionally and one uniformly
at random (gender-specific selection), applies subtree crossover, mutates
with the configured probability, then refines the child's constants. The
child enters the next generation only if its fitness beats a blend of its
parents' fitnesses; with the default comparison factor of 1 it must strictly
beat the better parent. Rejected attempts accumulate selection pressure, and
the run ends once a generation's pressure exceeds the configured maximum.

Fitness is the squared Pearson correlation between (linearly scaled)
predictions and training targets, computed as 1 - scaled_mse / var(y), which
is the same quantity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from . import _kernels as K
from ._validation import check_count, check_X_y
from .expressions import (
    MUTATION_OPERATORS,
    ExpressionTree,
    Grammar,
    ScaledModel,
    _refine_constants_transposed,
    evaluate,
    mutate,
    random_tree,
    subtree_crossover,
)
from .metrics import pearson_r2

__all__ = ["GpConfig", "GpRunStats", "SymbolicRegressor", "fitness", "run_gp"]


@dataclass(frozen=True)
class GpConfig:
    """Full hyperparameter record for one GP run."""

    population_size: int = 300
    mutation_rate: float = 0.20
    max_selection_pressure: float = 100.0
    comparison_factor: float = 1.0
    max_tree_size: int = 50
    max_tree_depth: int = 30
    elites: int = 1
    constant_opt_iterations: int = 10
    const_range: tuple[float, float] = (-20.0, 20.0)
    init_depth_range: tuple[int, int] = (2, 8)
    init_method: str = "grow"
    max_generations: int | None = None
    time_limit: float | None = None
    seed: int = 0

    def __post_init__(self):
        check_count(self.population_size, "population_size", minimum=2)
        check_count(self.max_tree_size, "max_tree_size")
        check_count(self.max_tree_depth, "max_tree_depth")
        check_count(self.elites, "elites")
        if self.elites >= self.population_size:
            raise ValueError("elites must be smaller than population_size")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 0.0 <= self.comparison_factor <= 1.0:
            raise ValueError("comparison_factor must be in [0, 1]")
        if self.max_selection_pressure < 1.0:
            raise ValueError("max_selection_pressure must be >= 1")
        if self.constant_opt_iterations < 0:
            raise ValueError("constant_opt_iterations must be >= 0")
        lo, hi = self.init_depth_range
        if not 1 <= lo <= hi:
            raise ValueError("init_depth_range must be an increasing pair >= 1")
        if self.init_method not in ("grow", "full"):
            raise ValueError("init_method must be 'grow' or 'full'")


@dataclass
class GpRunStats:
    """Diagnostics of one run."""

    generations: int = 0
    selection_pressures: list[float] = field(default_factory=list)
    best_fitness_per_generation: list[float] = field(default_factory=list)
    evaluations: int = 0
    wall_clock_seconds: float = 0.0
    stop_reason: str = ""


class _Individual(NamedTuple):
    tree: ExpressionTree
    fitness: float
    offset: float
    slope: float


def fitness(tree: ExpressionTree, train) -> float:
    """Training fitness: Pearson R^2 of the tree's predictions, in [0, 1].

    Linear scaling cannot change this value (Pearson R^2 is affine
    invariant), so it is computed directly on the raw predictions; constant
    predictions score 0.
    """
    if hasattr(train, "X") and hasattr(train, "y"):
        X, y = train.X, train.y
    else:
        X, y = train
    return pearson_r2(evaluate(tree, X), y)


def offspring_threshold(parent1_fitness: float, parent2_fitness: float,
                        comparison_factor: float) -> float:
    """Fitness a child must strictly exceed to be accepted.

    The threshold blends the parents' fitnesses: worse + factor * (better -
    worse). A factor of 1 is strict offspring selection (beat the better
    parent), 0 only requires beating the worse parent.
    """
    better = max(parent1_fitness, parent2_fitness)
    worse = min(parent1_fitness, parent2_fitness)
    return worse + comparison_factor * (better - worse)


def _fitness_from_scaled_mse(mse: float, var_y: float) -> float:
    if var_y <= 0.0:
        return 0.0
    r2 = 1.0 - mse / var_y
    if not np.isfinite(r2):
        return 0.0
    return min(max(r2, 0.0), 1.0)


def _evaluate_individual(tree, Xt, y, var_y, opt_iterations) -> _Individual:
    tree, pred = _refine_constants_transposed(tree, Xt, y, opt_iterations)
    a, b, mse = K.scale_and_mse(pred, y)
    return _Individual(tree, _fitness_from_scaled_mse(mse, var_y), a, b)


def run_gp(X, y, config: GpConfig) -> tuple[ScaledModel, GpRunStats]:
    """Evolve a scaled symbolic model on the given training data.

    Returns the best-on-training individual (as a ScaledModel) and run
    statistics. Deterministic for a fixed config (seed included).
    """
    X, y = check_X_y(X, y)
    if X.shape[0] < 2:
        raise ValueError("GP training requires at least 2 rows")
    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    Xt = np.ascontiguousarray(X.T)
    grammar = Grammar(n_features=X.shape[1], const_range=config.const_range)
    var_y = float(np.var(y))
    stats = GpRunStats()
    pop_size = config.population_size

    def out_of_time() -> bool:
        return (
            config.time_limit is not None
            and time.perf_counter() - started > config.time_limit
        )

    population = []
    d_lo, d_hi = config.init_depth_range
    for _ in range(pop_size):
        depth = int(rng.integers(d_lo, d_hi + 1))
        tree = random_tree(
            grammar,
            max_size=config.max_tree_size,
            max_depth=min(depth, config.max_tree_depth),
            random_state=rng,
            method=config.init_method,
        )
        pred = K.eval_tree(tree.codes, tree.values, Xt)
        a, b, mse = K.scale_and_mse(pred, y)
        population.append(
            _Individual(tree, _fitness_from_scaled_mse(mse, var_y), a, b)
        )
    stats.evaluations = pop_size
    best = max(population, key=lambda ind: ind.fitness)

    # The per-generation attempt cap makes pressure-driven termination
    # inevitable even when no improving child exists.
    max_attempts = int(math.ceil(config.max_selection_pressure * pop_size))
    stop = ""
    while not stop:
        fitnesses = np.array([ind.fitness for ind in population])
        total = float(fitnesses.sum())
        probs = fitnesses / total if total > 0.0 else None
        elite_idx = np.argsort(-fitnesses, kind="stable")[: config.elites]
        new_population = [population[i] for i in elite_idx]

        attempts = 0
        timed_out = False
        while len(new_population) < pop_size and attempts < max_attempts:
            if out_of_time():
                timed_out = True
                break
            attempts += 1
            i1 = int(rng.choice(pop_size, p=probs))
            p1 = population[i1]
            p2 = population[int(rng.integers(pop_size))]
            child_tree = subtree_crossover(
                p1.tree,
                p2.tree,
                max_size=config.max_tree_size,
                max_depth=config.max_tree_depth,
                random_state=rng,
            )
            if rng.random() < config.mutation_rate:
                operator = MUTATION_OPERATORS[int(rng.integers(len(MUTATION_OPERATORS)))]
                child_tree = mutate(
                    child_tree,
                    operator,
                    grammar,
                    max_size=config.max_tree_size,
                    max_depth=config.max_tree_depth,
                    random_state=rng,
                )
            child = _evaluate_individual(
                child_tree, Xt, y, var_y, config.constant_opt_iterations
            )
            threshold = offspring_threshold(
                p1.fitness, p2.fitness, config.comparison_factor
            )
            if child.fitness > threshold:
                new_population.append(child)
                if child.fitness > best.fitness:
                    best = child

        stats.evaluations += attempts
        stats.generations += 1
        # The carried-over elites count as produced offspring so a fully
        # accepting generation has pressure exactly 1.
        pressure = (len(elite_idx) + attempts) / pop_size
        stats.selection_pressures.append(pressure)
        stats.best_fitness_per_generation.append(best.fitness)
        if len(new_population) == pop_size:
            population = new_population
        # Termination is decided at generation end.
        if pressure > config.max_selection_pressure:
            stop = "selection_pressure"
        elif timed_out or out_of_time():
            stop = "time_limit"
        elif (
            config.max_generations is not None
            and stats.generations >= config.max_generations
        ):
            stop = "max_generations"

    stats.stop_reason = stop
    stats.wall_clock_seconds = time.perf_counter() - started
    model = ScaledModel(tree=best.tree, offset=best.offset, slope=best.slope)
    return model, stats


class SymbolicRegressor(BaseEstimator, RegressorMixin):
    """Offspring-selection GP wrapped as a fit/predict estimator.

    Parameters mirror :class:`GpConfig`; ``random_state`` seeds the run.
    After ``fit`` the evolved model is available as ``model_`` and the run
    diagnostics as ``stats_``.
    """

    def __init__(
        self,
        population_size: int = 300,
        mutation_rate: float = 0.20,
        max_selection_pressure: float = 100.0,
        comparison_factor: float = 1.0,
        max_tree_size: int = 50,
        max_tree_depth: int = 30,
        elites: int = 1,
        constant_opt_iterations: int = 10,
        const_range: tuple[float, float] = (-20.0, 20.0),
        init_depth_range: tuple[int, int] = (2, 8),
        init_method: str = "grow",
        max_generations: int | None = None,
        time_limit: float | None = None,
        random_state: int | None = None,
    ):
        self.population_size = population_size
        self.mutation_rate = mutation_rate
        self.max_selection_pressure = max_selection_pressure
        self.comparison_factor = comparison_factor
        self.max_tree_size = max_tree_size
        self.max_tree_depth = max_tree_depth
        self.elites = elites
        self.constant_opt_iterations = constant_opt_iterations
        self.const_range = const_range
        self.init_depth_range = init_depth_range
        self.init_method = init_method
        self.max_generations = max_generations
        self.time_limit = time_limit
        self.random_state = random_state

    def _config(self) -> GpConfig:
        seed = self.random_state
        if seed is None:
            seed = int(np.random.default_rng().integers(2**63))
        return GpConfig(
            population_size=self.population_size,
            mutation_rate=self.mutation_rate,
            max_selection_pressure=self.max_selection_pressure,
            comparison_factor=self.comparison_factor,
            max_tree_size=self.max_tree_size,
            max_tree_depth=self.max_tree_depth,
            elites=self.elites,
            constant_opt_iterations=self.constant_opt_iterations,
            const_range=self.const_range,
            init_depth_range=self.init_depth_range,
            init_method=self.init_method,
            max_generations=self.max_generations,
            time_limit=self.time_limit,
            seed=int(seed),
        )

    def fit(self, X, y):
        self.model_, self.stats_ = run_gp(X, y, self._config())
        self.n_features_in_ = np.asarray(X).shape[1] if np.asarray(X).ndim == 2 else 1
        return self

    def predict(self, data):
        if not hasattr(self, "model_"):
            raise NotFittedError("SymbolicRegressor is not fitted")
        X = getattr(data, "X", data)
        return self.model_.predict(X)
