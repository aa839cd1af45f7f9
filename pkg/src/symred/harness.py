"""Experiment harness: reduce, train, score and time across reduction rates.

For every (method, rate, repeat) cell a child seed is derived from the base
seed, the normalized training data is reduced to ``ceil(rate * n_train)``
instances, every configured learner is trained on the reduced set and scored
on the reduced training set and the untouched test set, and wall-clock times
for the reduction and the training are recorded separately. Rate 1.0 runs
are method-independent ("original") and executed once per repeat so the
unreduced baseline carries a spread as well. Failures are recorded as failed
rows instead of aborting the sweep, and the full result list is deterministic
for a fixed config (timing columns aside).

Seed derivation (documented so result sets are reproducible): a splitmix64
mix is chained over ``(base_seed, method_id, rate_in_basis_points, repeat)``
to give the cell seed (used for the reduction), and each learner's seed is
the chain continued with the learner id.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count
from .baselines import ForestConfig, LinearRegression, RandomForestRegressor
from .dataset import Dataset, Normalizer, load_csv, split
from .gp import GpConfig, SymbolicRegressor
from .metrics import pearson_r2, summarize
from .reduction import REDUCTION_METHODS, ReductionSpec, reduce_dataset

__all__ = [
    "LEARNERS",
    "RESULT_COLUMNS",
    "ExperimentConfig",
    "RunResult",
    "run_experiment",
    "report",
    "write_results",
    "read_results",
    "write_table",
    "parse_config_file",
    "child_seed",
    "learner_seed",
]

LEARNERS = ("gp", "rf", "lr")

_METHOD_IDS = {"original": 0, "sampling": 1, "binning": 2, "kmeans": 3}
_LEARNER_IDS = {"gp": 1, "rf": 2, "lr": 3}

RESULT_COLUMNS = (
    "dataset",
    "method",
    "rate",
    "repeat",
    "learner",
    "seed",
    "train_r2",
    "test_r2",
    "reduce_seconds",
    "train_seconds",
    "reduced_rows",
    "status",
)

_M64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Chain a splitmix64 step over the given integer parts."""
    state = 0
    for part in parts:
        state = _splitmix64(state ^ (int(part) & _M64))
    return state


def child_seed(base_seed: int, method: str, rate: float, repeat: int) -> int:
    """Cell seed for one (method, rate, repeat) combination."""
    return mix_seed(base_seed, _METHOD_IDS[method], round(rate * 10000), repeat)


def learner_seed(cell_seed: int, learner: str) -> int:
    return mix_seed(cell_seed, _LEARNER_IDS[learner])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one sweep needs; nested configs hold learner parameters.

    The ``seed`` fields inside ``gp`` and ``rf`` are ignored here: per-run
    seeds are always derived from the base ``seed``.
    """

    dataset_path: str
    target_column: str
    train_rows: int
    dataset_name: str = ""
    rates: tuple[float, ...] = (0.01, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 1.0)
    repeats: int = 10
    methods: tuple[str, ...] = ("sampling", "binning", "kmeans")
    learners: tuple[str, ...] = ("gp", "rf", "lr")
    seed: int = 0
    kmeans_batch_size: int = 100
    kmeans_iterations: int | None = None
    gp: GpConfig = field(default_factory=GpConfig)
    rf: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        check_count(self.train_rows, "train_rows")
        check_count(self.repeats, "repeats")
        if not self.rates:
            raise ValueError("at least one reduction rate is required")
        for rate in self.rates:
            if not 0.0 < rate <= 1.0:
                raise ValueError(f"rates must be in (0, 1], got {rate}")
        for method in self.methods:
            if method not in REDUCTION_METHODS:
                raise ValueError(f"unknown reduction method {method!r}")
        for learner in self.learners:
            if learner not in LEARNERS:
                raise ValueError(f"unknown learner {learner!r}")
        if not self.learners:
            raise ValueError("at least one learner is required")
        if not self.dataset_name:
            stem = os.path.splitext(os.path.basename(self.dataset_path))[0]
            object.__setattr__(self, "dataset_name", stem)
        object.__setattr__(self, "rates", tuple(self.rates))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "learners", tuple(self.learners))


@dataclass(frozen=True)
class RunResult:
    """One training run: scores, timings and provenance."""

    dataset: str
    method: str
    rate: float
    repeat: int
    learner: str
    seed: int
    train_r2: float
    test_r2: float
    reduce_seconds: float
    train_seconds: float
    reduced_rows: int
    status: str = "ok"


def default_learner_factories(config: ExperimentConfig) -> dict:
    """name -> callable(seed) -> unfitted estimator, per the config."""
    gp = config.gp
    rf = config.rf

    def make_gp(seed: int) -> SymbolicRegressor:
        return SymbolicRegressor(
            population_size=gp.population_size,
            mutation_rate=gp.mutation_rate,
            max_selection_pressure=gp.max_selection_pressure,
            comparison_factor=gp.comparison_factor,
            max_tree_size=gp.max_tree_size,
            max_tree_depth=gp.max_tree_depth,
            elites=gp.elites,
            constant_opt_iterations=gp.constant_opt_iterations,
            const_range=gp.const_range,
            init_depth_range=gp.init_depth_range,
            init_method=gp.init_method,
            max_generations=gp.max_generations,
            time_limit=gp.time_limit,
            random_state=seed,
        )

    def make_rf(seed: int) -> RandomForestRegressor:
        return RandomForestRegressor(
            n_trees=rf.n_trees,
            instance_fraction=rf.instance_fraction,
            feature_fraction=rf.feature_fraction,
            min_leaf_size=rf.min_leaf_size,
            random_state=seed,
        )

    return {
        "gp": make_gp,
        "rf": make_rf,
        "lr": lambda seed: LinearRegression(),
    }


def _cells(config: ExperimentConfig) -> list[tuple[str, float, int]]:
    cells = []
    if any(rate == 1.0 for rate in config.rates):
        cells.extend(("original", 1.0, rep) for rep in range(config.repeats))
    for method in config.methods:
        for rate in config.rates:
            if rate == 1.0:
                continue
            cells.extend((method, rate, rep) for rep in range(config.repeats))
    return cells


def _run_cell(
    train: Dataset,
    test: Dataset,
    config: ExperimentConfig,
    factories: dict,
    cell: tuple[str, float, int],
) -> list[RunResult]:
    method, rate, repeat = cell
    cseed = child_seed(config.seed, method, rate, repeat)
    base = dict(
        dataset=config.dataset_name,
        method=method,
        rate=rate,
        repeat=repeat,
        seed=cseed,
    )
    reduce_seconds = 0.0
    if method == "original":
        reduced = train
    else:
        m = math.ceil(rate * train.n_rows)
        spec = ReductionSpec(
            method=method,
            target_count=m,
            kmeans_batch_size=config.kmeans_batch_size,
            kmeans_iterations=config.kmeans_iterations,
            seed=cseed,
        )
        started = time.perf_counter()
        try:
            reduced = reduce_dataset(train, spec)
        except Exception as exc:
            reduce_seconds = time.perf_counter() - started
            return [
                RunResult(
                    **base,
                    learner=learner,
                    train_r2=float("nan"),
                    test_r2=float("nan"),
                    reduce_seconds=reduce_seconds,
                    train_seconds=0.0,
                    reduced_rows=0,
                    status=f"error: reduction failed: {exc}",
                )
                for learner in config.learners
            ]
        reduce_seconds = time.perf_counter() - started

    results = []
    for learner in config.learners:
        estimator = factories[learner](learner_seed(cseed, learner))
        started = time.perf_counter()
        try:
            estimator.fit(reduced.X, reduced.y)
            train_seconds = time.perf_counter() - started
            train_r2 = pearson_r2(estimator.predict(reduced.X), reduced.y)
            test_r2 = pearson_r2(estimator.predict(test.X), test.y)
            results.append(
                RunResult(
                    **base,
                    learner=learner,
                    train_r2=train_r2,
                    test_r2=test_r2,
                    reduce_seconds=reduce_seconds,
                    train_seconds=train_seconds,
                    reduced_rows=reduced.n_rows,
                    status="ok",
                )
            )
        except Exception as exc:
            results.append(
                RunResult(
                    **base,
                    learner=learner,
                    train_r2=float("nan"),
                    test_r2=float("nan"),
                    reduce_seconds=reduce_seconds,
                    train_seconds=time.perf_counter() - started,
                    reduced_rows=reduced.n_rows,
                    status=f"error: {exc}",
                )
            )
    return results


def _run_cell_job(args):
    train, test, config, cell = args
    return _run_cell(train, test, config, default_learner_factories(config), cell)


def run_experiment(
    config: ExperimentConfig, learner_factories: dict | None = None, jobs: int = 1
) -> list[RunResult]:
    """Run the full sweep and return one RunResult per (cell, learner).

    ``learner_factories`` may inject custom estimator factories (single-job
    mode only); ``jobs > 1`` distributes cells over processes. Results are
    sorted by (method, rate, repeat, learner) so reruns of the same config
    produce identical rows apart from the timing columns.
    """
    data = load_csv(config.dataset_path, config.target_column)
    train_raw, test_raw = split(data, config.train_rows)
    normalizer = Normalizer().fit(train_raw)
    train = normalizer.transform(train_raw)
    test = normalizer.transform(test_raw)

    cells = _cells(config)
    if jobs > 1:
        if learner_factories is not None:
            raise ValueError("custom learner_factories require jobs=1")
        payloads = [(train, test, config, cell) for cell in cells]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            nested = list(pool.map(_run_cell_job, payloads))
    else:
        factories = learner_factories or default_learner_factories(config)
        nested = [_run_cell(train, test, config, factories, cell) for cell in cells]

    results = [r for cell_results in nested for r in cell_results]
    results.sort(key=lambda r: (r.method, r.rate, r.repeat, r.learner))
    return results


def write_results(results: list[RunResult], path, append: bool = False) -> None:
    exists = os.path.exists(path)
    mode = "a" if append else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not (append and exists):
            writer.writerow(RESULT_COLUMNS)
        for r in results:
            writer.writerow(
                [
                    r.dataset,
                    r.method,
                    repr(float(r.rate)),
                    r.repeat,
                    r.learner,
                    r.seed,
                    repr(float(r.train_r2)),
                    repr(float(r.test_r2)),
                    repr(float(r.reduce_seconds)),
                    repr(float(r.train_seconds)),
                    r.reduced_rows,
                    r.status,
                ]
            )


def read_results(path) -> list[RunResult]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected results header {header}")
        out = []
        for row in reader:
            rec = dict(zip(RESULT_COLUMNS, row))
            out.append(
                RunResult(
                    dataset=rec["dataset"],
                    method=rec["method"],
                    rate=float(rec["rate"]),
                    repeat=int(rec["repeat"]),
                    learner=rec["learner"],
                    seed=int(rec["seed"]),
                    train_r2=float(rec["train_r2"]),
                    test_r2=float(rec["test_r2"]),
                    reduce_seconds=float(rec["reduce_seconds"]),
                    train_seconds=float(rec["train_seconds"]),
                    reduced_rows=int(rec["reduced_rows"]),
                    status=rec["status"],
                )
            )
    return out


def report(results: list[RunResult]) -> tuple[list[dict], list[dict]]:
    """Aggregate results into the summary table and the runtime table.

    The summary groups by (dataset, learner, method, rate) and reports the
    median and IQR of test R^2 over successful runs plus the median training
    time; the runtime table additionally relates each group's median training
    time to the unreduced ("original") runs of the same learner, which is the
    plot-ready view of runtime versus reduction rate.
    """
    if not results:
        raise ValueError("no results to report")
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.dataset, r.learner, r.method, r.rate), []).append(r)

    summary_rows = []
    runtime_rows = []
    original_medians = {}
    for key, members in groups.items():
        ok = [r for r in members if r.status == "ok"]
        if ok and key[2] == "original":
            original_medians[(key[0], key[1])] = float(
                np.median([r.train_seconds for r in ok])
            )
    for key in sorted(groups):
        dataset, learner, method, rate = key
        members = groups[key]
        ok = [r for r in members if r.status == "ok"]
        n_failed = len(members) - len(ok)
        if ok:
            score = summarize([r.test_r2 for r in ok])
            train_med = float(np.median([r.train_r2 for r in ok]))
            time_med = float(np.median([r.train_seconds for r in ok]))
            reduce_med = float(np.median([r.reduce_seconds for r in ok]))
        else:
            score = None
            train_med = time_med = reduce_med = float("nan")
        summary_rows.append(
            {
                "dataset": dataset,
                "learner": learner,
                "method": method,
                "rate": rate,
                "n_runs": len(ok),
                "n_failed": n_failed,
                "test_r2_median": score.median if score else float("nan"),
                "test_r2_iqr": score.iqr if score else float("nan"),
                "train_r2_median": train_med,
                "train_seconds_median": time_med,
            }
        )
        base_time = original_medians.get((dataset, learner))
        runtime_rows.append(
            {
                "dataset": dataset,
                "learner": learner,
                "method": method,
                "rate": rate,
                "train_seconds_median": time_med,
                "reduce_seconds_median": reduce_med,
                "runtime_vs_original": (
                    time_med / base_time if base_time else float("nan")
                ),
            }
        )
    return summary_rows, runtime_rows


def write_table(rows: list[dict], path) -> None:
    """Write a list of uniform dicts as CSV (floats via repr)."""
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        columns = list(rows[0])
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    repr(float(v)) if isinstance(v, float) else v
                    for v in (row[c] for c in columns)
                ]
            )


_LIST_KEYS = {"rates", "methods", "learners"}
_CONFIG_COERCERS = {
    "dataset_path": str,
    "target_column": str,
    "dataset_name": str,
    "train_rows": int,
    "repeats": int,
    "seed": int,
    "kmeans_batch_size": int,
    "kmeans_iterations": int,
}
_GP_COERCERS = {
    "population_size": int,
    "mutation_rate": float,
    "max_selection_pressure": float,
    "comparison_factor": float,
    "max_tree_size": int,
    "max_tree_depth": int,
    "elites": int,
    "constant_opt_iterations": int,
    "init_method": str,
    "max_generations": int,
    "time_limit": float,
}
_RF_COERCERS = {
    "n_trees": int,
    "instance_fraction": float,
    "feature_fraction": float,
    "min_leaf_size": int,
}


def parse_config_file(path) -> ExperimentConfig:
    """Parse the flat ``key = value`` experiment-config format.

    Grammar: one ``key = value`` pair per line; blank lines and ``#``
    comments are ignored. List values (``rates``, ``methods``, ``learners``)
    are comma-separated. GP and forest parameters are namespaced as
    ``gp.<field>`` and ``rf.<field>``.
    """
    plain: dict = {}
    gp_kwargs: dict = {}
    rf_kwargs: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("gp."):
                sub = key[3:]
                if sub not in _GP_COERCERS:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                gp_kwargs[sub] = _GP_COERCERS[sub](value)
            elif key.startswith("rf."):
                sub = key[3:]
                if sub not in _RF_COERCERS:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                rf_kwargs[sub] = _RF_COERCERS[sub](value)
            elif key in _LIST_KEYS:
                items = [item.strip() for item in value.split(",") if item.strip()]
                plain[key] = tuple(
                    float(item) if key == "rates" else item for item in items
                )
            elif key in _CONFIG_COERCERS:
                plain[key] = _CONFIG_COERCERS[key](value)
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    for required in ("dataset_path", "target_column", "train_rows"):
        if required not in plain:
            raise ValueError(f"{path}: missing required key {required!r}")
    if gp_kwargs:
        plain["gp"] = GpConfig(**gp_kwargs)
    if rf_kwargs:
        plain["rf"] = ForestConfig(**rf_kwargs)
    return ExperimentConfig(**plain)
