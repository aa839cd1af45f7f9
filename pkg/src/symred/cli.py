"""Command-line interface.

Subcommands: ``reduce`` (write a reduced training CSV), ``train-gp`` /
``train-rf`` / ``train-lr`` (train one model on a train/test CSV pair),
``experiment`` (run a full sweep from a config file) and ``report``
(aggregate a results CSV into summary and runtime tables).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

from .baselines import ForestConfig, LinearRegression, RandomForestRegressor
from .dataset import Normalizer, load_csv
from .gp import GpConfig, SymbolicRegressor
from .harness import (
    RunResult,
    _GP_COERCERS,
    _RF_COERCERS,
    parse_config_file,
    read_results,
    report,
    run_experiment,
    write_results,
    write_table,
)
from .metrics import pearson_r2
from .reduction import REDUCTION_METHODS, ReductionSpec, reduce_dataset


def _peek_header(path) -> list[str]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        try:
            return [h.strip() for h in next(csv.reader(fh))]
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None


def _resolve_target(path, target: str | None) -> str:
    if target:
        return target
    return _peek_header(path)[-1]


def _parse_flat_kv(path, coercers: dict) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in coercers:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = coercers[key](value)
    return out


def _cmd_reduce(args) -> int:
    target = _resolve_target(args.infile, args.target)
    data = load_csv(args.infile, target)
    normalizer = None
    if args.normalize:
        normalizer = Normalizer().fit(data)
        data = normalizer.transform(data)
    spec = ReductionSpec(
        method=args.method,
        target_count=args.count,
        kmeans_batch_size=args.kmeans_batch_size,
        kmeans_iterations=args.kmeans_iterations,
        seed=args.seed,
    )
    reduced = reduce_dataset(data, spec)
    if normalizer is not None:
        reduced = normalizer.inverse_transform(reduced)
    reduced.to_csv(args.outfile)
    print(f"wrote {reduced.n_rows} rows to {args.outfile}")
    return 0


def _load_train_test(args):
    target = _resolve_target(args.train, args.target)
    train = load_csv(args.train, target)
    test = load_csv(args.test, target)
    if args.normalize:
        normalizer = Normalizer().fit(train)
        train = normalizer.transform(train)
        test = normalizer.transform(test)
    return train, test


def _report_run(args, learner: str, train, test, estimator, train_seconds: float):
    train_r2 = pearson_r2(estimator.predict(train.X), train.y)
    test_r2 = pearson_r2(estimator.predict(test.X), test.y)
    print(f"train R^2: {train_r2:.6f}")
    print(f"test R^2: {test_r2:.6f}")
    print(f"wall-clock seconds: {train_seconds:.3f}")
    if args.results:
        row = RunResult(
            dataset=os.path.splitext(os.path.basename(args.train))[0],
            method="original",
            rate=1.0,
            repeat=0,
            learner=learner,
            seed=args.seed,
            train_r2=train_r2,
            test_r2=test_r2,
            reduce_seconds=0.0,
            train_seconds=train_seconds,
            reduced_rows=train.n_rows,
            status="ok",
        )
        write_results([row], args.results, append=True)
        print(f"appended result row to {args.results}")
    return 0


def _cmd_train_gp(args) -> int:
    train, test = _load_train_test(args)
    kwargs = _parse_flat_kv(args.config, _GP_COERCERS) if args.config else {}
    config = GpConfig(**kwargs, seed=args.seed)
    estimator = SymbolicRegressor(
        population_size=config.population_size,
        mutation_rate=config.mutation_rate,
        max_selection_pressure=config.max_selection_pressure,
        comparison_factor=config.comparison_factor,
        max_tree_size=config.max_tree_size,
        max_tree_depth=config.max_tree_depth,
        elites=config.elites,
        constant_opt_iterations=config.constant_opt_iterations,
        const_range=config.const_range,
        init_depth_range=config.init_depth_range,
        init_method=config.init_method,
        max_generations=config.max_generations,
        time_limit=config.time_limit,
        random_state=args.seed,
    )
    started = time.perf_counter()
    estimator.fit(train.X, train.y)
    train_seconds = time.perf_counter() - started
    model, stats = estimator.model_, estimator.stats_
    print(f"model: {model.tree.to_prefix()}")
    print(f"offset a: {model.offset!r}")
    print(f"slope b: {model.slope!r}")
    print(f"generations: {stats.generations}")
    print(f"evaluations: {stats.evaluations}")
    return _report_run(args, "gp", train, test, estimator, train_seconds)


def _cmd_train_rf(args) -> int:
    train, test = _load_train_test(args)
    kwargs = _parse_flat_kv(args.config, _RF_COERCERS) if args.config else {}
    config = ForestConfig(**kwargs)
    estimator = RandomForestRegressor(
        n_trees=config.n_trees,
        instance_fraction=config.instance_fraction,
        feature_fraction=config.feature_fraction,
        min_leaf_size=config.min_leaf_size,
        random_state=args.seed,
    )
    started = time.perf_counter()
    estimator.fit(train.X, train.y)
    train_seconds = time.perf_counter() - started
    print(f"trees: {config.n_trees}")
    return _report_run(args, "rf", train, test, estimator, train_seconds)


def _cmd_train_lr(args) -> int:
    train, test = _load_train_test(args)
    estimator = LinearRegression()
    started = time.perf_counter()
    estimator.fit(train.X, train.y)
    train_seconds = time.perf_counter() - started
    weights = ", ".join(repr(float(w)) for w in estimator.weights_)
    print(f"weights: [{weights}]")
    print(f"intercept: {estimator.intercept_!r}")
    return _report_run(args, "lr", train, test, estimator, train_seconds)


def _cmd_experiment(args) -> int:
    config = parse_config_file(args.config)
    results = run_experiment(config, jobs=args.jobs)
    write_results(results, args.out)
    n_failed = sum(1 for r in results if r.status != "ok")
    print(f"wrote {len(results)} result rows ({n_failed} failed) to {args.out}")
    return 0


def _cmd_report(args) -> int:
    results = read_results(args.infile)
    summary_rows, runtime_rows = report(results)
    write_table(summary_rows, args.out)
    runtime_out = args.runtime_out
    if not runtime_out:
        stem, ext = os.path.splitext(args.out)
        runtime_out = f"{stem}_runtime{ext or '.csv'}"
    write_table(runtime_rows, runtime_out)
    print(f"wrote {len(summary_rows)} summary rows to {args.out}")
    print(f"wrote {len(runtime_rows)} runtime rows to {runtime_out}")
    return 0


def _add_train_args(sub, name: str, help_text: str):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--test", required=True, help="test CSV")
    p.add_argument(
        "--target", help="target column name (default: last header column)"
    )
    p.add_argument("--config", help="flat key=value hyperparameter file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--results", help="results CSV to append a RunResult row to")
    p.add_argument(
        "--no-normalize",
        dest="normalize",
        action="store_false",
        help="skip z-score normalization by training statistics",
    )
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symred",
        description=(
            "Reduce regression training data and train symbolic-regression, "
            "random-forest and linear models on it."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="write a reduced copy of a CSV")
    p.add_argument("--method", required=True, choices=REDUCTION_METHODS)
    p.add_argument("--count", required=True, type=int, help="target instance count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="infile", required=True, help="input CSV")
    p.add_argument("--out", dest="outfile", required=True, help="output CSV")
    p.add_argument(
        "--target", help="target column name (default: last header column)"
    )
    p.add_argument(
        "--normalize",
        action="store_true",
        help=(
            "z-score features and target before reducing, invert afterwards "
            "(k-means assumes normalized input)"
        ),
    )
    p.add_argument("--kmeans-batch-size", type=int, default=100)
    p.add_argument(
        "--kmeans-iterations",
        type=int,
        default=None,
        help="default: 100 per centroid",
    )
    p.set_defaults(func=_cmd_reduce)

    p = _add_train_args(sub, "train-gp", "train a symbolic-regression model")
    p.set_defaults(func=_cmd_train_gp)
    p = _add_train_args(sub, "train-rf", "train the random-forest baseline")
    p.set_defaults(func=_cmd_train_rf)
    p = _add_train_args(sub, "train-lr", "train the linear-regression baseline")
    p.set_defaults(func=_cmd_train_lr)

    p = sub.add_parser("experiment", help="run a reduction/training sweep")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", required=True, help="results CSV to write")
    p.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="parallel worker processes; use 1 for benchmark-grade timings",
    )
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="aggregate a results CSV into tables")
    p.add_argument("--in", dest="infile", required=True, help="results CSV")
    p.add_argument("--out", required=True, help="summary table CSV")
    p.add_argument(
        "--runtime-out",
        help="runtime table CSV (default: <out>_runtime.csv)",
    )
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
