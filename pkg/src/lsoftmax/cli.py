"""Command line interface: ``lsoftmax {fetch,train,eval,gradcheck,figure1,compare}``.

Exit codes: ``0`` success, ``1`` invalid input or configuration, ``2`` runtime or numerical
failure (including a failed gradient check).
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from . import gradcheck, metrics
from .__about__ import __version__
from .artifacts import read_params, write_metrics, write_params
from .data import DatasetSplit, Subset, make_blobs
from .data.fetch import DEFAULT_MNIST_URL, fetch
from .data.mnist import load_mnist
from .exceptions import (
    EmptyEvalSet,
    LSoftmaxError,
    ShapeMismatch,
    UnknownDataset,
    ValidationError,
)
from .helpers import logger_quick_setup
from .models.config import DATA_DIR_ENV, DataSource, ExperimentConfig, load_config, write_config
from .models.network import NetworkSpec
from .nn.network import CLASSIFIER_KEY, Params
from .optim import IterationRecord, TrainResult, evaluate_error, extract_features, train

logger = logging.getLogger("lsoftmax")

ConfigArg = Union[str, Path, ExperimentConfig]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2


def _resolve(config: ConfigArg) -> ExperimentConfig:
    return config if isinstance(config, ExperimentConfig) else load_config(config)


def load_dataset(config: ExperimentConfig) -> DatasetSplit:
    data = config.data
    if data.source == DataSource.blobs:
        return make_blobs(
            n_per_class=data.blob_per_class,
            classes=data.blob_classes,
            dim=data.blob_dim,
            spread=data.blob_spread,
            seed=data.seed,
            radius=data.blob_radius,
            fractions=data.fractions,
        )
    if not data.directory:
        raise UnknownDataset(f"MNIST needs [data] directory or the {DATA_DIR_ENV} variable")
    return load_mnist(
        data.directory,
        fractions=data.fractions,
        train_subset=data.train_subset,
        test_subset=data.test_subset,
        seed=data.seed,
    )


def _eval_subset(dataset: DatasetSplit) -> Subset:
    for name in ("test", "val", "train"):
        subset = getattr(dataset, name)
        if len(subset):
            if name != "test":
                logger.warning("EvalSubset test split is empty, using %s", name)
            return subset
    raise EmptyEvalSet("Every split of the dataset is empty")


def _export_features(spec: NetworkSpec, params: Params, subset: Subset, path: Path):
    features = extract_features(spec, params, subset.inputs)
    metrics.export_features(features, subset.labels, path)
    return features


# FETCH


def cmd_fetch(dataset: str, dest: Union[str, Path], base_url: str = DEFAULT_MNIST_URL):
    logger.info("CommandFetch dataset=%s dest=%s", dataset, dest)
    return fetch(dataset, dest, base_url=base_url)


# TRAIN


@dataclass(frozen=True)
class TrainArtifacts:
    directory: Path
    result: TrainResult
    spec: NetworkSpec
    dataset: DatasetSplit

    @property
    def params(self) -> Params:
        return self.result.state.params

    @property
    def records(self) -> List[IterationRecord]:
        return self.result.records


def cmd_train(config: ConfigArg, output: Optional[Union[str, Path]] = None) -> TrainArtifacts:
    """Train per the config and write the run's artifacts.

    Writes ``metrics.csv``, ``final_params.bin`` and ``resolved_config.ini``; when the
    feature width is at most ``[output] feature_export_max_dim`` also ``features_train.csv``
    and (if the test split is not empty) ``features_test.csv``.
    """
    config = _resolve(config)
    directory = Path(output or config.output.directory)
    dataset = load_dataset(config)
    spec = config.network_spec(dataset.input_shape)
    logger.info("CommandTrain output=%s", directory)

    result = train(spec, dataset, config.train_config())
    params = result.state.params

    directory.mkdir(parents=True, exist_ok=True)
    write_config(config, directory / "resolved_config.ini")
    write_metrics(result.records, directory / "metrics.csv")
    write_params(params, directory / "final_params.bin")
    if spec.feature_dim <= config.output.feature_export_max_dim:
        _export_features(spec, params, dataset.train, directory / "features_train.csv")
        if len(dataset.test):
            _export_features(spec, params, dataset.test, directory / "features_test.csv")
    return TrainArtifacts(directory=directory, result=result, spec=spec, dataset=dataset)


# EVAL


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    angular: metrics.AngularStats
    min_classifier_angle: float
    ideal_margin: float
    verification: Optional[metrics.VerificationResult] = None


def _check_compatible(spec: NetworkSpec, params: Params, num_classes: int):
    if CLASSIFIER_KEY not in params:
        raise ShapeMismatch(f"parameter file has no '{CLASSIFIER_KEY}' entry")
    weights = params[CLASSIFIER_KEY]
    if weights.ndim != 2 or weights.shape[1] != spec.feature_dim:
        raise ShapeMismatch(
            f"classifier feature dimension {weights.shape[-1]} != "
            f"network feature_dim {spec.feature_dim}"
        )
    if weights.shape[0] != num_classes:
        raise ShapeMismatch(f"classifier has {weights.shape[0]} classes, dataset {num_classes}")


def cmd_eval(
    params_path: Union[str, Path], config: ConfigArg, output: Optional[Union[str, Path]] = None
) -> EvalReport:
    """Evaluate saved parameters on the test split (falling back to val, then train).

    Writes ``confusion.csv``, ``angular_stats.csv`` and, when ``[eval] pairs`` is positive,
    ``verification.csv``.
    """
    config = _resolve(config)
    directory = Path(output or config.output.directory)
    dataset = load_dataset(config)
    spec = config.network_spec(dataset.input_shape)
    params = read_params(params_path)
    _check_compatible(spec, params, dataset.num_classes)

    subset = _eval_subset(dataset)
    weights = params[CLASSIFIER_KEY]
    features = extract_features(spec, params, subset.inputs)
    confusion = metrics.cosine_confusion(features, subset.labels, dataset.num_classes)
    angular = metrics.angular_stats(features, subset.labels, dataset.num_classes)
    classifier = metrics.classifier_angles(weights)
    min_angle = float(classifier[np.triu_indices(weights.shape[0], 1)].min())

    verification = None
    if config.eval.pairs:
        first, second, same = metrics.make_pairs(
            features, subset.labels, config.eval.pairs, config.optim.seed
        )
        thresholds = np.linspace(-1.0, 1.0, config.eval.threshold_points)
        verification = metrics.verify_pairs(first, second, same, thresholds)
        metrics.export_verification(verification, directory / "verification.csv")

    metrics.export_confusion(confusion, directory / "confusion.csv")
    metrics.export_angular_stats(angular, directory / "angular_stats.csv")
    return EvalReport(
        accuracy=metrics.accuracy(features, subset.labels, weights),
        confusion=confusion,
        angular=angular,
        min_classifier_angle=min_angle,
        ideal_margin=metrics.ideal_margin(config.loss.m, min_angle),
        verification=verification,
    )


# GRADCHECK


@dataclass(frozen=True)
class GradCheckRow:
    m: int
    seed: int
    max_relative_error: float
    max_absolute_error: float
    passed: bool


def cmd_gradcheck(
    margins: Sequence[int] = (1, 2, 3, 4),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    tolerance: float = gradcheck.DEFAULT_TOLERANCE,
    lambdas: Sequence[float] = (0.0, 1.0, 100.0),
    max_concurrency: Optional[int] = None,
    absolute_tolerance: Optional[float] = None,
) -> List[GradCheckRow]:
    """One row per (m, seed), aggregated over ``lambdas``.

    A coordinate passes when its relative error is within ``tolerance`` or its absolute error
    is within ``absolute_tolerance`` (default ``tolerance * gradcheck.NOISE_FLOOR_RATIO``).
    """
    rows = []
    for m in margins:
        for seed in seeds:
            reports = gradcheck.run_suite([m], [seed], lambdas, max_concurrency)
            rows.append(
                GradCheckRow(
                    m=m,
                    seed=seed,
                    max_relative_error=max(r.max_relative_error for r in reports),
                    max_absolute_error=max(r.max_absolute_error for r in reports),
                    passed=all(r.passed(tolerance, absolute_tolerance) for r in reports),
                )
            )
    return rows


# FIGURE 1


def cmd_figure1(
    config: ConfigArg,
    margins: Sequence[int] = (1, 2, 3, 4),
    seeds: Optional[Sequence[int]] = None,
    output: Optional[Union[str, Path]] = None,
) -> List[Dict[str, float]]:
    """Train the configured network once per (seed, m) and export its training features.

    ``features_m{m}.csv`` go to the output directory (``seed_{s}/`` subdirectories when more
    than one seed is given); ``summary.csv`` holds the angular statistics of every run.
    """
    config = _resolve(config)
    seeds = list(seeds) if seeds is not None else [config.optim.seed]
    directory = Path(output or config.output.directory)
    dataset = load_dataset(config)
    spec = config.network_spec(dataset.input_shape)

    summary = []
    for seed in seeds:
        run_dir = directory / f"seed_{seed}" if len(seeds) > 1 else directory
        for m in margins:
            logger.info("CommandFigure1 seed=%s m=%s", seed, m)
            result = train(spec, dataset, config.train_config(margin=m, seed=seed))
            params = result.state.params
            features = _export_features(spec, params, dataset.train, run_dir / f"features_m{m}.csv")
            stats = metrics.angular_stats(features, dataset.train.labels, dataset.num_classes)
            summary.append(
                {
                    "seed": seed,
                    "m": m,
                    "min_interclass_angle": stats.min_interclass_angle,
                    "mean_spread": stats.mean_spread,
                    "margin_proxy": stats.margin_proxy,
                    "train_error": evaluate_error(spec, params, dataset.train),
                }
            )
    metrics.export_table(
        {key: [row[key] for row in summary] for key in summary[0]}, directory / "summary.csv"
    )
    return summary


# COMPARE


def cmd_compare(
    config: ConfigArg,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    output: Optional[Union[str, Path]] = None,
) -> Dict[int, float]:
    """Plain softmax (m=1) against the configured margin, per seed, on the test split.

    Writes ``compare.csv`` (``seed, m, test_error``) and returns the mean test error per m.
    """
    config = _resolve(config)
    directory = Path(output or config.output.directory)
    dataset = load_dataset(config)
    if len(dataset.test) == 0:
        raise EmptyEvalSet("compare needs a non-empty test split")
    spec = config.network_spec(dataset.input_shape)

    margins = sorted({1, config.loss.m})
    rows = {"seed": [], "m": [], "test_error": []}
    for seed in seeds:
        for m in margins:
            result = train(spec, dataset, config.train_config(margin=m, seed=seed))
            error = evaluate_error(spec, result.state.params, dataset.test)
            logger.info("CompareRun seed=%s m=%s test_error=%.4f", seed, m, error)
            rows["seed"].append(seed)
            rows["m"].append(m)
            rows["test_error"].append(error)
    metrics.export_table(rows, directory / "compare.csv")

    errors = np.asarray(rows["test_error"])
    ms = np.asarray(rows["m"])
    return {m: float(errors[ms == m].mean()) for m in margins}


# ENTRY POINT


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with ``EXIT_INVALID`` instead of argparse's default 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="lsoftmax",
        description="Large-margin softmax training and evaluation.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG logging")
    commands = parser.add_subparsers(dest="command", required=True)

    fetch_cmd = commands.add_parser("fetch", help="Download and verify a dataset")
    fetch_cmd.add_argument("dataset", choices=["mnist"])
    fetch_cmd.add_argument("dest", help="Destination directory")
    fetch_cmd.add_argument("--base-url", default=DEFAULT_MNIST_URL)

    train_cmd = commands.add_parser("train", help="Train from an experiment config")
    train_cmd.add_argument("config")
    train_cmd.add_argument("--output", help="Override [output] directory")

    eval_cmd = commands.add_parser("eval", help="Evaluate saved parameters")
    eval_cmd.add_argument("params", help="final_params.bin of a training run")
    eval_cmd.add_argument("config")
    eval_cmd.add_argument("--output", help="Override [output] directory")

    check_cmd = commands.add_parser("gradcheck", help="Finite-difference check of the loss")
    check_cmd.add_argument("--margins", type=_int_list, default=[1, 2, 3, 4])
    check_cmd.add_argument("--seeds", type=int, default=5, help="Number of seeds per margin")
    check_cmd.add_argument("--tolerance", type=float, default=gradcheck.DEFAULT_TOLERANCE)
    check_cmd.add_argument(
        "--absolute-tolerance",
        type=float,
        default=None,
        help="Absolute error floor per coordinate (default tolerance x NOISE_FLOOR_RATIO)",
    )
    check_cmd.add_argument("--lambdas", type=_float_list, default=[0.0, 1.0, 100.0])
    check_cmd.add_argument("--workers", type=int, default=None, help="Finite-difference threads")

    figure_cmd = commands.add_parser("figure1", help="Export features for several margins")
    figure_cmd.add_argument("config")
    figure_cmd.add_argument("--margins", type=_int_list, default=[1, 2, 3, 4])
    figure_cmd.add_argument("--seeds", type=_int_list, default=None)
    figure_cmd.add_argument("--output", help="Override [output] directory")

    compare_cmd = commands.add_parser("compare", help="Softmax against L-Softmax test error")
    compare_cmd.add_argument("config")
    compare_cmd.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    compare_cmd.add_argument("--output", help="Override [output] directory")
    return parser


def _run(args: argparse.Namespace) -> int:
    if args.command == "fetch":
        for path in cmd_fetch(args.dataset, args.dest, args.base_url):
            print(path)
    elif args.command == "train":
        artifacts = cmd_train(args.config, args.output)
        print(f"artifacts: {artifacts.directory}")
    elif args.command == "eval":
        report = cmd_eval(args.params, args.config, args.output)
        print(f"accuracy: {report.accuracy:.4f}")
        print(f"margin_proxy: {report.angular.margin_proxy:.6f}")
        print(f"ideal_margin: {report.ideal_margin:.6f}")
        if report.verification is not None:
            print(
                f"verification: accuracy {report.verification.best_accuracy:.4f} "
                f"at threshold {report.verification.best_threshold:.3f}"
            )
    elif args.command == "gradcheck":
        floor = args.absolute_tolerance
        if floor is None:
            floor = args.tolerance * gradcheck.NOISE_FLOOR_RATIO
        rows = cmd_gradcheck(
            args.margins, range(args.seeds), args.tolerance, args.lambdas, args.workers, floor
        )
        print(f"relative tolerance {args.tolerance:.1e}, absolute floor {floor:.1e}")
        print(f"{'m':>3} {'seed':>5} {'max_rel_error':>14} {'max_abs_error':>14}  status")
        for row in rows:
            status = "pass" if row.passed else "FAIL"
            print(
                f"{row.m:>3} {row.seed:>5} {row.max_relative_error:>14.3e} "
                f"{row.max_absolute_error:>14.3e}  {status}"
            )
        if not all(row.passed for row in rows):
            return EXIT_FAILURE
    elif args.command == "figure1":
        for row in cmd_figure1(args.config, args.margins, args.seeds, args.output):
            print(
                f"seed {row['seed']} m {row['m']}: margin_proxy {row['margin_proxy']:.4f} "
                f"mean_spread {row['mean_spread']:.4f}"
            )
    elif args.command == "compare":
        for m, error in cmd_compare(args.config, args.seeds, args.output).items():
            print(f"m={m}: mean test error {error:.4f}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger_quick_setup(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return _run(args)
    except ValidationError as error:
        logger.error("InvalidInput %s: %s", type(error).__name__, error)
        return EXIT_INVALID
    except LSoftmaxError as error:
        logger.error("Failure %s: %s", type(error).__name__, error)
        return EXIT_FAILURE
    except OSError as error:
        logger.error("Failure %s: %s", type(error).__name__, error)
        return EXIT_FAILURE
