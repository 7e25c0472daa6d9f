"""Measurements of a trained model: accuracy, cosine confusion, pairwise verification,
angular compactness/separation statistics, and CSV exports of features and tables.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .exceptions import EmptyEvalSet, ShapeMismatch, ValidationError, ZeroNorm
from .loss import ZERO_NORM_EPSILON, predict

DEFAULT_THRESHOLD_POINTS = 1001

logger = logging.getLogger("lsoftmax")


def _unit_rows(vectors: np.ndarray, what: str = "feature") -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms < ZERO_NORM_EPSILON):
        index = int(np.flatnonzero(norms.ravel() < ZERO_NORM_EPSILON)[0])
        raise ZeroNorm(f"{what} {index} has norm below {ZERO_NORM_EPSILON:g}")
    return vectors / norms


def unit_angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle between unit vectors as 2·atan2(‖u−v‖, ‖u+v‖), accurate near 0 and π."""
    return 2.0 * np.arctan2(np.linalg.norm(u - v, axis=-1), np.linalg.norm(u + v, axis=-1))


def _class_count(labels: np.ndarray, num_classes: Optional[int]) -> int:
    return int(num_classes) if num_classes is not None else int(labels.max()) + 1


def _require_all_classes(labels: np.ndarray, num_classes: int):
    counts = np.bincount(labels, minlength=num_classes)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise EmptyEvalSet(f"class {missing} has no samples")


# CLASSIFICATION


def accuracy(features, labels, weights) -> float:
    """Fraction of samples whose argmax of plain inner products W_jᵀx is the label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyEvalSet("Cannot compute accuracy of an empty evaluation set")
    return float(np.mean(predict(features, weights) == labels))


# COSINE CONFUSION


def cosine_confusion(features, labels, num_classes: Optional[int] = None) -> np.ndarray:
    """Entry (a, b) is the mean cosine similarity between normalized features of class a and
    class b (all pairs, self-pairs included on the diagonal).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyEvalSet("Cannot compute a confusion matrix of an empty set")
    k = _class_count(labels, num_classes)
    _require_all_classes(labels, k)
    units = _unit_rows(features)
    sums = np.zeros((k, units.shape[1]))
    np.add.at(sums, labels, units)
    means = sums / np.bincount(labels, minlength=k)[:, None]
    return np.clip(means @ means.T, -1.0, 1.0)


# PAIRWISE VERIFICATION


@dataclass(frozen=True)
class VerificationResult:
    best_threshold: float
    best_accuracy: float
    thresholds: np.ndarray
    accuracies: np.ndarray
    true_positive_rate: np.ndarray
    false_positive_rate: np.ndarray


def pair_cosines(features_a, features_b) -> np.ndarray:
    units_a, units_b = _unit_rows(features_a), _unit_rows(features_b)
    if units_a.shape != units_b.shape:
        raise ShapeMismatch(f"pair arrays differ in shape: {units_a.shape} vs {units_b.shape}")
    return np.einsum("nd,nd->n", units_a, units_b)


def verify_pairs(
    features_a, features_b, same_label, thresholds: Optional[np.ndarray] = None
) -> VerificationResult:
    """Classify a pair as "same" iff its cosine similarity is >= threshold, for each point of
    the threshold grid. Returns the accuracy-maximizing threshold (lowest on ties) and the
    sampled ROC curve.
    """
    same = np.asarray(same_label, dtype=bool)
    cosines = pair_cosines(features_a, features_b)
    if same.shape != cosines.shape:
        raise ShapeMismatch(f"{same.size} same-label flags for {cosines.size} pairs")
    if cosines.size == 0:
        raise EmptyEvalSet("No pairs to verify")
    if thresholds is None:
        thresholds = np.linspace(-1.0, 1.0, DEFAULT_THRESHOLD_POINTS)
    thresholds = np.asarray(thresholds, dtype=np.float64)

    accepted = cosines[None, :] >= thresholds[:, None]
    accuracies = np.mean(accepted == same[None, :], axis=1)
    positives, negatives = max(int(same.sum()), 1), max(int((~same).sum()), 1)
    tpr = np.sum(accepted & same[None, :], axis=1) / positives
    fpr = np.sum(accepted & ~same[None, :], axis=1) / negatives
    best = int(np.argmax(accuracies))
    return VerificationResult(
        best_threshold=float(thresholds[best]),
        best_accuracy=float(accuracies[best]),
        thresholds=thresholds,
        accuracies=accuracies,
        true_positive_rate=tpr,
        false_positive_rate=fpr,
    )


def make_pairs(
    features, labels, n_pairs: int, seed: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample ``n_pairs`` pairs, alternating same-class and different-class, deterministically."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise ValidationError("pair sampling needs at least two classes")
    rng = np.random.default_rng(seed)
    by_class = {c: np.flatnonzero(labels == c) for c in np.unique(labels)}
    first, second, same = [], [], []
    for i in range(n_pairs):
        a = int(rng.integers(labels.size))
        pool = by_class[labels[a]] if i % 2 == 0 else np.flatnonzero(labels != labels[a])
        b = int(pool[rng.integers(pool.size)])
        first.append(a)
        second.append(b)
        same.append(labels[a] == labels[b])
    return features[first], features[second], np.asarray(same, dtype=bool)


# ANGULAR STATISTICS


@dataclass(frozen=True)
class AngularStats:
    """Intra-class compactness and inter-class separation of features, in radians.

    ``margin_proxy`` is ``min_interclass_angle - 2 * max(per_class_angular_spread)``; positive
    values mean angularly separated classes.
    """

    per_class_mean_direction: np.ndarray
    per_class_angular_spread: np.ndarray
    min_interclass_angle: float
    margin_proxy: float

    @property
    def mean_spread(self) -> float:
        return float(np.mean(self.per_class_angular_spread))


def angular_stats(features, labels, num_classes: Optional[int] = None) -> AngularStats:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyEvalSet("Cannot compute angular statistics of an empty set")
    k = _class_count(labels, num_classes)
    _require_all_classes(labels, k)
    units = _unit_rows(features)
    sums = np.zeros((k, units.shape[1]))
    np.add.at(sums, labels, units)
    directions = _unit_rows(sums, "class mean direction")

    angles = unit_angle(units, directions[labels])
    spread = np.bincount(labels, weights=angles, minlength=k) / np.bincount(labels, minlength=k)

    upper_a, upper_b = np.triu_indices(k, 1)
    pairwise = unit_angle(directions[upper_a], directions[upper_b])
    min_angle = float(pairwise.min()) if pairwise.size else float(np.pi)
    return AngularStats(
        per_class_mean_direction=directions,
        per_class_angular_spread=spread,
        min_interclass_angle=min_angle,
        margin_proxy=min_angle - 2.0 * float(spread.max()),
    )


def classifier_angles(weights) -> np.ndarray:
    """Pairwise angles θ_(a,b) between classifier vectors."""
    units = _unit_rows(weights, "classifier row")
    return unit_angle(units[:, None, :], units[None, :, :])


def feasible_angles(features, labels, weights) -> np.ndarray:
    """Per class, the largest angle between a sample feature and its own classifier vector."""
    labels = np.asarray(labels, dtype=np.int64)
    units = _unit_rows(features)
    classifiers = _unit_rows(weights, "classifier row")
    angles = unit_angle(units, classifiers[labels])
    result = np.zeros(classifiers.shape[0])
    np.maximum.at(result, labels, angles)
    return result


def ideal_margin(m: int, theta_12: float) -> float:
    """(m-1)/(m+1)·θ₁,₂: the angular margin between two classes under perfect optimization."""
    if m < 1:
        raise ValidationError(f"margin m must be >= 1, got {m}")
    if not 0.0 <= theta_12 <= np.pi:
        raise ValidationError(f"theta_12 must lie in [0, pi], got {theta_12}")
    return (m - 1) / (m + 1) * theta_12


# CSV EXPORTS


def _write_csv(path: Union[str, Path], header: str, rows: np.ndarray, fmt):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, rows, fmt=fmt, delimiter=",", header=header, comments="")
    except OSError as error:
        raise OSError(f"Cannot write {path}: {error}") from error
    logger.info("ExportCsv %s rows=%s", path, rows.shape[0])
    return path


def export_features(features, labels, path: Union[str, Path]) -> Path:
    """CSV with header ``label,f0,...,fD-1``, one row per sample in input order."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise ShapeMismatch(f"features {features.shape} and labels {labels.shape} disagree")
    dim = features.shape[1]
    header = ",".join(["label"] + [f"f{i}" for i in range(dim)])
    rows = np.column_stack([labels.astype(np.float64), features]).reshape(-1, dim + 1)
    return _write_csv(path, header, rows, ["%d"] + ["%.17g"] * dim)


def read_features(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`export_features`."""
    with open(path, "r") as fobj:
        header = fobj.readline().strip().split(",")
        if not header or header[0] != "label":
            raise ValidationError(f"{path} is not a feature export (header {header})")
        body = fobj.read()
    dim = len(header) - 1
    if not body.strip():
        return np.zeros((0, dim)), np.zeros(0, dtype=np.int64)
    table = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    return table[:, 1:], table[:, 0].astype(np.int64)


def export_confusion(matrix: np.ndarray, path: Union[str, Path]) -> Path:
    """Row-major K × K matrix with header ``class,c0,...,cK-1``; first column is the row class."""
    k = matrix.shape[0]
    header = ",".join(["class"] + [f"c{i}" for i in range(k)])
    rows = np.column_stack([np.arange(k, dtype=np.float64), matrix])
    return _write_csv(path, header, rows, ["%d"] + ["%.17g"] * k)


def export_angular_stats(stats: AngularStats, path: Union[str, Path]) -> Path:
    """Per-class spreads plus the two summary quantities repeated on each row."""
    k = stats.per_class_angular_spread.shape[0]
    header = "class,angular_spread,min_interclass_angle,margin_proxy"
    rows = np.column_stack(
        [
            np.arange(k, dtype=np.float64),
            stats.per_class_angular_spread,
            np.full(k, stats.min_interclass_angle),
            np.full(k, stats.margin_proxy),
        ]
    )
    return _write_csv(path, header, rows, ["%d", "%.17g", "%.17g", "%.17g"])


def export_verification(result: VerificationResult, path: Union[str, Path]) -> Path:
    header = "threshold,accuracy,true_positive_rate,false_positive_rate"
    rows = np.column_stack(
        [
            result.thresholds,
            result.accuracies,
            result.true_positive_rate,
            result.false_positive_rate,
        ]
    )
    return _write_csv(path, header, rows, "%.17g")


def export_table(records: Dict[str, np.ndarray], path: Union[str, Path]) -> Path:
    """Generic numeric table, columns in insertion order."""
    header = ",".join(records)
    rows = np.column_stack([np.asarray(v, dtype=np.float64) for v in records.values()])
    return _write_csv(path, header, rows, "%.17g")
